//! Aggregation of sweep artifacts into a pass/fail summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::{fmt_f, Check, CHECKS_HEADER};

const DATA_FILES: [&str; 5] = [
    "homogenized_tensor.csv",
    "delta_asymptotics.csv",
    "rate_sweep.csv",
    "lipschitz_profile.csv",
    "descent.csv",
];

#[derive(Debug, Clone)]
pub struct FlaggedCheck {
    pub source: String,
    pub check: Check,
}

/// Fitted exponents, observed Lipschitz constants and criterion flags.
#[derive(Debug, Clone, Default)]
pub struct RateReport {
    /// `(name, value)` for `p1`, `p2`, `p3` and `mu_fit[δ]`.
    pub exponents: Vec<(String, Option<f64>)>,
    /// `(eps, delta, center) → C_obs`
    pub c_obs: Vec<(String, String, String, f64)>,
    pub checks: Vec<FlaggedCheck>,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.check.passed)
    }

    /// Pass/fail per criterion id.
    pub fn by_criterion(&self) -> BTreeMap<u32, bool> {
        let mut out = BTreeMap::new();
        for c in &self.checks {
            let e = out.entry(c.check.criterion).or_insert(true);
            *e &= c.check.passed;
        }
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        if !self.exponents.is_empty() {
            s.push_str("exponents\n");
            for (name, v) in &self.exponents {
                let v = v.map(fmt_f).unwrap_or_else(|| "n/a".into());
                let _ = writeln!(s, "  {name:<28} {v}");
            }
        }
        if !self.c_obs.is_empty() {
            s.push_str("observed Lipschitz constants (eps, delta, center, C_obs)\n");
            for (e, d, c, v) in &self.c_obs {
                let _ = writeln!(s, "  {e}  {d}  [{c}]  {}", fmt_f(*v));
            }
        }
        if !self.checks.is_empty() {
            s.push_str("checks\n");
            for c in &self.checks {
                let k = &c.check;
                let _ = writeln!(
                    s,
                    "  [{}] criterion {:>2} {}::{} = {} ({})",
                    if k.passed { "PASS" } else { "FAIL" },
                    k.criterion,
                    c.source,
                    k.name,
                    fmt_f(k.value),
                    k.threshold
                );
            }
            s.push_str("criteria\n");
            for (id, ok) in self.by_criterion() {
                let _ = writeln!(
                    s,
                    "  criterion {id:>2}: {}",
                    if ok { "PASS" } else { "FAIL" }
                );
            }
        }
        s
    }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    Ok(csv::ReaderBuilder::new().flexible(true).from_path(path)?)
}

/// Index of `name` in the header, or an error naming the column and file.
pub fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Report(format!("{}: missing column `{name}`", path.display())))
}

/// Parses field `idx` of `rec` as a float, naming the column on failure.
pub fn parse_field(rec: &csv::StringRecord, idx: usize, name: &str, path: &Path) -> Result<f64> {
    let raw = rec.get(idx).unwrap_or("");
    raw.trim().parse::<f64>().map_err(|_| {
        Error::Report(format!(
            "{}: column `{name}` has non-numeric value `{raw}` on line {}",
            path.display(),
            rec.position().map_or(0, |p| p.line())
        ))
    })
}

fn read_checks(path: &Path) -> Result<Vec<Check>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = CHECKS_HEADER
        .iter()
        .map(|h| column(&headers, h, path))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let criterion = rec
            .get(idx[0])
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| {
                Error::Report(format!(
                    "{}: column `criterion` is not an integer",
                    path.display()
                ))
            })?;
        let value = parse_field(&rec, idx[2], "value", path)?;
        let passed = match rec.get(idx[4]) {
            Some("true") => true,
            Some("false") => false,
            _ => {
                return Err(Error::Report(format!(
                    "{}: column `passed` is not a boolean",
                    path.display()
                )))
            }
        };
        out.push(Check {
            criterion,
            name: rec.get(idx[1]).unwrap_or("").to_string(),
            value,
            threshold: rec.get(idx[3]).unwrap_or("").to_string(),
            passed,
        });
    }
    Ok(out)
}

fn optional(raw: Option<&str>) -> Option<f64> {
    raw.and_then(|v| v.trim().parse().ok())
}

fn read_exponents(dir: &Path, out: &mut Vec<(String, Option<f64>)>) -> Result<()> {
    let path = dir.join("delta_asymptotics.csv");
    if path.exists() {
        let mut rdr = reader(&path)?;
        let headers = rdr.headers()?.clone();
        let cols = ["m1", "m2", "m3"]
            .iter()
            .map(|c| column(&headers, c, &path))
            .collect::<Result<Vec<_>>>()?;
        let first = column(&headers, "delta", &path)?;
        for rec in rdr.records() {
            let rec = rec?;
            if rec.get(first) == Some("fit") {
                for (name, &c) in ["p1", "p2", "p3"].iter().zip(&cols) {
                    out.push((name.to_string(), optional(rec.get(c))));
                }
            }
        }
    }
    let path = dir.join("rate_sweep.csv");
    if path.exists() {
        let mut rdr = reader(&path)?;
        let headers = rdr.headers()?.clone();
        let eps = column(&headers, "eps", &path)?;
        let delta = column(&headers, "delta", &path)?;
        let mu = column(&headers, "mu_fit", &path)?;
        for rec in rdr.records() {
            let rec = rec?;
            if rec.get(eps) == Some("fit") {
                out.push((
                    format!("mu_fit[delta={}]", rec.get(delta).unwrap_or("")),
                    optional(rec.get(mu)),
                ));
            }
        }
    }
    Ok(())
}

fn read_c_obs(dir: &Path) -> Result<Vec<(String, String, String, f64)>> {
    let path = dir.join("lipschitz_profile.csv");
    let mut out: Vec<(String, String, String, f64)> = Vec::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut rdr = reader(&path)?;
    let headers = rdr.headers()?.clone();
    let e = column(&headers, "eps", &path)?;
    let d = column(&headers, "delta", &path)?;
    let c = column(&headers, "center", &path)?;
    let v = column(&headers, "C_obs", &path)?;
    for rec in rdr.records() {
        let rec = rec?;
        let key = (
            rec.get(e).unwrap_or("").to_string(),
            rec.get(d).unwrap_or("").to_string(),
            rec.get(c).unwrap_or("").to_string(),
        );
        let val = parse_field(&rec, v, "C_obs", &path)?;
        if !out
            .iter()
            .any(|x| (&x.0, &x.1, &x.2) == (&key.0, &key.1, &key.2))
        {
            out.push((key.0, key.1, key.2, val));
        }
    }
    Ok(out)
}

fn checks_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("checks_") && name.ends_with(".csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Reads every sweep artifact in `dir` and writes `summary.csv` and `summary.txt`.
pub fn run_report(dir: &Path) -> Result<RateReport> {
    if !dir.is_dir() {
        return Err(Error::Report(format!(
            "no sweep artifacts found: {} is not a directory",
            dir.display()
        )));
    }
    let files = checks_files(dir)?;
    let has_data = DATA_FILES.iter().any(|f| dir.join(f).exists());
    if files.is_empty() && !has_data {
        return Err(Error::Report(format!(
            "no sweep artifacts found in {}",
            dir.display()
        )));
    }
    let mut report = RateReport::default();
    for f in &files {
        let source = f
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("")
            .trim_start_matches("checks_")
            .replace('_', "-");
        for check in read_checks(f)? {
            report.checks.push(FlaggedCheck {
                source: source.clone(),
                check,
            });
        }
    }
    report.checks.sort_by_key(|c| c.check.criterion);
    read_exponents(dir, &mut report.exponents)?;
    report.c_obs = read_c_obs(dir)?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record([
        "criterion",
        "source",
        "check",
        "value",
        "threshold",
        "passed",
    ])?;
    for c in &report.checks {
        let k = &c.check;
        w.write_record([
            k.criterion.to_string(),
            c.source.clone(),
            k.name.clone(),
            fmt_f(k.value),
            k.threshold.clone(),
            k.passed.to_string(),
        ])?;
    }
    w.flush()?;
    fs::write(dir.join("summary.txt"), report.render())?;
    Ok(report)
}
