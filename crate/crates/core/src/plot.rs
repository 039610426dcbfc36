//! Log-log charts of sweep CSVs as standalone SVG files and gnuplot scripts.
//!
//! Each script embeds its series as datablocks (`$s0 << EOD ... EOD`) and
//! plots them with `set logscale xy`, so it runs without the CSV next to it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::Result;
use crate::report::{column, parse_field};

/// What to draw from one CSV: `x` against each `y`, one series per distinct `group` value.
struct ChartSpec {
    file: &'static str,
    x: &'static str,
    ys: &'static [&'static str],
    group: &'static [&'static str],
    title: &'static str,
}

const CHARTS: [ChartSpec; 4] = [
    ChartSpec {
        file: "delta_asymptotics",
        x: "delta",
        ys: &["m1", "m2", "m3"],
        group: &[],
        title: "cell solutions against delta",
    },
    ChartSpec {
        file: "rate_sweep",
        x: "eps",
        ys: &["h1_residual"],
        group: &["delta"],
        title: "weighted H1 expansion residual against eps",
    },
    ChartSpec {
        file: "smoothing",
        x: "eps",
        ys: &["value"],
        group: &["kind"],
        title: "smoothing operator checks against eps",
    },
    ChartSpec {
        file: "lipschitz_profile",
        x: "r",
        ys: &["G"],
        group: &["eps", "delta", "center"],
        title: "averaged weighted gradient against radius",
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn read_series(path: &Path, spec: &ChartSpec) -> Result<Vec<Series>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let xi = column(&headers, spec.x, path)?;
    let yi = spec
        .ys
        .iter()
        .map(|y| column(&headers, y, path))
        .collect::<Result<Vec<_>>>()?;
    let gi = spec
        .group
        .iter()
        .map(|g| column(&headers, g, path))
        .collect::<Result<Vec<_>>>()?;
    let mut groups: BTreeMap<(String, usize), Vec<(f64, f64)>> = BTreeMap::new();
    let mut order: Vec<(String, usize)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.get(0) == Some("fit") {
            continue;
        }
        let x = parse_field(&rec, xi, spec.x, path)?;
        let key: Vec<String> = spec
            .group
            .iter()
            .zip(&gi)
            .map(|(name, &i)| format!("{name}={}", rec.get(i).unwrap_or("")))
            .collect();
        for (k, (&i, name)) in yi.iter().zip(spec.ys).enumerate() {
            let y = parse_field(&rec, i, name, path)?;
            let mut label = key.join(", ");
            if spec.ys.len() > 1 {
                label = if label.is_empty() {
                    name.to_string()
                } else {
                    format!("{name}, {label}")
                };
            }
            let id = (label, k);
            if !groups.contains_key(&id) {
                order.push(id.clone());
            }
            groups.entry(id).or_default().push((x, y));
        }
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let mut points = groups.remove(&id).unwrap_or_default();
            points.retain(|&(x, y)| x > 0.0 && y > 0.0);
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series {
                label: id.0,
                points,
            }
        })
        .collect())
}

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// A log-log line chart with decade grid lines and a legend.
pub fn svg_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (80.0, 200.0, 40.0, 60.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x.log10() - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y.log10()) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    for e in (x0 as i32)..=(x1 as i32) {
        let px = sx(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            top + ph
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"#,
            top + ph + 18.0
        );
    }
    for e in (y0 as i32)..=(y1 as i32) {
        let py = sy(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/>"##,
            left + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
            left - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 16.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        top + ph / 2.0,
        escape(ylabel)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        for &(x, y) in &ser.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = top + 14.0 * i as f64 + 8.0;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="10">{}</text>"#,
            lx + 20.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Gnuplot script drawing the same series; output goes to `<stem>_gnuplot.svg`.
pub fn gnuplot_script(
    stem: &str,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
) -> String {
    let mut s = String::new();
    for (i, ser) in series.iter().enumerate() {
        let _ = writeln!(s, "$s{i} << EOD");
        for &(x, y) in &ser.points {
            let _ = writeln!(s, "{x:.16e} {y:.16e}");
        }
        s.push_str("EOD\n");
    }
    let _ = writeln!(s, "set terminal svg size 720,480");
    let _ = writeln!(s, "set output '{stem}_gnuplot.svg'");
    let _ = writeln!(s, "set title '{}'", title.replace('\'', "''"));
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    s.push_str(
        "set logscale xy\nset format x '10^{%L}'\nset format y '10^{%L}'\nset key outside right\n",
    );
    let items: Vec<String> = series
        .iter()
        .enumerate()
        .map(|(i, ser)| {
            format!(
                "$s{i} using 1:2 with linespoints title '{}'",
                ser.label.replace('\'', "''")
            )
        })
        .collect();
    let _ = writeln!(s, "plot {}", items.join(", \\\n     "));
    s
}

/// Writes `<name>.svg` and `<name>.gp` for every known sweep CSV in `dir`.
/// Returns the written files; sweeps with fewer than two points per series are skipped.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for spec in &CHARTS {
        let path = dir.join(format!("{}.csv", spec.file));
        if !path.exists() {
            continue;
        }
        let series: Vec<Series> = read_series(&path, spec)?
            .into_iter()
            .filter(|s| s.points.len() >= 2)
            .collect();
        if series.is_empty() {
            warn!(
                "{}: fewer than two positive points per series, plot skipped",
                path.display()
            );
            continue;
        }
        let ylabel = spec.ys.join(", ");
        let svg = dir.join(format!("{}.svg", spec.file));
        fs::write(&svg, svg_chart(spec.title, spec.x, &ylabel, &series))?;
        let gp = dir.join(format!("{}.gp", spec.file));
        fs::write(
            &gp,
            gnuplot_script(spec.file, spec.title, spec.x, &ylabel, &series),
        )?;
        written.push(svg);
        written.push(gp);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_sweep_chart() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("rate_sweep.csv"),
            "eps,delta,l2_residual,h1_residual,mu_fit\n\
             1.25e-1,1.0e0,1.0e-2,2.0e-1,\n\
             6.25e-2,1.0e0,5.0e-3,1.5e-1,\n\
             1.25e-1,0.0e0,1.0e-2,3.0e-1,\n\
             6.25e-2,0.0e0,5.0e-3,2.0e-1,\n\
             fit,1.0e0,,,4.0e-1\n",
        )
        .unwrap();
        let files = emit_plots(dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let svg = fs::read_to_string(dir.path().join("rate_sweep.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        let gp = fs::read_to_string(dir.path().join("rate_sweep.gp")).unwrap();
        assert!(gp.contains("set logscale xy"));
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("rate_sweep.csv"),
            "eps,delta,l2_residual\n1e-1,1,1e-2\n",
        )
        .unwrap();
        let err = emit_plots(dir.path()).unwrap_err();
        assert!(err.to_string().contains("`h1_residual`"), "{err}");
    }

    #[test]
    fn malformed_value_is_named() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("smoothing.csv"),
            "kind,eps,value\na,oops,1\n",
        )
        .unwrap();
        let err = emit_plots(dir.path()).unwrap_err();
        assert!(err.to_string().contains("`eps`"), "{err}");
    }

    #[test]
    fn single_row_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("smoothing.csv"),
            "kind,eps,value\na,1e-1,1\n",
        )
        .unwrap();
        assert!(emit_plots(dir.path()).unwrap().is_empty());
        assert!(!dir.path().join("smoothing.svg").exists());
    }
}
