//! Experiment configuration read from a sectioned TOML file.
//!
//! Every key is optional; missing keys take the defaults below. Sections:
//! `[geometry]`, `[tensor]`, `[solver]`, `[cell]`, `[delta_sweep]`,
//! `[rate_sweep]` (with its own `[rate_sweep.tensor]`), `[regularity]`
//! (with `[regularity.tensor]`) and `[output]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::MAX_EPS;
use crate::error::{Error, Result};
use crate::geometry::UnitCellGeometry;
use crate::tensor::ElasticityTensorField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Disk,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub dimension: usize,
    pub shape: ShapeKind,
    pub radius: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            dimension: 2,
            shape: ShapeKind::Disk,
            radius: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Isotropic,
    Modulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TensorConfig {
    pub kind: TensorKind,
    pub lambda: f64,
    pub mu: f64,
    pub modulation_amplitude: f64,
}

impl Default for TensorConfig {
    fn default() -> Self {
        Self {
            kind: TensorKind::Isotropic,
            lambda: 1.0,
            mu: 1.0,
            modulation_amplitude: 0.0,
        }
    }
}

impl TensorConfig {
    fn modulated(amplitude: f64) -> Self {
        Self {
            kind: TensorKind::Modulated,
            modulation_amplitude: amplitude,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Cell grid resolution `n` for `cell` and `delta-sweep`.
    pub cell_cells: usize,
    /// Elements per period `m`; domain grids use `N = m/ε` and cell grids `n = m`.
    pub elements_per_period: usize,
    pub cell_tol: f64,
    pub domain_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cell_cells: 64,
            elements_per_period: 8,
            cell_tol: 1e-10,
            domain_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConfig {
    pub delta: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self { delta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaSweepConfig {
    pub deltas: Vec<f64>,
}

impl Default for DeltaSweepConfig {
    fn default() -> Self {
        Self {
            deltas: vec![1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSweepConfig {
    pub eps: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Scales for the smoothing-operator checks.
    pub smoothing_eps: Vec<f64>,
    pub tensor: TensorConfig,
}

impl Default for RateSweepConfig {
    fn default() -> Self {
        Self {
            eps: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            deltas: vec![1.0, 0.1, 0.01, 0.0],
            smoothing_eps: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            tensor: TensorConfig::modulated(0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityConfig {
    pub eps: Vec<f64>,
    pub deltas: Vec<f64>,
    pub theta: f64,
    /// Centers of the Lipschitz profiles, radius `outer_radius`.
    pub centers: Vec<Vec<f64>>,
    pub outer_radius: f64,
    /// Centers of the Caccioppoli balls `B(c, r)`, `B(c, 2r)`.
    pub caccioppoli_centers: Vec<Vec<f64>>,
    pub caccioppoli_radius: f64,
    /// Centers of the flatness descent check on homogenized solutions.
    pub descent_centers: Vec<Vec<f64>>,
    pub descent_radius: f64,
    pub tensor: TensorConfig,
}

fn lattice(xs: &[f64], ys: &[f64]) -> Vec<Vec<f64>> {
    ys.iter()
        .flat_map(|&y| xs.iter().map(move |&x| vec![x, y]))
        .collect()
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self {
            eps: vec![1.0 / 16.0, 1.0 / 32.0],
            deltas: vec![1.0, 0.1, 0.01, 0.0],
            theta: 0.2,
            centers: vec![
                vec![0.5, 0.5],
                vec![0.3, 0.3],
                vec![0.7, 0.3],
                vec![0.3, 0.7],
                vec![0.7, 0.7],
            ],
            outer_radius: 0.25,
            caccioppoli_centers: lattice(&[0.25, 0.375, 0.5, 0.625, 0.75], &[0.25, 0.4, 0.6, 0.75]),
            caccioppoli_radius: 0.1,
            descent_centers: lattice(&[0.3, 0.4, 0.5, 0.6, 0.7], &[0.3, 0.7]),
            descent_radius: 0.25,
            tensor: TensorConfig::modulated(0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub tensor: TensorConfig,
    pub solver: SolverConfig,
    pub cell: CellConfig,
    pub delta_sweep: DeltaSweepConfig,
    pub rate_sweep: RateSweepConfig,
    pub regularity: RegularityConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .map_or_else(|| "<file>".to_string(), |s| locate_key(text, s.start));
            Error::config(key, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<file>", e.to_string()))
    }

    pub fn geometry(&self) -> Result<UnitCellGeometry> {
        match self.geometry.shape {
            ShapeKind::Disk => {
                UnitCellGeometry::disk(self.geometry.dimension, self.geometry.radius)
            }
            ShapeKind::None => UnitCellGeometry::homogeneous(self.geometry.dimension),
        }
    }

    pub fn tensor(&self) -> Result<ElasticityTensorField> {
        build_tensor(&self.tensor, self.geometry.dimension)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(2..=3).contains(&g.dimension) {
            return Err(Error::config("geometry.dimension", "must be 2 or 3"));
        }
        if g.shape == ShapeKind::Disk && !(g.radius > 0.0 && g.radius < 0.5) {
            return Err(Error::config("geometry.radius", "must lie in (0, 0.5)"));
        }
        self.geometry()
            .map_err(|e| Error::config("geometry", e.to_string()))?;
        check_tensor("tensor", &self.tensor, g.dimension)?;
        check_tensor("rate_sweep.tensor", &self.rate_sweep.tensor, g.dimension)?;
        check_tensor("regularity.tensor", &self.regularity.tensor, g.dimension)?;

        let s = &self.solver;
        if s.cell_cells < 8 {
            return Err(Error::config("solver.cell_cells", "must be at least 8"));
        }
        if s.elements_per_period < 8 {
            return Err(Error::config(
                "solver.elements_per_period",
                "must be at least 8",
            ));
        }
        for (key, v) in [
            ("solver.cell_tol", s.cell_tol),
            ("solver.domain_tol", s.domain_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(key, "must lie in (0, 1)"));
            }
        }
        check_delta_value("cell.delta", self.cell.delta)?;
        check_deltas("delta_sweep.deltas", &self.delta_sweep.deltas)?;
        if self.delta_sweep.deltas.contains(&0.0) {
            return Err(Error::config(
                "delta_sweep.deltas",
                "values must be positive",
            ));
        }
        check_eps(
            "rate_sweep.eps",
            &self.rate_sweep.eps,
            s.elements_per_period,
        )?;
        check_eps(
            "rate_sweep.smoothing_eps",
            &self.rate_sweep.smoothing_eps,
            s.elements_per_period,
        )?;
        check_deltas("rate_sweep.deltas", &self.rate_sweep.deltas)?;

        let r = &self.regularity;
        check_eps("regularity.eps", &r.eps, s.elements_per_period)?;
        check_deltas("regularity.deltas", &r.deltas)?;
        if !(r.theta > 0.0 && r.theta < 0.25) {
            return Err(Error::config("regularity.theta", "must lie in (0, 1/4)"));
        }
        let eps_max = r.eps.iter().copied().fold(0.0, f64::max);
        if eps_max > 0.5 * r.outer_radius {
            return Err(Error::config(
                "regularity.outer_radius",
                "must be at least twice every eps",
            ));
        }
        check_centers(
            "regularity.centers",
            &r.centers,
            r.outer_radius,
            g.dimension,
        )?;
        check_centers(
            "regularity.caccioppoli_centers",
            &r.caccioppoli_centers,
            2.0 * r.caccioppoli_radius,
            g.dimension,
        )?;
        check_centers(
            "regularity.descent_centers",
            &r.descent_centers,
            r.descent_radius,
            g.dimension,
        )?;
        if self.output.dir.as_os_str().is_empty() {
            return Err(Error::config("output.dir", "must not be empty"));
        }
        Ok(())
    }
}

pub fn build_tensor(t: &TensorConfig, dim: usize) -> Result<ElasticityTensorField> {
    match t.kind {
        TensorKind::Isotropic => ElasticityTensorField::isotropic(t.lambda, t.mu, dim),
        TensorKind::Modulated => {
            ElasticityTensorField::modulated(t.lambda, t.mu, dim, t.modulation_amplitude)
        }
    }
}

fn check_tensor(key: &str, t: &TensorConfig, dim: usize) -> Result<()> {
    build_tensor(t, dim)
        .map(|_| ())
        .map_err(|e| Error::config(key, e.to_string()))
}

fn check_delta_value(key: &str, d: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::config(key, format!("delta {d} outside [0, 1]")));
    }
    Ok(())
}

fn check_deltas(key: &str, list: &[f64]) -> Result<()> {
    if list.is_empty() {
        return Err(Error::config(key, "list must not be empty"));
    }
    list.iter().try_for_each(|&d| check_delta_value(key, d))
}

fn check_eps(key: &str, list: &[f64], per_period: usize) -> Result<()> {
    if list.is_empty() {
        return Err(Error::config(key, "list must not be empty"));
    }
    for &e in list {
        if !(e > 0.0 && e <= MAX_EPS * (1.0 + 1e-12)) {
            return Err(Error::config(key, format!("eps {e} outside (0, 1/6]")));
        }
        let cells = per_period as f64 / e;
        if (cells - cells.round()).abs() > 1e-9 {
            return Err(Error::config(
                key,
                format!("elements_per_period / eps = {cells} is not an integer"),
            ));
        }
    }
    Ok(())
}

fn check_centers(key: &str, centers: &[Vec<f64>], radius: f64, dim: usize) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::config(key, "list must not be empty"));
    }
    if !(radius > 0.0) {
        return Err(Error::config(key, "radius must be positive"));
    }
    for c in centers {
        if c.len() != dim {
            return Err(Error::config(
                key,
                format!("center {c:?} does not have {dim} coordinates"),
            ));
        }
        if c.iter()
            .any(|&v| v - radius < -1e-12 || v + radius > 1.0 + 1e-12)
        {
            return Err(Error::config(
                key,
                format!("ball of radius {radius} around {c:?} leaves the unit box"),
            ));
        }
    }
    Ok(())
}

/// Dotted key path (`section.key`) of the entry containing byte offset `pos`.
fn locate_key(text: &str, pos: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        offset += line.len();
        if offset > pos {
            break;
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}
