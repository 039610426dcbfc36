//! The oscillating Dirichlet problem on a box, its homogenized counterpart,
//! weighted norms and field snapshots.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::assembly::{self, QuadratureSamples};
use crate::error::{Error, Result};
use crate::field::DiscreteVectorField;
use crate::geometry::{check_delta, UnitCellGeometry};
use crate::grid::{field_at_qp, Grid, Point, Q1Reference};
use crate::homogenize::HomogenizedTensor;
use crate::sparse::{pcg, CgReport, CgSettings, Constraints, StencilMatrix};
use crate::tensor::{ElasticityTensorField, Mat};

/// Smallest admissible number of elements per period.
pub const MIN_ELEMENTS_PER_PERIOD: f64 = 8.0;
/// Largest admissible period.
pub const MAX_EPS: f64 = 1.0 / 6.0;

pub type VectorMap = Arc<dyn Fn(&Point) -> [f64; 3] + Send + Sync>;

/// A smooth vector field `F` whose trace is the Dirichlet datum.
#[derive(Clone)]
pub enum BoundaryData {
    /// `F(x) = (sin πx₂ + 0.3x₁, cos πx₁)` in 2D; in 3D the third component
    /// is `sin πx₁ · cos πx₂ + 0.2x₃` and the first two are unchanged.
    Smooth,
    /// `F(x) = M x + q` with `M[α][k] = ∂_k F^α`.
    Affine {
        matrix: Mat,
        offset: [f64; 3],
    },
    Zero,
    Custom(VectorMap),
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Smooth => write!(f, "Smooth"),
            Self::Affine { matrix, offset } => f
                .debug_struct("Affine")
                .field("matrix", matrix)
                .field("offset", offset)
                .finish(),
            Self::Zero => write!(f, "Zero"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl BoundaryData {
    pub fn eval(&self, x: &Point) -> [f64; 3] {
        use std::f64::consts::PI;
        match self {
            Self::Smooth => [
                (PI * x[1]).sin() + 0.3 * x[0],
                (PI * x[0]).cos(),
                (PI * x[0]).sin() * (PI * x[1]).cos() + 0.2 * x[2],
            ],
            Self::Affine { matrix, offset } => {
                let mut out = *offset;
                for (a, o) in out.iter_mut().enumerate() {
                    for k in 0..3 {
                        *o += matrix[a][k] * x[k];
                    }
                }
                out
            }
            Self::Zero => [0.0; 3],
            Self::Custom(f) => f(x),
        }
    }
}

/// Geometry, data and resolution of one domain solve on the box
/// `[origin, origin + length]^d`.
#[derive(Debug, Clone)]
pub struct DomainProblem {
    grid: Grid,
    eps: f64,
    delta: f64,
    boundary: BoundaryData,
    tol: f64,
}

impl DomainProblem {
    /// Unit box `[0,1]^d` with `cells` elements per side.
    pub fn unit_box(
        dim: usize,
        cells: usize,
        eps: f64,
        delta: f64,
        boundary: BoundaryData,
    ) -> Result<Self> {
        Self::on_box(dim, cells, 0.0, 1.0, eps, delta, boundary)
    }

    pub fn on_box(
        dim: usize,
        cells: usize,
        origin: f64,
        length: f64,
        eps: f64,
        delta: f64,
        boundary: BoundaryData,
    ) -> Result<Self> {
        check_delta(delta)?;
        if !(eps > 0.0 && eps <= MAX_EPS * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "eps must lie in (0, 1/6], got {eps}"
            )));
        }
        let grid = Grid::cube(dim, cells, origin, length)?;
        let per_period = eps / grid.h();
        if per_period < MIN_ELEMENTS_PER_PERIOD * (1.0 - 1e-9) {
            return Err(Error::UnderResolved { eps, h: grid.h() });
        }
        Ok(Self {
            grid,
            eps,
            delta,
            boundary,
            tol: 1e-10,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    /// Nodal interpolant of `F`, the initial guess carrying the boundary values.
    pub fn boundary_field(&self) -> DiscreteVectorField {
        DiscreteVectorField::interpolate(self.grid, self.dim(), |x| self.boundary.eval(x))
    }
}

/// Assembled Dirichlet operator on the box.
#[derive(Debug, Clone)]
pub struct DomainOperator {
    grid: Grid,
    matrix: StencilMatrix,
    samples: QuadratureSamples,
    free: Vec<bool>,
}

impl DomainOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &StencilMatrix {
        &self.matrix
    }

    /// Degrees of freedom solved for: interior, and touching the matrix phase when `δ = 0`.
    pub fn free_dofs(&self) -> &[bool] {
        &self.free
    }

    /// `k_δ(x/ε)` at the quadrature points.
    pub fn weights(&self) -> &[f64] {
        &self.samples.weight
    }

    /// `uᵀ K u = ∫ k A ∇u·∇u`
    pub fn energy(&self, u: &DiscreteVectorField) -> f64 {
        self.matrix.bilinear(u.values(), u.values())
    }

    /// `K u`
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.matrix.apply(u, &mut out);
        out
    }

    fn solve(&self, x: Vec<f64>, tol: f64) -> Result<(DiscreteVectorField, CgReport)> {
        let mut x = x;
        let b = vec![0.0; x.len()];
        let report = pcg(
            &self.matrix,
            &b,
            &mut x,
            Constraints {
                free: Some(&self.free),
                deflate_constants: false,
            },
            CgSettings::new(tol),
        )?;
        let field = DiscreteVectorField::new(self.grid, self.grid.dim(), x)?;
        Ok((field, report))
    }
}

fn build_operator(
    prob: &DomainProblem,
    samples: QuadratureSamples,
    base: &crate::tensor::Tensor4,
) -> DomainOperator {
    let grid = prob.grid;
    let d = grid.dim();
    let reference = Q1Reference::new(d);
    let matrix = assembly::assemble(&grid, &reference, base, &samples.coef);
    let active = assembly::active_nodes(&grid, &reference, &samples.coef);
    let free = (0..grid.num_nodes() * d)
        .map(|i| {
            let node = i / d;
            !grid.is_boundary_node(node) && active[node]
        })
        .collect();
    DomainOperator {
        grid,
        matrix,
        samples,
        free,
    }
}

/// Galerkin matrix of `∫_Ω k_δ(x/ε) A(x/ε) ∇u·∇w`.
pub fn assemble_epsilon_operator(
    prob: &DomainProblem,
    geom: &UnitCellGeometry,
    a: &ElasticityTensorField,
) -> Result<DomainOperator> {
    check_dims(prob, geom.dim(), a.dim())?;
    let d = prob.dim();
    let (eps, delta) = (prob.eps, prob.delta);
    let reference = Q1Reference::new(d);
    let samples = assembly::sample_coefficients(&prob.grid, &reference, |x| {
        let k = geom.kappa(delta, &x[..d], eps);
        let y: Vec<f64> = x[..d].iter().map(|v| v / eps).collect();
        (k, k * a.scale_at(&y))
    });
    Ok(build_operator(prob, samples, a.base()))
}

/// Galerkin matrix of the constant-coefficient operator `−div(Â ∇)`.
pub fn assemble_homogenized_operator(
    prob: &DomainProblem,
    hat: &HomogenizedTensor,
) -> Result<DomainOperator> {
    check_dims(prob, hat.dim(), hat.dim())?;
    let (k1, _) = hat.bounds();
    if k1 <= 0.0 {
        return Err(Error::EllipticityLost(k1));
    }
    let reference = Q1Reference::new(prob.dim());
    let n = prob.grid.num_elements() * reference.num_points();
    let samples = QuadratureSamples {
        weight: vec![1.0; n],
        coef: vec![1.0; n],
    };
    Ok(build_operator(prob, samples, hat.tensor()))
}

fn check_dims(prob: &DomainProblem, g: usize, a: usize) -> Result<()> {
    if prob.dim() != g || prob.dim() != a {
        return Err(Error::GridMismatch(format!(
            "problem dimension {} vs geometry {g} and tensor {a}",
            prob.dim()
        )));
    }
    Ok(())
}

/// `u_{ε,δ}`: boundary nodes carry the interpolated datum exactly.
pub fn solve_epsilon_problem(
    prob: &DomainProblem,
    geom: &UnitCellGeometry,
    a: &ElasticityTensorField,
) -> Result<(DiscreteVectorField, CgReport)> {
    let op = assemble_epsilon_operator(prob, geom, a)?;
    let mut x = prob.boundary_field().into_values();
    for (v, &f) in x.iter_mut().zip(&op.free) {
        if f {
            *v = 0.0;
        }
    }
    // nodes with no matrix support when δ = 0 are not boundary nodes; keep them at zero
    let grid = prob.grid;
    let d = grid.dim();
    for (i, v) in x.iter_mut().enumerate() {
        if !grid.is_boundary_node(i / d) && !op.free[i] {
            *v = 0.0;
        }
    }
    op.solve(x, prob.tol)
}

/// `u_{0,δ}` for the constant tensor `Â`.
pub fn solve_homogenized(
    prob: &DomainProblem,
    hat: &HomogenizedTensor,
) -> Result<(DiscreteVectorField, CgReport)> {
    let op = assemble_homogenized_operator(prob, hat)?;
    let mut x = prob.boundary_field().into_values();
    for (v, &f) in x.iter_mut().zip(&op.free) {
        if f {
            *v = 0.0;
        }
    }
    op.solve(x, prob.tol)
}

/// Integration region for weighted norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Full,
    Ball { center: Point, radius: f64 },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::Full => true,
            Self::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2 <= radius * radius
            }
        }
    }
}

/// Calls `f(x, w, k, u, ∇u)` at every quadrature point of `region` where
/// `k = k_δ(x/ε)` is non-zero; `w` is the quadrature weight.
pub fn for_each_weighted_point(
    u: &DiscreteVectorField,
    geom: &UnitCellGeometry,
    delta: f64,
    eps: f64,
    region: Region,
    mut f: impl FnMut(&Point, f64, f64, &[f64; 3], &[[f64; 3]; 3]),
) {
    let grid = u.grid();
    let d = grid.dim();
    let r = Q1Reference::new(d);
    let vol = grid.element_volume();
    let h = grid.h();
    for e in 0..grid.num_elements() {
        let o = grid.element_origin(e);
        if let Region::Ball { center, radius } = region {
            // skip elements that cannot meet the ball
            let far = (0..d).any(|k| center[k] < o[k] - radius || center[k] > o[k] + h + radius);
            if far {
                continue;
            }
        }
        let nodes = grid.element_nodes(e);
        for q in 0..r.num_points() {
            let mut x = [0.0; 3];
            for k in 0..d {
                x[k] = o[k] + r.points[q][k] * h;
            }
            if !region.contains(&x[..d]) {
                continue;
            }
            let k = geom.kappa(delta, &x[..d], eps);
            if k == 0.0 {
                continue;
            }
            let (val, g) = field_at_qp(grid, &r, &nodes, q, u.values(), u.ncomp());
            f(&x, vol * r.weights[q], k, &val, &g);
        }
    }
}

/// `(‖k_δ^ε u‖_{L²(region)}, ‖k_δ^ε ∇u‖_{L²(region)})`
pub fn weighted_norms(
    u: &DiscreteVectorField,
    geom: &UnitCellGeometry,
    delta: f64,
    eps: f64,
    region: Region,
) -> (f64, f64) {
    let nc = u.ncomp().min(3);
    let d = u.grid().dim();
    let (mut l2, mut h1) = (0.0, 0.0);
    for_each_weighted_point(u, geom, delta, eps, region, |_, w, k, val, g| {
        for a in 0..nc {
            l2 += w * k * val[a] * val[a];
            for row in g.iter().take(d) {
                h1 += w * k * row[a] * row[a];
            }
        }
    });
    (l2.sqrt(), h1.sqrt())
}

/// Nodal gradient obtained by averaging the element-center gradients of the
/// elements sharing a node. Component `k · d + α` holds `∂_k u^α`.
pub fn recovered_gradient(u: &DiscreteVectorField) -> DiscreteVectorField {
    let grid = *u.grid();
    let d = grid.dim();
    let nc = u.ncomp();
    let center = [0.5; 3];
    let (_, dphi) = Q1Reference::eval_at(d, &center);
    let inv_h = 1.0 / grid.h();
    let mut sum = vec![0.0; grid.num_nodes() * d * nc];
    let mut count = vec![0u32; grid.num_nodes()];
    let nb = 1usize << d;
    for e in 0..grid.num_elements() {
        let nodes = grid.element_nodes(e);
        let mut g = [[0.0; 3]; 3];
        for b in 0..nb {
            for a in 0..nc.min(3) {
                let v = u.values()[nodes[b] * nc + a];
                for k in 0..d {
                    g[k][a] += dphi[b][k] * inv_h * v;
                }
            }
        }
        for &n in nodes.iter().take(nb) {
            count[n] += 1;
            for k in 0..d {
                for a in 0..nc.min(3) {
                    sum[n * d * nc + k * nc + a] += g[k][a];
                }
            }
        }
    }
    for (n, &c) in count.iter().enumerate() {
        if c > 0 {
            sum[n * d * nc..(n + 1) * d * nc]
                .iter_mut()
                .for_each(|v| *v /= c as f64);
        }
    }
    DiscreteVectorField::new(grid, d * nc, sum).expect("sizes match by construction")
}

/// Binary layout: three little-endian `u64` (d, cells per side, components),
/// then the nodal values as little-endian `f64`, nodes with the first axis
/// fastest and components fastest within a node. A `.meta` text file with
/// `key = value` lines sits beside it.
pub fn write_snapshot(
    path: &Path,
    field: &DiscreteVectorField,
    extra: &[(&str, String)],
) -> Result<()> {
    let grid = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    for v in [grid.dim() as u64, grid.cells() as u64, field.ncomp() as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let mut m = BufWriter::new(File::create(meta_path(path))?);
    writeln!(m, "dim = {}", grid.dim())?;
    writeln!(m, "cells = {}", grid.cells())?;
    writeln!(m, "components = {}", field.ncomp())?;
    writeln!(m, "origin = {:e}", grid.origin())?;
    writeln!(m, "length = {:e}", grid.length())?;
    writeln!(m, "periodic = {}", grid.is_periodic())?;
    writeln!(m, "byte_order = little-endian")?;
    writeln!(m, "value_type = f64")?;
    for (k, v) in extra {
        writeln!(m, "{k} = {v}")?;
    }
    m.flush()?;
    Ok(())
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Reads a snapshot written by [`write_snapshot`]. The box extent and
/// periodicity come from the sidecar file when present.
pub fn read_snapshot(path: &Path) -> Result<DiscreteVectorField> {
    let mut r = BufReader::new(File::open(path)?);
    let mut word = [0u8; 8];
    let mut header = [0u64; 3];
    for h in header.iter_mut() {
        r.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word);
    }
    let [dim, cells, ncomp] = header.map(|v| v as usize);
    let (mut origin, mut length, mut periodic) = (0.0, 1.0, false);
    if let Ok(text) = std::fs::read_to_string(meta_path(path)) {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                let v = v.trim();
                let bad = |_| Error::Report(format!("bad snapshot metadata line: {line}"));
                match k.trim() {
                    "origin" => origin = v.parse().map_err(bad)?,
                    "length" => length = v.parse().map_err(bad)?,
                    "periodic" => periodic = v == "true",
                    _ => {}
                }
            }
        }
    }
    let grid = if periodic {
        Grid::periodic(dim, cells)?
    } else {
        Grid::cube(dim, cells, origin, length)?
    };
    let n = grid.num_nodes() * ncomp;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut word)?;
        values.push(f64::from_le_bytes(word));
    }
    if r.read(&mut word)? != 0 {
        return Err(Error::GridMismatch("snapshot has trailing bytes".into()));
    }
    DiscreteVectorField::new(grid, ncomp, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogenize::HomogenizedTensor;
    use crate::tensor::Tensor4;

    fn iso() -> ElasticityTensorField {
        ElasticityTensorField::isotropic(1.0, 1.0, 2).unwrap()
    }

    fn affine() -> BoundaryData {
        let mut m = [[0.0; 3]; 3];
        m[0] = [0.3, -0.7, 0.0];
        m[1] = [1.1, 0.2, 0.0];
        BoundaryData::Affine {
            matrix: m,
            offset: [0.5, -0.25, 0.0],
        }
    }

    fn max_dev(u: &DiscreteVectorField, f: &BoundaryData) -> f64 {
        let g = u.grid();
        (0..g.num_nodes())
            .map(|n| {
                let x = g.node_coord(n);
                let t = f.eval(&x);
                (0..2)
                    .map(|a| (u.node(n)[a] - t[a]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DomainProblem::unit_box(2, 64, 0.2, 1.0, BoundaryData::Zero).is_err());
        assert!(matches!(
            DomainProblem::unit_box(2, 32, 1.0 / 8.0, 1.0, BoundaryData::Zero),
            Err(Error::UnderResolved { .. })
        ));
        assert!(DomainProblem::unit_box(2, 64, 1.0 / 8.0, 1.5, BoundaryData::Zero).is_err());
        assert!(DomainProblem::unit_box(2, 64, 1.0 / 8.0, 1.0, BoundaryData::Zero).is_ok());
    }

    #[test]
    fn affine_data_reproduced_for_constant_tensor() {
        let p = DomainProblem::unit_box(2, 64, 1.0 / 8.0, 1.0, affine()).unwrap();
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let (u, _) = solve_epsilon_problem(&p, &g, &iso()).unwrap();
        assert!(max_dev(&u, &affine()) < 1e-8);
    }

    #[test]
    fn zero_data_gives_zero() {
        let p = DomainProblem::unit_box(2, 64, 1.0 / 8.0, 0.0, BoundaryData::Zero).unwrap();
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let (u, rep) = solve_epsilon_problem(&p, &g, &iso()).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn dirichlet_trace_exact_and_galerkin_orthogonal() {
        let p = DomainProblem::unit_box(2, 64, 1.0 / 8.0, 0.1, BoundaryData::Smooth).unwrap();
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let a = ElasticityTensorField::modulated(1.0, 1.0, 2, 0.3).unwrap();
        let (u, _) = solve_epsilon_problem(&p, &g, &a).unwrap();
        let grid = *u.grid();
        let f = p.boundary_field();
        for n in (0..grid.num_nodes()).filter(|&n| grid.is_boundary_node(n)) {
            assert_eq!(u.node(n), f.node(n));
        }
        let op = assemble_epsilon_operator(&p, &g, &a).unwrap();
        let r = op.apply(u.values());
        let scale = op.matrix().max_abs() * f.max_abs();
        // pseudo-random interior test fields
        let mut state = 0x2545F4914F6CDD1Du64;
        for _ in 0..100 {
            let mut dot = 0.0;
            let mut norm = 0.0;
            for (i, &fr) in op.free_dofs().iter().enumerate() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                if fr {
                    let w = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                    dot += w * r[i];
                    norm += w * w;
                }
            }
            assert!(dot.abs() <= 1e-8 * scale * norm.sqrt(), "{dot}");
        }
    }

    #[test]
    fn homogenized_affine_and_linearity() {
        let hat = HomogenizedTensor::from_tensor(Tensor4::isotropic(0.7, 1.3, 2), 1.0, 16);
        let p = DomainProblem::unit_box(2, 48, 1.0 / 6.0, 1.0, affine()).unwrap();
        let (u, _) = solve_homogenized(&p, &hat).unwrap();
        assert!(max_dev(&u, &affine()) < 1e-8);

        let mk = |b| {
            DomainProblem::unit_box(2, 48, 1.0 / 6.0, 1.0, b)
                .unwrap()
                .with_tolerance(1e-13)
                .unwrap()
        };
        let a = affine();
        let sum = {
            let a = a.clone();
            BoundaryData::Custom(Arc::new(move |x| {
                let (p, q) = (a.eval(x), BoundaryData::Smooth.eval(x));
                [p[0] + q[0], p[1] + q[1], 0.0]
            }))
        };
        let (u1, _) = solve_homogenized(&mk(a), &hat).unwrap();
        let (u2, _) = solve_homogenized(&mk(BoundaryData::Smooth), &hat).unwrap();
        let (u12, _) = solve_homogenized(&mk(sum), &hat).unwrap();
        let diff = u1
            .linear_combination(1.0, &u2, 1.0)
            .unwrap()
            .linear_combination(1.0, &u12, -1.0)
            .unwrap();
        assert!(diff.max_abs() < 1e-10, "{}", diff.max_abs());
    }

    #[test]
    fn weighted_norms_of_affine_field() {
        let grid = Grid::cube(2, 128, 0.0, 1.0).unwrap();
        let u = DiscreteVectorField::interpolate(grid, 2, |x| affine().eval(x));
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        assert_eq!(
            weighted_norms(
                &DiscreteVectorField::zeros(grid, 2),
                &g,
                0.3,
                0.125,
                Region::Full
            ),
            (0.0, 0.0)
        );
        // |M|² = 0.09 + 0.49 + 1.21 + 0.04
        let m_norm = 1.83f64.sqrt();
        // ∫ (0.5 + 0.3x − 0.7y)² + (−0.25 + 1.1x + 0.2y)² over the unit square
        let l2_exact = (0.25f64 + 0.09 / 3.0 + 0.49 / 3.0 + 0.15 - 0.35 - 0.21 / 2.0
            + 0.0625
            + 1.21 / 3.0
            + 0.04 / 3.0
            - 0.275
            - 0.05
            + 0.22 / 2.0)
            .sqrt();
        let (l2, h1) = weighted_norms(&u, &g, 1.0, 0.125, Region::Full);
        assert!((l2 - l2_exact).abs() < 1e-3, "{l2} {l2_exact}");
        assert!((h1 - m_norm).abs() < 1e-10);
        let ball = Region::Ball {
            center: [0.5, 0.5, 0.0],
            radius: 0.3,
        };
        let (_, h1b) = weighted_norms(&u, &g, 1.0, 0.125, ball);
        let area = std::f64::consts::PI * 0.09;
        assert!((h1b - m_norm * area.sqrt()).abs() / (m_norm * area.sqrt()) < 1e-3 * 5.0);
    }

    #[test]
    fn norm_inside_inclusion_vanishes_for_perforated_weight() {
        let grid = Grid::cube(2, 128, 0.0, 1.0).unwrap();
        let u = DiscreteVectorField::interpolate(grid, 2, |x| [x[0] + 1.0, x[1] * x[0], 0.0]);
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let ball = Region::Ball {
            center: [0.0625, 0.0625, 0.0],
            radius: 0.02,
        };
        assert_eq!(weighted_norms(&u, &g, 0.0, 0.125, ball), (0.0, 0.0));
    }

    #[test]
    fn recovered_gradient_exact_for_affine() {
        let grid = Grid::cube(2, 16, 0.0, 1.0).unwrap();
        let u = DiscreteVectorField::interpolate(grid, 2, |x| affine().eval(x));
        let g = recovered_gradient(&u);
        for n in 0..grid.num_nodes() {
            let v = g.node(n);
            // component k·d + α holds ∂_k u^α
            assert!((v[0] - 0.3).abs() < 1e-12 && (v[1] - 1.1).abs() < 1e-12);
            assert!((v[2] + 0.7).abs() < 1e-12 && (v[3] - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        let grid = Grid::cube(2, 8, -0.5, 2.0).unwrap();
        let u = DiscreteVectorField::interpolate(grid, 2, |x| [x[0].sin(), x[1] * 3.0, 0.0]);
        write_snapshot(&path, &u, &[("eps", "0.125".into())]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 24 + 81 * 2 * 8);
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &8u64.to_le_bytes());
        let back = read_snapshot(&path).unwrap();
        assert_eq!(back, u);
        let meta = std::fs::read_to_string(meta_path(&path)).unwrap();
        assert!(meta.contains("eps = 0.125"));
    }
}
