//! Correctors `χ_{j,δ}^β`, the homogenized tensor `Â_δ`, and the small-`δ`
//! asymptotics of the cell solutions.

use rayon::prelude::*;

use crate::cell::{
    assemble_cell_operator, assemble_corrector_rhs, solve_periodic, weighted_mean, SparseOperator,
};
use crate::error::{Error, Result};
use crate::field::DiscreteVectorField;
use crate::fit::{fit_power_law, PowerFit};
use crate::geometry::UnitCellGeometry;
use crate::grid::{field_at_qp, Q1Reference};
use crate::sparse::CgReport;
use crate::tensor::{ElasticityTensorField, Tensor4};

/// The `d × d` family of cell correctors for one `δ`.
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    operator: SparseOperator,
    /// Index `j · d + β`.
    correctors: Vec<DiscreteVectorField>,
    reports: Vec<CgReport>,
    tol: f64,
}

impl CorrectorSet {
    pub fn dim(&self) -> usize {
        self.operator.grid().dim()
    }

    pub fn delta(&self) -> f64 {
        self.operator.delta()
    }

    pub fn cells(&self) -> usize {
        self.operator.grid().cells()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn geometry(&self) -> &UnitCellGeometry {
        self.operator.geometry()
    }

    pub fn tensor(&self) -> &ElasticityTensorField {
        self.operator.tensor()
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.operator
    }

    /// `χ_j^β` as a `d`-component periodic field.
    pub fn corrector(&self, j: usize, beta: usize) -> &DiscreteVectorField {
        &self.correctors[j * self.dim() + beta]
    }

    pub fn reports(&self) -> &[CgReport] {
        &self.reports
    }

    /// Largest normalization defect: `|∫χ|` (δ > 0) or `|∫k₀χ| / ∫k₀` (δ = 0).
    pub fn normalization_defect(&self) -> f64 {
        let d = self.dim();
        self.correctors
            .iter()
            .map(|c| {
                let m = if self.delta() > 0.0 {
                    c.integral()
                } else {
                    weighted_mean(&self.operator, c)
                };
                m[..d].iter().map(|v| v.abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `max_{j,β} ‖k_δ χ_j^β‖_{L²(Q)} + ‖k_δ ∇χ_j^β‖_{L²(Q)}`
    pub fn weighted_bound(&self) -> f64 {
        let grid = *self.operator.grid();
        let r = self.operator.mesh().reference();
        let nq = r.num_points();
        let vol = grid.element_volume();
        let d = self.dim();
        let w = self.operator.weights();
        self.correctors
            .iter()
            .map(|c| {
                let (mut l2, mut h1) = (0.0, 0.0);
                for e in 0..grid.num_elements() {
                    let nodes = grid.element_nodes(e);
                    for q in 0..nq {
                        let k = w[e * nq + q];
                        let (u, g) = field_at_qp(&grid, r, &nodes, q, c.values(), d);
                        let wq = vol * r.weights[q] * k * k;
                        for a in 0..d {
                            l2 += wq * u[a] * u[a];
                            for kk in 0..d {
                                h1 += wq * g[kk][a] * g[kk][a];
                            }
                        }
                    }
                }
                l2.sqrt() + h1.sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves all `d²` cell problems.
pub fn compute_correctors(
    geom: &UnitCellGeometry,
    a: &ElasticityTensorField,
    delta: f64,
    n: usize,
    tol: f64,
) -> Result<CorrectorSet> {
    let op = assemble_cell_operator(geom, a, delta, n)?;
    let d = geom.dim();
    let solved: Vec<Result<(DiscreteVectorField, CgReport)>> = (0..d * d)
        .into_par_iter()
        .map(|idx| {
            let (j, beta) = (idx / d, idx % d);
            let wrap = |e: Error| Error::Corrector {
                j,
                beta,
                source: Box::new(e),
            };
            let load = assemble_corrector_rhs(&op, j, beta).map_err(wrap)?;
            solve_periodic(&op, &load, tol).map_err(wrap)
        })
        .collect();
    let mut correctors = Vec::with_capacity(d * d);
    let mut reports = Vec::with_capacity(d * d);
    for s in solved {
        let (c, r) = s?;
        correctors.push(c);
        reports.push(r);
    }
    Ok(CorrectorSet {
        operator: op,
        correctors,
        reports,
        tol,
    })
}

/// Constant effective tensor with its ellipticity constants on symmetric matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenizedTensor {
    tensor: Tensor4,
    kappa1: f64,
    kappa2: f64,
    delta: f64,
    cells: usize,
}

impl HomogenizedTensor {
    pub fn from_tensor(tensor: Tensor4, delta: f64, cells: usize) -> Self {
        let (kappa1, kappa2) = tensor.symmetric_eigen_bounds();
        Self {
            tensor,
            kappa1,
            kappa2,
            delta,
            cells,
        }
    }

    pub fn tensor(&self) -> &Tensor4 {
        &self.tensor
    }

    pub fn dim(&self) -> usize {
        self.tensor.dim()
    }

    /// `(κ̃₁, κ̃₂)`
    pub fn bounds(&self) -> (f64, f64) {
        (self.kappa1, self.kappa2)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn symmetry_residual(&self) -> f64 {
        self.tensor.symmetry_violation()
    }

    /// As a constant coefficient field for the homogenized problem.
    pub fn as_field(&self) -> ElasticityTensorField {
        ElasticityTensorField::constant(self.tensor)
    }
}

/// `â_{ij}^{αβ} = ∫_Q k_δ a_{ik}^{αγ} ∂_k X_j^{γβ}` with `X_j^β = y_j e^β + χ_j^β`,
/// evaluated with the assembly quadrature.
pub fn homogenized_tensor(set: &CorrectorSet) -> HomogenizedTensor {
    let op = &set.operator;
    let grid = *op.grid();
    let r = op.mesh().reference();
    let nq = r.num_points();
    let d = grid.dim();
    let vol = grid.element_volume();
    let base = op.tensor().base();
    let coef = op.coefficients();
    let mut hat = Tensor4::zeros(d);
    for j in 0..d {
        for beta in 0..d {
            let chi = set.corrector(j, beta);
            // flux[i][α] = ∫ c(y) a_{ik}^{αγ} ∂_k X^γ
            let mut flux = [[0.0; 3]; 3];
            for e in 0..grid.num_elements() {
                let nodes = grid.element_nodes(e);
                for q in 0..nq {
                    let c = coef[e * nq + q];
                    if c == 0.0 {
                        continue;
                    }
                    let (_, mut g) = field_at_qp(&grid, r, &nodes, q, chi.values(), d);
                    g[j][beta] += 1.0;
                    let s = base.contract(&g);
                    let w = vol * r.weights[q] * c;
                    for i in 0..d {
                        for al in 0..d {
                            flux[i][al] += w * s[i][al];
                        }
                    }
                }
            }
            for i in 0..d {
                for al in 0..d {
                    hat.set(i, j, al, beta, flux[i][al]);
                }
            }
        }
    }
    HomogenizedTensor::from_tensor(hat, set.delta(), set.cells())
}

/// `(κ̃₁, κ̃₂)`; fails when `κ̃₁ ≤ 0`.
pub fn check_hom_ellipticity(hat: &HomogenizedTensor) -> Result<(f64, f64)> {
    let (k1, k2) = hat.bounds();
    if k1 <= 0.0 {
        return Err(Error::EllipticityLost(k1));
    }
    Ok((k1, k2))
}

/// Squared `L²(Q)` norm of a phase-restricted corrector gradient family:
/// `Σ_{j,β} ∫ phase(y) |∇(X_a − X_b)|²` where `X_b` may be absent (then the
/// affine part is kept).
fn family_gradient_norm(
    a: &CorrectorSet,
    b: Option<&CorrectorSet>,
    phase: impl Fn(&[f64]) -> f64,
) -> f64 {
    let op = &a.operator;
    let grid = *op.grid();
    let d = grid.dim();
    let reference = Q1Reference::new(d);
    let nq = reference.num_points();
    let vol = grid.element_volume();
    let mut total = 0.0;
    for j in 0..d {
        for beta in 0..d {
            let ca = a.corrector(j, beta);
            let cb = b.map(|s| s.corrector(j, beta));
            for e in 0..grid.num_elements() {
                let nodes = grid.element_nodes(e);
                for q in 0..nq {
                    let x = crate::assembly::qp_position(&grid, &reference, e, q);
                    let p = phase(&x[..d]);
                    if p == 0.0 {
                        continue;
                    }
                    let (_, mut g) = field_at_qp(&grid, &reference, &nodes, q, ca.values(), d);
                    match cb {
                        Some(cb) => {
                            let (_, gb) = field_at_qp(&grid, &reference, &nodes, q, cb.values(), d);
                            for k in 0..d {
                                for al in 0..d {
                                    g[k][al] -= gb[k][al];
                                }
                            }
                        }
                        None => g[j][beta] += 1.0,
                    }
                    let mut s = 0.0;
                    for k in 0..d {
                        for al in 0..d {
                            s += g[k][al] * g[k][al];
                        }
                    }
                    total += vol * reference.weights[q] * p * s;
                }
            }
        }
    }
    total
}

/// One row of the `δ`-asymptotics table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticsRow {
    pub delta: f64,
    /// `‖1₊ ∇(X₀ − X_δ)‖_{L²(Q)}`
    pub m1: f64,
    /// `‖1₋ ∇X_δ‖_{L²(Q)}`
    pub m2: f64,
    /// `max |Â_0 − Â_δ|`, i.e. `|Q∩ω| Â₀ − Â_δ` with `Â₀` averaged over the matrix.
    pub m3: f64,
    pub kappa1: f64,
    pub symmetry_residual: f64,
}

#[derive(Debug, Clone)]
pub struct AsymptoticsTable {
    pub rows: Vec<AsymptoticsRow>,
    pub cells: usize,
    pub hat_zero: HomogenizedTensor,
    pub p1: Option<PowerFit>,
    pub p2: Option<PowerFit>,
    pub p3: Option<PowerFit>,
}

/// Values below this are treated as numerically zero and left out of the fits.
pub const FIT_FLOOR: f64 = 1e-12;

fn fit_column(rows: &[AsymptoticsRow], pick: impl Fn(&AsymptoticsRow) -> f64) -> Option<PowerFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.delta, pick(r)))
        .filter(|&(_, v)| v >= FIT_FLOOR)
        .collect();
    fit_power_law(&pts).ok()
}

/// Measures the convergence of the cell solutions as `δ → 0`.
pub fn delta_asymptotics(
    geom: &UnitCellGeometry,
    a: &ElasticityTensorField,
    deltas: &[f64],
    n: usize,
    tol: f64,
) -> Result<AsymptoticsTable> {
    if deltas.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "delta sweep needs at least 4 points, got {}",
            deltas.len()
        )));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
        return Err(Error::InvalidArgument(
            "delta sweep values must lie in (0, 1]".into(),
        ));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "delta sweep must be strictly descending".into(),
        ));
    }
    if deltas[0] / deltas[deltas.len() - 1] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(
            "delta sweep must span at least two decades".into(),
        ));
    }
    let zero = compute_correctors(geom, a, 0.0, n, tol)?;
    let hat_zero = homogenized_tensor(&zero);
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let set = compute_correctors(geom, a, delta, n, tol)?;
        let hat = homogenized_tensor(&set);
        let m1 = family_gradient_norm(&set, Some(&zero), |y| geom.indicator_plus(y)).sqrt();
        let m2 = family_gradient_norm(&set, None, |y| geom.indicator_minus(y)).sqrt();
        let m3 = hat.tensor().max_abs_diff(hat_zero.tensor());
        rows.push(AsymptoticsRow {
            delta,
            m1,
            m2,
            m3,
            kappa1: hat.bounds().0,
            symmetry_residual: hat.symmetry_residual(),
        });
    }
    Ok(AsymptoticsTable {
        p1: fit_column(&rows, |r| r.m1),
        p2: fit_column(&rows, |r| r.m2),
        p3: fit_column(&rows, |r| r.m3),
        rows,
        cells: n,
        hat_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso() -> ElasticityTensorField {
        ElasticityTensorField::isotropic(1.0, 1.0, 2).unwrap()
    }

    #[test]
    fn homogeneous_medium_has_zero_correctors() {
        let g = UnitCellGeometry::homogeneous(2).unwrap();
        let set = compute_correctors(&g, &iso(), 1.0, 16, 1e-10).unwrap();
        for j in 0..2 {
            for b in 0..2 {
                assert!(set.corrector(j, b).max_abs() < 1e-10);
            }
        }
        let hat = homogenized_tensor(&set);
        assert!(hat.tensor().max_abs_diff(iso().base()) < 1e-10);
        let (k1, k2) = check_hom_ellipticity(&hat).unwrap();
        assert!((k1 - 2.0).abs() < 1e-10 && (k2 - 4.0).abs() < 1e-10);
    }

    #[test]
    fn delta_one_erases_geometry() {
        let a = ElasticityTensorField::modulated(1.0, 1.0, 2, 0.4).unwrap();
        let with = compute_correctors(&UnitCellGeometry::disk(2, 0.3).unwrap(), &a, 1.0, 16, 1e-11)
            .unwrap();
        let without = compute_correctors(
            &UnitCellGeometry::homogeneous(2).unwrap(),
            &a,
            1.0,
            16,
            1e-11,
        )
        .unwrap();
        let d = homogenized_tensor(&with)
            .tensor()
            .max_abs_diff(homogenized_tensor(&without).tensor());
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn perforated_tensor_is_softer_and_symmetric() {
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let set = compute_correctors(&g, &iso(), 0.0, 32, 1e-11).unwrap();
        assert!(set.normalization_defect() < 1e-10);
        let hat = homogenized_tensor(&set);
        assert!(hat.symmetry_residual() < 1e-8);
        let (k1, _) = check_hom_ellipticity(&hat).unwrap();
        assert!(k1 > 0.0 && k1 < 2.0, "{k1}");
    }

    #[test]
    fn hat_monotone_in_delta() {
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let deltas = [1.0, 0.1, 0.01, 1e-4];
        let hats: Vec<Tensor4> = deltas
            .iter()
            .map(|&d| {
                *homogenized_tensor(&compute_correctors(&g, &iso(), d, 16, 1e-11).unwrap()).tensor()
            })
            .collect();
        // Â_δ − Â_δ' must be positive semidefinite on symmetric matrices for δ > δ'
        for w in hats.windows(2) {
            let mut diff = Tensor4::zeros(2);
            for (k, (x, y)) in w[0].entries().iter().zip(w[1].entries()).enumerate() {
                let (i, j, a, b) = (k / 8, (k / 4) % 2, (k / 2) % 2, k % 2);
                diff.set(i, j, a, b, x - y);
            }
            let (lo, _) = diff.symmetric_eigen_bounds();
            assert!(lo > -1e-9, "{lo}");
        }
    }

    #[test]
    fn homogeneous_asymptotics_vanish() {
        let g = UnitCellGeometry::homogeneous(2).unwrap();
        let t = delta_asymptotics(&g, &iso(), &[1.0, 0.1, 0.03, 0.01], 8, 1e-10).unwrap();
        for r in &t.rows {
            assert_eq!(r.m1, 0.0);
            assert_eq!(r.m3, 0.0);
            assert_eq!(r.m2, 0.0);
        }
        assert!(t.p1.is_none() && t.p3.is_none());
    }

    #[test]
    fn sweep_preconditions() {
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        assert!(delta_asymptotics(&g, &iso(), &[1.0, 0.1, 0.01], 8, 1e-8).is_err());
        assert!(delta_asymptotics(&g, &iso(), &[0.01, 0.1, 0.5, 1.0], 8, 1e-8).is_err());
        assert!(delta_asymptotics(&g, &iso(), &[1.0, 0.5, 0.3, 0.2], 8, 1e-8).is_err());
        assert!(delta_asymptotics(&g, &iso(), &[1.0, 0.1, 0.0, 0.01], 8, 1e-8).is_err());
    }
}
