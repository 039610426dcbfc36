//! Periodic finite elements on the unit cell: assembly of the weighted
//! bilinear form, corrector loads and the normalized conjugate gradient solve.
//!
//! For `δ = 0` quadrature points inside inclusions contribute nothing, which
//! leaves a natural (traction-free) condition on the hole boundaries. Nodes
//! whose whole support lies in the holes are dropped from the solve and set
//! to zero.

use crate::assembly::{self, QuadratureSamples};
use crate::error::{Error, Result};
use crate::field::DiscreteVectorField;
use crate::geometry::{check_delta, UnitCellGeometry};
use crate::grid::{field_at_qp, Grid, Q1Reference};
use crate::sparse::{pcg, CgReport, CgSettings, Constraints, StencilMatrix};
use crate::tensor::ElasticityTensorField;

/// Uniform periodic Q1 mesh of `Q = [0,1)^d`.
#[derive(Debug, Clone)]
pub struct PeriodicMesh {
    grid: Grid,
    reference: Q1Reference,
}

impl PeriodicMesh {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::Assembly(format!(
                "cell grid needs n >= 8 cells per side, got {n}"
            )));
        }
        Ok(Self {
            grid: Grid::periodic(dim, n)?,
            reference: Q1Reference::new(dim),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn reference(&self) -> &Q1Reference {
        &self.reference
    }
}

/// Assembled cell operator together with the samples it was built from.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    mesh: PeriodicMesh,
    matrix: StencilMatrix,
    samples: QuadratureSamples,
    /// Per degree of freedom: takes part in the solve.
    free: Vec<bool>,
    geometry: UnitCellGeometry,
    tensor: ElasticityTensorField,
    delta: f64,
}

impl SparseOperator {
    pub fn matrix(&self) -> &StencilMatrix {
        &self.matrix
    }

    pub fn mesh(&self) -> &PeriodicMesh {
        &self.mesh
    }

    pub fn grid(&self) -> &Grid {
        &self.mesh.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn geometry(&self) -> &UnitCellGeometry {
        &self.geometry
    }

    pub fn tensor(&self) -> &ElasticityTensorField {
        &self.tensor
    }

    /// `k_δ` at quadrature points, indexed `element · nq + q`.
    pub fn weights(&self) -> &[f64] {
        &self.samples.weight
    }

    /// `k_δ · m` at quadrature points.
    pub fn coefficients(&self) -> &[f64] {
        &self.samples.coef
    }

    pub fn free_dofs(&self) -> &[bool] {
        &self.free
    }

    /// Number of degrees of freedom excluded from the solve (hole interiors).
    pub fn num_excluded(&self) -> usize {
        self.free.iter().filter(|f| !**f).count()
    }

    /// `uᵀ K v`
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        self.matrix.bilinear(u, v)
    }
}

fn validate(geom: &UnitCellGeometry, a: &ElasticityTensorField, delta: f64) -> Result<()> {
    check_delta(delta)?;
    if geom.dim() != a.dim() {
        return Err(Error::Assembly(format!(
            "geometry dimension {} differs from tensor dimension {}",
            geom.dim(),
            a.dim()
        )));
    }
    Ok(())
}

/// Galerkin matrix of `(u, φ) ↦ ∫_Q k_δ a_{ik}^{αγ} ∂_k u^γ ∂_i φ^α`.
pub fn assemble_cell_operator(
    geom: &UnitCellGeometry,
    a: &ElasticityTensorField,
    delta: f64,
    n: usize,
) -> Result<SparseOperator> {
    validate(geom, a, delta)?;
    let mesh = PeriodicMesh::new(geom.dim(), n)?;
    let d = geom.dim();
    let samples = assembly::sample_coefficients(&mesh.grid, &mesh.reference, |x| {
        let k = geom.kappa(delta, &x[..d], 1.0);
        (k, k * a.scale_at(&x[..d]))
    });
    let matrix = assembly::assemble(&mesh.grid, &mesh.reference, a.base(), &samples.coef);
    let active = assembly::active_nodes(&mesh.grid, &mesh.reference, &samples.coef);
    let free = (0..mesh.grid.num_nodes() * d)
        .map(|i| active[i / d])
        .collect();
    Ok(SparseOperator {
        mesh,
        matrix,
        samples,
        free,
        geometry: *geom,
        tensor: *a,
        delta,
    })
}

/// Load for the corrector `χ_j^β`:
/// `L(φ) = −∫_Q k_δ a_{ij}^{αβ} ∂_i φ^α`, the affine part `y_j e^β` moved to the right.
pub fn assemble_corrector_rhs(op: &SparseOperator, j: usize, beta: usize) -> Result<Vec<f64>> {
    let grid = op.grid();
    let d = grid.dim();
    if j >= d || beta >= d {
        return Err(Error::InvalidArgument(format!(
            "corrector index ({j}, {beta}) out of range for d = {d}"
        )));
    }
    let r = &op.mesh.reference;
    let nb = r.num_basis();
    let nq = r.num_points();
    let base = op.tensor.base();
    let scale = grid.h().powi(d as i32 - 1);
    // per quadrature point: local load of the base tensor
    let fref: Vec<Vec<f64>> = (0..nq)
        .map(|q| {
            let mut v = vec![0.0; nb * d];
            for b in 0..nb {
                for al in 0..d {
                    let mut s = 0.0;
                    for i in 0..d {
                        s += base.get(i, j, al, beta) * r.dphi[q][b][i];
                    }
                    v[b * d + al] = -r.weights[q] * scale * s;
                }
            }
            v
        })
        .collect();
    let mut load = vec![0.0; grid.num_nodes() * d];
    let coef = &op.samples.coef;
    for e in 0..grid.num_elements() {
        let cs = &coef[e * nq..(e + 1) * nq];
        if cs.iter().all(|&c| c == 0.0) {
            continue;
        }
        let nodes = grid.element_nodes(e);
        for b in 0..nb {
            for al in 0..d {
                let mut s = 0.0;
                for q in 0..nq {
                    s += cs[q] * fref[q][b * d + al];
                }
                load[nodes[b] * d + al] += s;
            }
        }
    }
    Ok(load)
}

/// Solves `K χ = L` on the periodic space and applies the mean-zero
/// normalization: `∫_Q χ = 0` for `δ > 0`, `∫_Q k₀ χ = 0` for `δ = 0`.
pub fn solve_periodic(
    op: &SparseOperator,
    load: &[f64],
    tol: f64,
) -> Result<(DiscreteVectorField, CgReport)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let grid = *op.grid();
    let d = grid.dim();
    let mut x = vec![0.0; grid.num_nodes() * d];
    let perforated = op.delta == 0.0;
    let cons = Constraints {
        free: if perforated { Some(&op.free) } else { None },
        deflate_constants: true,
    };
    let report = pcg(&op.matrix, load, &mut x, cons, CgSettings::new(tol))?;
    if perforated {
        for (v, &f) in x.iter_mut().zip(&op.free) {
            if !f {
                *v = 0.0;
            }
        }
    }
    let mut field = DiscreteVectorField::new(grid, d, x)?;
    normalize(op, &mut field);
    Ok((field, report))
}

/// Subtracts the (weighted) mean fixed by the cell-problem normalization.
fn normalize(op: &SparseOperator, field: &mut DiscreteVectorField) {
    let grid = *op.grid();
    let d = grid.dim();
    if op.delta > 0.0 {
        // periodic Q1 on a uniform grid: ∫ u = h^d Σ nodal values
        let n = grid.num_nodes() as f64;
        let mut mean = [0.0; 3];
        for node in 0..grid.num_nodes() {
            for (a, m) in mean.iter_mut().enumerate().take(d) {
                *m += field.node(node)[a];
            }
        }
        let vals = field.values_mut();
        for (i, v) in vals.iter_mut().enumerate() {
            *v -= mean[i % d] / n;
        }
    } else {
        let mean = weighted_mean(op, field);
        let free = op.free.clone();
        let vals = field.values_mut();
        for (i, v) in vals.iter_mut().enumerate() {
            if free[i] {
                *v -= mean[i % d];
            }
        }
    }
}

/// `∫_Q k_δ u / ∫_Q k_δ` per component.
pub fn weighted_mean(op: &SparseOperator, field: &DiscreteVectorField) -> [f64; 3] {
    let grid = op.grid();
    let r = &op.mesh.reference;
    let nq = r.num_points();
    let vol = grid.element_volume();
    let mut num = [0.0; 3];
    let mut den = 0.0;
    for e in 0..grid.num_elements() {
        let nodes = grid.element_nodes(e);
        for q in 0..nq {
            let k = op.samples.weight[e * nq + q];
            if k == 0.0 {
                continue;
            }
            let w = vol * r.weights[q] * k;
            let (u, _) = field_at_qp(grid, r, &nodes, q, field.values(), field.ncomp());
            for a in 0..grid.dim() {
                num[a] += w * u[a];
            }
            den += w;
        }
    }
    if den > 0.0 {
        num.iter_mut().for_each(|v| *v /= den);
    }
    num
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::for_each_quadrature_point;
    use crate::sparse::norm;

    fn iso() -> ElasticityTensorField {
        ElasticityTensorField::isotropic(1.0, 1.0, 2).unwrap()
    }

    #[test]
    fn constants_in_kernel() {
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let op = assemble_cell_operator(&g, &iso(), 1.0, 16).unwrap();
        let ones: Vec<f64> = (0..op.matrix().nrows())
            .map(|i| if i % 2 == 0 { 1.0 } else { -2.0 })
            .collect();
        let mut y = vec![0.0; ones.len()];
        op.matrix().apply(&ones, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn operator_symmetric() {
        let g = UnitCellGeometry::disk(2, 0.3).unwrap();
        let a = ElasticityTensorField::modulated(1.0, 1.0, 2, 0.5).unwrap();
        for delta in [0.0, 0.2, 1.0] {
            let op = assemble_cell_operator(&g, &a, delta, 8).unwrap();
            assert!(op.matrix().asymmetry() <= 1e-12 * op.matrix().max_abs());
            let u: Vec<f64> = (0..op.matrix().nrows())
                .map(|i| ((i * 13) % 7) as f64 - 3.0)
                .collect();
            let v: Vec<f64> = (0..op.matrix().nrows())
                .map(|i| ((i * 5) % 11) as f64 * 0.1)
                .collect();
            let uv = op.energy(&u, &v);
            let vu = op.energy(&v, &u);
            assert!((uv - vu).abs() <= 1e-12 * uv.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_small_grid() {
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        assert!(matches!(
            assemble_cell_operator(&g, &iso(), 1.0, 4),
            Err(Error::Assembly(_))
        ));
        assert!(assemble_cell_operator(&g, &iso(), 1.5, 16).is_err());
    }

    /// Dense tensor-product Gauss quadrature of `∫ k A∇u·∇u` for `u = (sin 2πy₁, 0)`.
    fn dense_energy(g: &UnitCellGeometry, delta: f64, m: usize) -> f64 {
        // 4-point Gauss on each of m sub-intervals per axis
        let gp = [
            (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
            (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        ];
        let h = 1.0 / m as f64;
        let t = iso();
        let mut s = 0.0;
        for ix in 0..m {
            for (px, wx) in gp {
                let x = (ix as f64 + 0.5 + 0.5 * px) * h;
                for iy in 0..m {
                    for (py, wy) in gp {
                        let y = (iy as f64 + 0.5 + 0.5 * py) * h;
                        let w = wx * wy * 0.25 * h * h;
                        let k = g.kappa(delta, &[x, y], 1.0);
                        let du =
                            2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x).cos();
                        // ∇u: ξ[0][0] = ∂_1 u^1
                        let xi = [[du, 0.0, 0.0], [0.0; 3], [0.0; 3]];
                        s += w * k * t.base().quadratic_form(&xi);
                    }
                }
            }
        }
        s
    }

    #[test]
    fn energy_matches_dense_quadrature() {
        let g = UnitCellGeometry::homogeneous(2).unwrap();
        let op = assemble_cell_operator(&g, &iso(), 1.0, 16).unwrap();
        let u = op
            .grid()
            .interpolate(2, |x| [(2.0 * std::f64::consts::PI * x[0]).sin(), 0.0, 0.0]);
        let e = op.energy(&u, &u);
        let oracle = dense_energy(&g, 1.0, 64);
        assert!((e - oracle).abs() / oracle < 0.02, "{e} vs {oracle}");
    }

    #[test]
    fn homogeneous_load_vanishes() {
        let g = UnitCellGeometry::homogeneous(2).unwrap();
        let op = assemble_cell_operator(&g, &iso(), 1.0, 16).unwrap();
        for j in 0..2 {
            for b in 0..2 {
                let l = assemble_corrector_rhs(&op, j, b).unwrap();
                assert!(l.iter().all(|v| v.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn perforated_load_supported_on_matrix_elements() {
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let op = assemble_cell_operator(&g, &iso(), 0.0, 32).unwrap();
        let l = assemble_corrector_rhs(&op, 0, 0).unwrap();
        let grid = op.grid();
        let r = Q1Reference::new(2);
        // nodes touching only inclusion quadrature points must carry no load
        let mut touches_matrix = vec![false; grid.num_nodes()];
        for_each_quadrature_point(grid, &r, |e, _, x, _| {
            if g.in_matrix(&x[..2]) {
                for &n in grid.element_nodes(e).iter().take(4) {
                    touches_matrix[n] = true;
                }
            }
        });
        for n in 0..grid.num_nodes() {
            if !touches_matrix[n] {
                assert_eq!(l[2 * n], 0.0);
                assert_eq!(l[2 * n + 1], 0.0);
                assert!(!op.free_dofs()[2 * n]);
            }
        }
        assert!(op.num_excluded() > 0);
    }

    /// Energy of `affine + χ` computed by quadrature, independent of the
    /// assembled matrix.
    fn corrector_energy(op: &SparseOperator, chi: &[f64], j: usize, beta: usize) -> f64 {
        let grid = op.grid();
        let r = Q1Reference::new(2);
        let mut s = 0.0;
        for_each_quadrature_point(grid, &r, |e, q, x, w| {
            let nodes = grid.element_nodes(e);
            let (_, g) = field_at_qp(grid, &r, &nodes, q, chi, 2);
            let mut xi = [[0.0; 3]; 3];
            for k in 0..2 {
                for a in 0..2 {
                    xi[k][a] = g[k][a];
                }
            }
            xi[j][beta] += 1.0;
            let k = op.geometry().kappa(op.delta(), &x[..2], 1.0);
            s += 0.5 * w * k * op.tensor().eval(&x[..2]).quadratic_form(&xi);
        });
        s
    }

    #[test]
    fn load_is_negative_energy_gradient() {
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let a = ElasticityTensorField::modulated(1.0, 1.0, 2, 0.5).unwrap();
        let op = assemble_cell_operator(&g, &a, 1.0, 16).unwrap();
        let (j, beta) = (0, 1);
        let load = assemble_corrector_rhs(&op, j, beta).unwrap();
        let zero = vec![0.0; load.len()];
        let step = 1e-4;
        let mut worst: f64 = 0.0;
        for i in 0..load.len() {
            let mut p = zero.clone();
            p[i] = step;
            let mut m = zero.clone();
            m[i] = -step;
            let fd = (corrector_energy(&op, &p, j, beta) - corrector_energy(&op, &m, j, beta))
                / (2.0 * step);
            worst = worst.max((fd + load[i]).abs());
        }
        assert!(worst < 1e-6, "worst deviation {worst}");
    }

    #[test]
    fn zero_load_gives_zero_field() {
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let op = assemble_cell_operator(&g, &iso(), 0.3, 16).unwrap();
        let (f, rep) = solve_periodic(&op, &vec![0.0; op.matrix().nrows()], 1e-10).unwrap();
        assert_eq!(f.max_abs(), 0.0);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn residual_contract_and_normalization() {
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        for delta in [0.0, 0.1, 1.0] {
            let op = assemble_cell_operator(&g, &iso(), delta, 16).unwrap();
            let load = assemble_corrector_rhs(&op, 0, 0).unwrap();
            let (chi, rep) = solve_periodic(&op, &load, 1e-10).unwrap();
            assert!(rep.relative_residual <= 1e-10);
            // recompute the residual on the free set directly
            let mut kx = vec![0.0; load.len()];
            op.matrix().apply(chi.values(), &mut kx);
            let mut res: Vec<f64> = kx.iter().zip(&load).map(|(a, b)| b - a).collect();
            let mut l = load.clone();
            for i in 0..res.len() {
                if !op.free_dofs()[i] {
                    res[i] = 0.0;
                    l[i] = 0.0;
                }
            }
            assert!(norm(&res) <= 1e-9 * norm(&l), "delta {delta}");
            if delta > 0.0 {
                let m = chi.integral();
                assert!(m[0].abs() <= 1e-12 && m[1].abs() <= 1e-12);
            } else {
                let m = weighted_mean(&op, &chi);
                assert!(m[0].abs() <= 1e-12 && m[1].abs() <= 1e-12);
            }
        }
    }
}
