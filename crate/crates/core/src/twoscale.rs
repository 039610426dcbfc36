//! Smoothing operator `K_ε`, boundary cutoff `η_ε`, periodic lifting of the
//! correctors and the two-scale expansion residual.

use rayon::prelude::*;

use crate::domain::{recovered_gradient, weighted_norms, Region};
use crate::error::{Error, Result};
use crate::field::DiscreteVectorField;
use crate::fit::{fit_power_law, PowerFit};
use crate::geometry::UnitCellGeometry;
use crate::grid::{Grid, Point};
use crate::homogenize::CorrectorSet;

/// `φ(x) = c_d exp(−1/(1−|x|²))` on the unit ball, `∫ φ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    dim: usize,
    eps: f64,
    norm: f64,
}

fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// `∫_{B₁} exp(−1/(1−|x|²)) dx` through the radial integral, composite Simpson.
fn bump_mass(dim: usize) -> f64 {
    use std::f64::consts::PI;
    let sphere = match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    };
    let n = 20_000;
    let h = 1.0 / n as f64;
    let f = |r: f64| bump(r * r) * r.powi(dim as i32 - 1);
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    sphere * s * h / 3.0
}

impl MollifierSpec {
    pub fn new(dim: usize, eps: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mollifier scale must be positive, got {eps}"
            )));
        }
        Ok(Self {
            dim,
            eps,
            norm: 1.0 / bump_mass(dim),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Unit-scale profile `φ`.
    pub fn profile(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().take(self.dim).map(|v| v * v).sum();
        self.norm * bump(r2)
    }

    /// `φ_ε(x) = ε^{-d} φ(x/ε)`
    pub fn eval(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().take(self.dim).map(|v| v / self.eps).collect();
        self.profile(&y) / self.eps.powi(self.dim as i32)
    }

    /// Discrete stencil on spacing `h`: offsets and weights summing to one.
    pub fn stencil(&self, h: f64) -> Result<Vec<([i64; 3], f64)>> {
        if self.eps < 2.0 * h {
            return Err(Error::UnderResolved { eps: self.eps, h });
        }
        let d = self.dim;
        let reach = (self.eps / h).ceil() as i64;
        let side = 2 * reach + 1;
        let total = side.pow(d as u32);
        let mut out = Vec::new();
        for idx in 0..total {
            let mut off = [0i64; 3];
            let mut rest = idx;
            for o in off.iter_mut().take(d) {
                *o = rest % side - reach;
                rest /= side;
            }
            let x: Vec<f64> = off[..d].iter().map(|&o| o as f64 * h).collect();
            let w = self.eval(&x);
            if w > 0.0 {
                out.push((off, w));
            }
        }
        let s: f64 = out.iter().map(|p| p.1).sum();
        out.iter_mut().for_each(|p| p.1 /= s);
        Ok(out)
    }
}

/// `K_ε` applied `passes` times to every component. Periodic grids wrap;
/// on a box the stencil is truncated and renormalized so its mass stays one.
pub fn mollify(
    field: &DiscreteVectorField,
    eps: f64,
    passes: usize,
) -> Result<DiscreteVectorField> {
    if !(1..=2).contains(&passes) {
        return Err(Error::InvalidArgument(format!(
            "passes must be 1 or 2, got {passes}"
        )));
    }
    let grid = *field.grid();
    let stencil = MollifierSpec::new(grid.dim(), eps)?.stencil(grid.h())?;
    let mut cur = field.values().to_vec();
    for _ in 0..passes {
        cur = convolve(&grid, field.ncomp(), &stencil, &cur);
    }
    DiscreteVectorField::new(grid, field.ncomp(), cur)
}

fn convolve(grid: &Grid, nc: usize, stencil: &[([i64; 3], f64)], values: &[f64]) -> Vec<f64> {
    let d = grid.dim();
    let periodic = grid.is_periodic();
    let side = grid.nodes_per_side() as i64;
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(nc).enumerate().for_each(|(node, o)| {
        let m = grid.node_multi(node);
        let mut mass = 0.0;
        for (off, w) in stencil {
            let mut nb = [0usize; 3];
            let mut inside = true;
            for k in 0..d {
                let mut c = m[k] as i64 + off[k];
                if periodic {
                    c = c.rem_euclid(side);
                } else if c < 0 || c >= side {
                    inside = false;
                    break;
                }
                nb[k] = c as usize;
            }
            if !inside {
                continue;
            }
            let j = grid.node_index(&nb);
            mass += w;
            for a in 0..nc {
                o[a] += w * values[j * nc + a];
            }
        }
        if !periodic && mass > 0.0 {
            o.iter_mut().for_each(|v| *v /= mass);
        }
    });
    out
}

/// `3t² − 2t³` clamped to `[0, 1]`.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// `η_ε(dist) = smoothstep((dist − 3ε)/ε)`: zero up to `3ε`, one from `4ε` on.
pub fn cutoff_profile(dist: f64, eps: f64) -> f64 {
    if dist <= 3.0 * eps {
        0.0
    } else {
        smoothstep((dist - 3.0 * eps) / eps)
    }
}

/// Distance from `x` to the boundary of the grid's box.
pub fn boundary_distance(grid: &Grid, x: &[f64]) -> f64 {
    let (o, l) = (grid.origin(), grid.length());
    x.iter()
        .take(grid.dim())
        .map(|&v| (v - o).min(o + l - v))
        .fold(f64::INFINITY, f64::min)
}

/// Nodal values of `η_ε` on a box grid.
pub fn cutoff(grid: &Grid, eps: f64) -> Result<DiscreteVectorField> {
    if grid.is_periodic() {
        return Err(Error::InvalidArgument(
            "cutoff needs a bounded box grid".into(),
        ));
    }
    if !(eps > 0.0) || 4.0 * eps > 0.5 * grid.length() * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "domain of width {} too small for cutoff at eps = {eps}",
            grid.length()
        )));
    }
    Ok(DiscreteVectorField::interpolate(*grid, 1, |x| {
        [cutoff_profile(boundary_distance(grid, x), eps), 0.0, 0.0]
    }))
}

/// `χ(x/ε)` on `grid` for every corrector; component `(j·d + β)·d + α`
/// holds `χ_j^{βα}`.
pub fn periodic_lift(set: &CorrectorSet, eps: f64, grid: &Grid) -> Result<DiscreteVectorField> {
    let d = set.dim();
    if grid.dim() != d {
        return Err(Error::GridMismatch(format!(
            "corrector dimension {d} vs grid dimension {}",
            grid.dim()
        )));
    }
    let nc = d * d * d;
    let mut values = vec![0.0; grid.num_nodes() * nc];
    values
        .par_chunks_mut(nc)
        .enumerate()
        .for_each(|(node, out)| {
            let y = scaled(&grid.node_coord(node), eps);
            for j in 0..d {
                for b in 0..d {
                    let v = set.corrector(j, b).eval(&y[..d]);
                    for a in 0..d {
                        out[(j * d + b) * d + a] = v[a];
                    }
                }
            }
        });
    DiscreteVectorField::new(*grid, nc, values)
}

fn scaled(x: &Point, eps: f64) -> Point {
    [x[0] / eps, x[1] / eps, x[2] / eps]
}

/// `r = u_ε − u₀ − ε χ^ε K_ε²((∇u₀) η_ε)` with its weighted norms.
#[derive(Debug, Clone)]
pub struct ExpansionResidual {
    pub residual: DiscreteVectorField,
    /// `‖k r‖_{L²(Ω)}`
    pub l2: f64,
    /// `‖k ∇r‖_{L²(Ω)}`
    pub h1: f64,
    pub eps: f64,
    pub delta: f64,
    pub domain_cells: usize,
    pub cell_cells: usize,
}

/// The smoothed, cut-off gradient `K_ε²((∇u₀) η_ε)`; component `j·d + β`
/// holds the smoothed `∂_j u₀^β`.
pub fn smoothed_gradient(u0: &DiscreteVectorField, eps: f64) -> Result<DiscreteVectorField> {
    let grid = *u0.grid();
    let mut g = recovered_gradient(u0);
    let eta = cutoff(&grid, eps)?;
    let nc = g.ncomp();
    for (node, chunk) in g.values_mut().chunks_mut(nc).enumerate() {
        let e = eta.values()[node];
        chunk.iter_mut().for_each(|v| *v *= e);
    }
    mollify(&g, eps, 2)
}

pub fn expansion_residual(
    u_eps: &DiscreteVectorField,
    u0: &DiscreteVectorField,
    set: &CorrectorSet,
    eps: f64,
    delta: f64,
    geom: &UnitCellGeometry,
) -> Result<ExpansionResidual> {
    let grid = *u_eps.grid();
    let d = grid.dim();
    if u0.grid() != &grid || u_eps.ncomp() != d || u0.ncomp() != d {
        return Err(Error::GridMismatch(
            "u_eps and u0 must share a grid with d components".into(),
        ));
    }
    if set.dim() != d {
        return Err(Error::GridMismatch(
            "corrector dimension differs from the domain".into(),
        ));
    }
    let g = smoothed_gradient(u0, eps)?;
    let chi = periodic_lift(set, eps, &grid)?;
    let mut r = vec![0.0; grid.num_nodes() * d];
    for node in 0..grid.num_nodes() {
        let gv = g.node(node);
        let cv = chi.node(node);
        for a in 0..d {
            let mut s = 0.0;
            for jb in 0..d * d {
                s += cv[jb * d + a] * gv[jb];
            }
            let i = node * d + a;
            r[i] = u_eps.values()[i] - u0.values()[i] - eps * s;
        }
    }
    let residual = DiscreteVectorField::new(grid, d, r)?;
    let (l2, h1) = weighted_norms(&residual, geom, delta, eps, Region::Full);
    Ok(ExpansionResidual {
        residual,
        l2,
        h1,
        eps,
        delta,
        domain_cells: grid.cells(),
        cell_cells: set.cells(),
    })
}

/// Least-squares slope of `log value` against `log ε`; needs three points.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<PowerFit> {
    if points.len() < 3 {
        return Err(Error::InvalidFit(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    fit_power_law(points)
}

/// Values of a smoothing-lemma sweep over `ε`.
#[derive(Debug, Clone)]
pub struct SmoothingSweep {
    /// `(ε, measured quantity)`
    pub rows: Vec<(f64, f64)>,
    pub fit: Option<PowerFit>,
    /// `max / min` of the measured quantity.
    pub spread: f64,
}

impl SmoothingSweep {
    fn from_rows(rows: Vec<(f64, f64)>) -> Self {
        let max = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        Self {
            fit: fit_rate(&rows).ok(),
            spread: max / min,
            rows,
        }
    }
}

/// Smooth test function `exp(−|x − c|²/σ²)` centered in the unit box, `σ = 0.15`.
pub fn gaussian_bump(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
    (-r2 / 0.0225).exp()
}

fn unit_box_grid(dim: usize, eps: f64, elements_per_period: usize) -> Result<Grid> {
    let cells = (elements_per_period as f64 / eps).round() as usize;
    Grid::cube(dim, cells, 0.0, 1.0)
}

/// `‖g − K_ε g‖_{L²} / ‖∇g‖_{L²}` for [`gaussian_bump`], one grid per `ε`
/// with `elements_per_period` cells per period.
pub fn mollifier_error_sweep(
    dim: usize,
    eps_list: &[f64],
    elements_per_period: usize,
) -> Result<SmoothingSweep> {
    let homogeneous = UnitCellGeometry::homogeneous(dim)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let grid = unit_box_grid(dim, eps, elements_per_period)?;
        let g = DiscreteVectorField::interpolate(grid, 1, |x| [gaussian_bump(&x[..dim]), 0.0, 0.0]);
        let kg = mollify(&g, eps, 1)?;
        let diff = g.linear_combination(1.0, &kg, -1.0)?;
        let (_, grad) = weighted_norms(&g, &homogeneous, 1.0, 1.0, Region::Full);
        rows.push((eps, diff.l2_norm() / grad));
    }
    Ok(SmoothingSweep::from_rows(rows))
}

/// `‖χ^ε K_ε g‖_{L²(Ω)} / (‖χ‖_{L²(Q)} ‖g‖_{L²(Ω)})` for the corrector
/// `χ_j^β` and [`gaussian_bump`].
pub fn lift_bound_sweep(
    set: &CorrectorSet,
    j: usize,
    beta: usize,
    eps_list: &[f64],
    elements_per_period: usize,
) -> Result<SmoothingSweep> {
    let d = set.dim();
    if j >= d || beta >= d {
        return Err(Error::InvalidArgument(format!(
            "corrector index ({j}, {beta}) out of range"
        )));
    }
    let chi = set.corrector(j, beta);
    let chi_norm = chi.l2_norm();
    if chi_norm == 0.0 {
        return Err(Error::InvalidArgument(
            "corrector vanishes identically".into(),
        ));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let grid = unit_box_grid(d, eps, elements_per_period)?;
        let g = DiscreteVectorField::interpolate(grid, 1, |x| [gaussian_bump(&x[..d]), 0.0, 0.0]);
        let kg = mollify(&g, eps, 1)?;
        let mut values = vec![0.0; grid.num_nodes() * d];
        for node in 0..grid.num_nodes() {
            let y = scaled(&grid.node_coord(node), eps);
            let c = chi.eval(&y[..d]);
            for a in 0..d {
                values[node * d + a] = c[a] * kg.values()[node];
            }
        }
        let prod = DiscreteVectorField::new(grid, d, values)?;
        rows.push((eps, prod.l2_norm() / (chi_norm * g.l2_norm())));
    }
    Ok(SmoothingSweep::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogenize::compute_correctors;
    use crate::tensor::ElasticityTensorField;
    use proptest::prelude::*;

    #[test]
    fn profile_has_unit_mass() {
        // midpoint rule on a fine lattice as an independent check of the radial normalization
        for dim in [2usize, 3] {
            let m = MollifierSpec::new(dim, 1.0).unwrap();
            let n: i64 = if dim == 2 { 1200 } else { 160 };
            let h = 2.0 / n as f64;
            let mut s = 0.0;
            let total = n.pow(dim as u32);
            for idx in 0..total {
                let mut x = [0.0; 3];
                let mut rest = idx;
                for v in x.iter_mut().take(dim) {
                    *v = -1.0 + ((rest % n) as f64 + 0.5) * h;
                    rest /= n;
                }
                s += m.profile(&x[..dim]);
            }
            s *= h.powi(dim as i32);
            let tol = if dim == 2 { 1e-8 } else { 1e-6 };
            assert!((s - 1.0).abs() < tol, "dim {dim}: {s}");
        }
        let m = MollifierSpec::new(2, 0.1).unwrap();
        assert_eq!(m.eval(&[0.1, 0.0]), 0.0);
        assert!(m.eval(&[0.0, 0.0]) > 0.0);
    }

    #[test]
    fn stencil_rows_sum_to_one_and_reject_coarse_grids() {
        let m = MollifierSpec::new(2, 0.125).unwrap();
        let s = m.stencil(1.0 / 64.0).unwrap();
        let sum: f64 = s.iter().map(|p| p.1).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(s.iter().all(|p| p.1 > 0.0));
        assert!(matches!(m.stencil(0.1), Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn constants_and_linear_fields_preserved() {
        let grid = Grid::cube(2, 64, 0.0, 1.0).unwrap();
        let eps = 0.125;
        let c = DiscreteVectorField::interpolate(grid, 2, |_| [2.5, -1.0, 0.0]);
        let kc = mollify(&c, eps, 2).unwrap();
        assert!(kc
            .values()
            .iter()
            .zip(c.values())
            .all(|(a, b)| (a - b).abs() < 1e-12));
        let lin = DiscreteVectorField::interpolate(grid, 1, |x| [x[0], 0.0, 0.0]);
        let kl = mollify(&lin, eps, 1).unwrap();
        for n in 0..grid.num_nodes() {
            let x = grid.node_coord(n);
            if boundary_distance(&grid, &x) > eps {
                assert!((kl.values()[n] - x[0]).abs() < 1e-6);
            }
        }
        assert!(mollify(&lin, eps, 3).is_err());
        assert!(mollify(&lin, 0.02, 1).is_err());
    }

    #[test]
    fn cutoff_bands() {
        let eps = 0.05;
        assert_eq!(cutoff_profile(5.0 * eps, eps), 1.0);
        assert_eq!(cutoff_profile(4.0 * eps, eps), 1.0);
        assert_eq!(cutoff_profile(2.0 * eps, eps), 0.0);
        assert_eq!(cutoff_profile(3.0 * eps, eps), 0.0);
        assert!((cutoff_profile(3.5 * eps, eps) - 0.5).abs() < 1e-12);
        // slope bound: max of 6t(1−t) is 1.5 per ε
        let mut max_slope: f64 = 0.0;
        for i in 0..1000 {
            let a = 3.0 * eps + i as f64 * eps / 1000.0;
            let b = a + eps / 1000.0;
            max_slope = max_slope.max((cutoff_profile(b, eps) - cutoff_profile(a, eps)) / (b - a));
        }
        assert!(max_slope * eps <= 7.0 && max_slope * eps > 1.4);
        let grid = Grid::cube(2, 64, 0.0, 1.0).unwrap();
        let eta = cutoff(&grid, 1.0 / 16.0).unwrap();
        for n in 0..grid.num_nodes() {
            if boundary_distance(&grid, &grid.node_coord(n)) <= 3.0 / 16.0 {
                assert_eq!(eta.values()[n], 0.0);
            }
        }
        assert!(cutoff(&grid, 0.13).is_err());
        assert!(cutoff(&grid, 0.125).is_ok());
    }

    #[test]
    fn periodic_lift_wraps_exactly() {
        let g = UnitCellGeometry::disk(2, 0.25).unwrap();
        let a = ElasticityTensorField::isotropic(1.0, 1.0, 2).unwrap();
        let set = compute_correctors(&g, &a, 0.1, 16, 1e-10).unwrap();
        let eps = 0.125;
        let grid = Grid::cube(2, 128, 0.0, 1.0).unwrap();
        let lift = periodic_lift(&set, eps, &grid).unwrap();
        // nodes one period apart along x₁ are 16 cells apart
        for n in 0..grid.num_nodes() {
            let m = grid.node_multi(n);
            if m[0] + 16 < grid.nodes_per_side() {
                let other = grid.node_index(&[m[0] + 16, m[1], 0]);
                assert_eq!(lift.node(n), lift.node(other));
            }
        }
        let zero = compute_correctors(
            &UnitCellGeometry::homogeneous(2).unwrap(),
            &a,
            1.0,
            16,
            1e-10,
        )
        .unwrap();
        assert_eq!(periodic_lift(&zero, eps, &grid).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn rate_fit_examples() {
        let pts: Vec<(f64, f64)> = [1.0f64 / 8.0, 1.0 / 16.0, 1.0 / 32.0]
            .iter()
            .map(|&e| (e, e.sqrt()))
            .collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_rate(&[(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625)]).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!(fit_rate(&[(1.0, 1.0), (0.5, 0.25)]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (0.5, -0.25), (0.25, 1.0)]).is_err());
    }

    #[test]
    fn mollifier_error_decays_with_eps() {
        let s = mollifier_error_sweep(2, &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], 8).unwrap();
        assert!(s.fit.unwrap().exponent >= 0.9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn smoothing_is_contractive_on_periodic_grid(seed in any::<u64>(), eps in 0.13f64..0.3) {
            let grid = Grid::periodic(2, 16).unwrap();
            let mut state = seed | 1;
            let vals: Vec<f64> = (0..grid.num_nodes()).map(|_| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }).collect();
            let g = DiscreteVectorField::new(grid, 1, vals).unwrap();
            let kg = mollify(&g, eps, 1).unwrap();
            prop_assert!(kg.l2_norm() <= (1.0 + 1e-10) * g.l2_norm());
            let nodal = |f: &DiscreteVectorField| f.values().iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(nodal(&kg) <= (1.0 + 1e-10) * nodal(&g));
        }
    }
}
