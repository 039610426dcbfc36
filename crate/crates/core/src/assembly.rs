//! Galerkin assembly of `∫ c(x) a_{ij}^{αβ} ∂_j u^β ∂_i w^α` with Q1 elements,
//! where the coefficient field is a scalar `c(x)` times a constant tensor.

use rayon::prelude::*;

use crate::grid::{Grid, Point, Q1Reference};
use crate::sparse::StencilMatrix;
use crate::tensor::Tensor4;

const BLOCK: usize = 2048;

/// Per-quadrature-point samples, indexed `element · nq + q`.
#[derive(Debug, Clone)]
pub(crate) struct QuadratureSamples {
    /// Phase weight `k_δ`.
    pub weight: Vec<f64>,
    /// Full scalar coefficient `k_δ · m`.
    pub coef: Vec<f64>,
}

pub(crate) fn qp_position(grid: &Grid, reference: &Q1Reference, e: usize, q: usize) -> Point {
    let o = grid.element_origin(e);
    let h = grid.h();
    let mut x = [0.0; 3];
    for k in 0..grid.dim() {
        x[k] = o[k] + reference.points[q][k] * h;
    }
    x
}

pub(crate) fn sample_coefficients(
    grid: &Grid,
    reference: &Q1Reference,
    f: impl Fn(&Point) -> (f64, f64) + Sync,
) -> QuadratureSamples {
    let nq = reference.num_points();
    let total = grid.num_elements() * nq;
    let pairs: Vec<(f64, f64)> = (0..total)
        .into_par_iter()
        .map(|i| f(&qp_position(grid, reference, i / nq, i % nq)))
        .collect();
    let (weight, coef) = pairs.into_iter().unzip();
    QuadratureSamples { weight, coef }
}

/// Element stiffness of the base tensor at each quadrature point, including
/// the quadrature weight and the `h^{d-2}` scaling.
pub(crate) fn reference_stiffness(
    grid: &Grid,
    reference: &Q1Reference,
    base: &Tensor4,
) -> Vec<Vec<f64>> {
    let d = grid.dim();
    let nb = reference.num_basis();
    let nloc = nb * d;
    let scale = grid.h().powi(d as i32 - 2);
    (0..reference.num_points())
        .map(|q| {
            let mut m = vec![0.0; nloc * nloc];
            let w = reference.weights[q] * scale;
            let g = &reference.dphi[q];
            for a in 0..nb {
                for al in 0..d {
                    for b in 0..nb {
                        for be in 0..d {
                            let mut s = 0.0;
                            for i in 0..d {
                                for j in 0..d {
                                    s += base.get(i, j, al, be) * g[a][i] * g[b][j];
                                }
                            }
                            m[(a * d + al) * nloc + b * d + be] = w * s;
                        }
                    }
                }
            }
            m
        })
        .collect()
}

pub(crate) fn assemble(
    grid: &Grid,
    reference: &Q1Reference,
    base: &Tensor4,
    coef: &[f64],
) -> StencilMatrix {
    let d = grid.dim();
    let nq = reference.num_points();
    let nloc = reference.num_basis() * d;
    let nloc2 = nloc * nloc;
    let kref = reference_stiffness(grid, reference, base);
    let mut k = StencilMatrix::zeros(*grid, d);
    let ne = grid.num_elements();
    let mut buf = vec![0.0; BLOCK * nloc2];
    for start in (0..ne).step_by(BLOCK) {
        let end = (start + BLOCK).min(ne);
        buf[..(end - start) * nloc2]
            .par_chunks_mut(nloc2)
            .enumerate()
            .for_each(|(i, m)| {
                let e = start + i;
                m.iter_mut().for_each(|v| *v = 0.0);
                for (q, kq) in kref.iter().enumerate() {
                    let c = coef[e * nq + q];
                    if c != 0.0 {
                        m.iter_mut().zip(kq).for_each(|(v, r)| *v += c * r);
                    }
                }
            });
        for e in start..end {
            let m = &buf[(e - start) * nloc2..(e - start + 1) * nloc2];
            if m.iter().any(|v| *v != 0.0) {
                k.add_element(&grid.element_nodes(e), m);
            }
        }
    }
    k
}

/// Nodes whose support contains at least one quadrature point with a
/// non-zero coefficient.
pub(crate) fn active_nodes(grid: &Grid, reference: &Q1Reference, coef: &[f64]) -> Vec<bool> {
    let nq = reference.num_points();
    let mut active = vec![false; grid.num_nodes()];
    for e in 0..grid.num_elements() {
        if coef[e * nq..(e + 1) * nq].iter().any(|&c| c != 0.0) {
            for &n in grid.element_nodes(e).iter().take(reference.num_basis()) {
                active[n] = true;
            }
        }
    }
    active
}
