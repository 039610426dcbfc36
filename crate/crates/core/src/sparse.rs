//! Fixed-stencil sparse matrices on structured grids and a Jacobi-preconditioned
//! conjugate gradient solver.
//!
//! Every row holds exactly `3^d · ncomp` slots, one per neighbor offset and
//! component. Slots without a neighbor (box boundary) point at the diagonal
//! column and carry a zero value, so matrix-vector products stay branch free.
//! All reductions run over fixed-size chunks in a fixed order, which makes
//! results independent of the thread schedule.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;

const CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct StencilMatrix {
    grid: Grid,
    ncomp: usize,
    width: usize,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// Offset code of a neighbor displacement `o ∈ {-1,0,1}^d`.
#[inline]
pub fn offset_code(offsets: &[i32]) -> usize {
    offsets
        .iter()
        .rev()
        .fold(0usize, |acc, &o| acc * 3 + (o + 1) as usize)
}

impl StencilMatrix {
    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        let d = grid.dim();
        let stencil = 3usize.pow(d as u32);
        let width = stencil * ncomp;
        let n = grid.num_nodes();
        let side = grid.nodes_per_side() as i64;
        let mut cols = vec![0u32; n * ncomp * width];
        for node in 0..n {
            let m = grid.node_multi(node);
            for code in 0..stencil {
                let mut rem = code;
                let mut nm = [0usize; 3];
                let mut valid = true;
                for k in 0..d {
                    let o = (rem % 3) as i64 - 1;
                    rem /= 3;
                    let mut c = m[k] as i64 + o;
                    if grid.is_periodic() {
                        c = c.rem_euclid(side);
                    } else if c < 0 || c >= side {
                        valid = false;
                    }
                    nm[k] = c.max(0) as usize;
                }
                let neighbor = if valid { grid.node_index(&nm) } else { node };
                for a in 0..ncomp {
                    let row = node * ncomp + a;
                    for b in 0..ncomp {
                        let col = if valid { neighbor * ncomp + b } else { row };
                        cols[row * width + code * ncomp + b] = col as u32;
                    }
                }
            }
        }
        Self {
            grid,
            ncomp,
            width,
            vals: vec![0.0; cols.len()],
            cols,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn nrows(&self) -> usize {
        self.grid.num_nodes() * self.ncomp
    }

    /// Adds an element matrix. `local[(a·ncomp + α)·nloc + b·ncomp + β]` couples
    /// local node `a`, component `α` (row) with local node `b`, component `β`.
    pub fn add_element(&mut self, nodes: &[usize; 8], local: &[f64]) {
        let d = self.grid.dim();
        let nb = 1usize << d;
        let nc = self.ncomp;
        let nloc = nb * nc;
        for a in 0..nb {
            for b in 0..nb {
                let mut offs = [0i32; 3];
                for (k, o) in offs.iter_mut().enumerate().take(d) {
                    *o = ((b >> k) & 1) as i32 - ((a >> k) & 1) as i32;
                }
                let code = offset_code(&offs[..d]);
                for al in 0..nc {
                    let row = nodes[a] * nc + al;
                    let base = row * self.width + code * nc;
                    let lrow = (a * nc + al) * nloc + b * nc;
                    for be in 0..nc {
                        self.vals[base + be] += local[lrow + be];
                    }
                }
            }
        }
    }

    /// `y = K x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let w = self.width;
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let start = c * CHUNK;
            for (r, yr) in out.iter_mut().enumerate() {
                let row = start + r;
                let cols = &self.cols[row * w..row * w + w];
                let vals = &self.vals[row * w..row * w + w];
                let mut s = 0.0;
                for (&col, &v) in cols.iter().zip(vals) {
                    s += v * x[col as usize];
                }
                *yr = s;
            }
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let d = self.grid.dim();
        let center = offset_code(&[0i32; 3][..d]);
        (0..self.nrows())
            .map(|row| {
                let a = row % self.ncomp;
                self.vals[row * self.width + center * self.ncomp + a]
            })
            .collect()
    }

    /// Entries of one row as `(column, value)` pairs, duplicates merged.
    pub fn row(&self, row: usize) -> Vec<(usize, f64)> {
        let w = self.width;
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(w);
        for s in 0..w {
            let c = self.cols[row * w + s] as usize;
            let v = self.vals[row * w + s];
            match out.iter_mut().find(|(cc, _)| *cc == c) {
                Some(e) => e.1 += v,
                None => out.push((c, v)),
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `max |K_{rc} − K_{cr}|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows() {
            for (c, v) in self.row(r) {
                let t = self
                    .row(c)
                    .into_iter()
                    .find(|(cc, _)| *cc == r)
                    .map_or(0.0, |e| e.1);
                worst = worst.max((v - t).abs());
            }
        }
        worst
    }

    /// `xᵀ K y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut ky = vec![0.0; y.len()];
        self.apply(y, &mut ky);
        dot(x, &ky)
    }
}

/// Deterministic dot product: fixed chunks summed in order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl CgSettings {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_iter: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Constraint description for [`pcg`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Constraints<'a> {
    /// `true` marks a degree of freedom that is solved for; others keep the
    /// value they have in `x` on entry.
    pub free: Option<&'a [bool]>,
    /// Deflate per-component constant vectors (periodic operators).
    pub deflate_constants: bool,
}

impl Constraints<'_> {
    #[inline]
    fn is_free(&self, i: usize) -> bool {
        self.free.is_none_or(|f| f[i])
    }
}

/// Subtracts, per component, the mean over free degrees of freedom.
fn project_constants(v: &mut [f64], ncomp: usize, cons: &Constraints<'_>) {
    for c in 0..ncomp {
        let (mut sum, mut count) = (0.0, 0usize);
        for i in (c..v.len()).step_by(ncomp) {
            if cons.is_free(i) {
                sum += v[i];
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        let mean = sum / count as f64;
        for i in (c..v.len()).step_by(ncomp) {
            if cons.is_free(i) {
                v[i] -= mean;
            }
        }
    }
}

/// Preconditioned conjugate gradient for `K x = b` on the free degrees of freedom.
///
/// Convergence is declared when `‖b − K x‖ ≤ tol · ‖L‖` on the free set, where
/// `L = b − K x_fixed` is the load seen by the free unknowns.
/// Loads whose entries all lie below this multiple of `max |K|` are roundoff.
const ROUNDOFF_LOAD: f64 = 1e-13;

pub fn pcg(
    k: &StencilMatrix,
    b: &[f64],
    x: &mut [f64],
    cons: Constraints<'_>,
    settings: CgSettings,
) -> Result<CgReport> {
    let n = k.nrows();
    if b.len() != n || x.len() != n {
        return Err(Error::InvalidArgument(format!(
            "system size {n} does not match vectors ({}, {})",
            b.len(),
            x.len()
        )));
    }
    let ncomp = k.ncomp();
    let mask = |v: &mut [f64]| {
        if let Some(f) = cons.free {
            v.iter_mut().zip(f).for_each(|(e, &fr)| {
                if !fr {
                    *e = 0.0
                }
            });
        }
    };

    // load seen by the free unknowns
    let mut x_fixed = x.to_vec();
    for (i, e) in x_fixed.iter_mut().enumerate() {
        if cons.is_free(i) {
            *e = 0.0;
        }
    }
    let mut load = vec![0.0; n];
    k.apply(&x_fixed, &mut load);
    load.iter_mut().zip(b).for_each(|(l, &bb)| *l = bb - *l);
    mask(&mut load);
    let floor = ROUNDOFF_LOAD * k.max_abs();
    if load.iter().all(|v| v.abs() <= floor) {
        load.iter_mut().for_each(|v| *v = 0.0);
    }
    if cons.deflate_constants {
        let total: f64 = load.iter().map(|v| v.abs()).sum();
        for c in 0..ncomp {
            let s: f64 = (c..n).step_by(ncomp).map(|i| load[i]).sum();
            if total > 0.0 && s.abs() > 1e-8 * total {
                return Err(Error::IncompatibleLoad(s / total));
            }
        }
        project_constants(&mut load, ncomp, &cons);
    }
    let ref_norm = norm(&load);
    if ref_norm == 0.0 {
        for (i, e) in x.iter_mut().enumerate() {
            if cons.is_free(i) {
                *e = 0.0;
            }
        }
        return Ok(CgReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let inv_diag: Vec<f64> = k
        .diagonal()
        .into_iter()
        .map(|v| if v > 0.0 { 1.0 / v } else { 1.0 })
        .collect();

    let mut r = vec![0.0; n];
    k.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, &bb)| *ri = bb - *ri);
    mask(&mut r);
    if cons.deflate_constants {
        project_constants(&mut r, ncomp, &cons);
        project_constants(x, ncomp, &cons);
    }

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    if cons.deflate_constants {
        project_constants(&mut z, ncomp, &cons);
    }
    let mut p = z.clone();
    let mut kp = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / ref_norm;
    let mut it = 0;
    while res > settings.tol {
        if it >= settings.max_iter {
            return Err(Error::NotConverged {
                iterations: it,
                residual: res,
            });
        }
        k.apply(&p, &mut kp);
        mask(&mut kp);
        let pkp = dot(&p, &kp);
        if !(pkp > 0.0) {
            return Err(Error::NotConverged {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pkp;
        x.par_iter_mut()
            .zip(p.par_iter())
            .for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut()
            .zip(kp.par_iter())
            .for_each(|(ri, kpi)| *ri -= alpha * kpi);
        if cons.deflate_constants {
            project_constants(&mut r, ncomp, &cons);
            project_constants(x, ncomp, &cons);
        }
        z.par_iter_mut()
            .zip(r.par_iter().zip(inv_diag.par_iter()))
            .for_each(|(zi, (ri, di))| *zi = ri * di);
        if cons.deflate_constants {
            project_constants(&mut z, ncomp, &cons);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut()
            .zip(z.par_iter())
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
        it += 1;
        res = norm(&r) / ref_norm;
    }

    // confirm with the true residual
    let mut tr = vec![0.0; n];
    k.apply(x, &mut tr);
    tr.iter_mut().zip(b).for_each(|(ri, &bb)| *ri = bb - *ri);
    mask(&mut tr);
    if cons.deflate_constants {
        project_constants(&mut tr, ncomp, &cons);
    }
    let true_res = norm(&tr) / ref_norm;
    Ok(CgReport {
        iterations: it,
        relative_residual: true_res,
    })
}
