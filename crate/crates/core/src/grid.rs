//! Uniform tensor-product grids with multilinear (Q1) elements.
//!
//! Node numbering is lexicographic with the first axis fastest:
//! `node = i₀ + s·(i₁ + s·i₂)` where `s` is the number of nodes per side.
//! On a periodic grid node `s` along any axis is identified with node `0`.

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Gauss–Legendre abscissae of the 2-point rule on `[0, 1]`.
const GAUSS_LO: f64 = 0.5 - 0.288_675_134_594_812_9;
const GAUSS_HI: f64 = 0.5 + 0.288_675_134_594_812_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    cells: usize,
    origin: f64,
    length: f64,
    periodic: bool,
}

impl Grid {
    /// Periodic grid on the unit cell `[0,1)^d`.
    pub fn periodic(dim: usize, cells: usize) -> Result<Self> {
        Self::new(dim, cells, 0.0, 1.0, true)
    }

    /// Box `[origin, origin + length]^d` with nodes on the boundary.
    pub fn cube(dim: usize, cells: usize, origin: f64, length: f64) -> Result<Self> {
        Self::new(dim, cells, origin, length, false)
    }

    fn new(dim: usize, cells: usize, origin: f64, length: f64, periodic: bool) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("grid dimension {dim}")));
        }
        if cells < 2 || !(length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 cells and positive length (cells = {cells}, length = {length})"
            )));
        }
        Ok(Self {
            dim,
            cells,
            origin,
            length,
            periodic,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per side.
    #[inline]
    pub fn cells(&self) -> usize {
        self.cells
    }

    #[inline]
    pub fn origin(&self) -> f64 {
        self.origin
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    #[inline]
    pub fn nodes_per_side(&self) -> usize {
        if self.periodic {
            self.cells
        } else {
            self.cells + 1
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_side().pow(self.dim as u32)
    }

    pub fn num_elements(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn element_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    #[inline]
    pub fn node_multi(&self, node: usize) -> [usize; 3] {
        let s = self.nodes_per_side();
        let mut m = [0usize; 3];
        let mut rem = node;
        for c in m.iter_mut().take(self.dim) {
            *c = rem % s;
            rem /= s;
        }
        m
    }

    #[inline]
    pub fn node_index(&self, multi: &[usize; 3]) -> usize {
        let s = self.nodes_per_side();
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            idx = idx * s + multi[k];
        }
        idx
    }

    pub fn node_coord(&self, node: usize) -> Point {
        let m = self.node_multi(node);
        let h = self.h();
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = self.origin + m[k] as f64 * h;
        }
        x
    }

    #[inline]
    pub fn element_multi(&self, elem: usize) -> [usize; 3] {
        let mut m = [0usize; 3];
        let mut rem = elem;
        for c in m.iter_mut().take(self.dim) {
            *c = rem % self.cells;
            rem /= self.cells;
        }
        m
    }

    /// Lower corner of an element.
    pub fn element_origin(&self, elem: usize) -> Point {
        let m = self.element_multi(elem);
        let h = self.h();
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = self.origin + m[k] as f64 * h;
        }
        x
    }

    /// Global nodes of an element; local node `b` has offset bit `k` along axis `k`.
    pub fn element_nodes(&self, elem: usize) -> [usize; 8] {
        let m = self.element_multi(elem);
        let s = self.nodes_per_side();
        let mut out = [0usize; 8];
        for (b, slot) in out.iter_mut().enumerate().take(1 << self.dim) {
            let mut mm = [0usize; 3];
            for k in 0..self.dim {
                let mut c = m[k] + ((b >> k) & 1);
                if c == s {
                    c = 0;
                }
                mm[k] = c;
            }
            *slot = self.node_index(&mm);
        }
        out
    }

    /// Whether a node lies on the boundary of a non-periodic box.
    pub fn is_boundary_node(&self, node: usize) -> bool {
        if self.periodic {
            return false;
        }
        let m = self.node_multi(node);
        (0..self.dim).any(|k| m[k] == 0 || m[k] == self.cells)
    }

    /// Elements sharing a node (at most `2^d`, fewer on a box boundary).
    pub fn node_elements(&self, node: usize) -> Vec<usize> {
        let m = self.node_multi(node);
        let mut out = Vec::with_capacity(1 << self.dim);
        'outer: for b in 0..(1usize << self.dim) {
            let mut em = [0usize; 3];
            for k in 0..self.dim {
                let shift = (b >> k) & 1;
                if shift == 1 {
                    if m[k] == 0 {
                        if self.periodic {
                            em[k] = self.cells - 1;
                        } else {
                            continue 'outer;
                        }
                    } else {
                        em[k] = m[k] - 1;
                    }
                } else {
                    if m[k] == self.cells {
                        continue 'outer;
                    }
                    em[k] = m[k];
                }
            }
            let mut idx = 0;
            for k in (0..self.dim).rev() {
                idx = idx * self.cells + em[k];
            }
            out.push(idx);
        }
        out
    }

    /// Interpolates a global scalar function at the nodes.
    pub fn interpolate(&self, ncomp: usize, f: impl Fn(&Point) -> [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes() * ncomp];
        for node in 0..self.num_nodes() {
            let v = f(&self.node_coord(node));
            out[node * ncomp..node * ncomp + ncomp].copy_from_slice(&v[..ncomp]);
        }
        out
    }
}

/// Reference Q1 element on `[0,1]^d` with the 2-point Gauss rule per axis.
///
/// Quadrature weights sum to 1; physical weights are `h^d · weight`.
#[derive(Debug, Clone)]
pub struct Q1Reference {
    dim: usize,
    /// Local quadrature coordinates.
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// `phi[q][b]`
    pub phi: Vec<[f64; 8]>,
    /// `dphi[q][b][k]` in reference coordinates (divide by `h`).
    pub dphi: Vec<[[f64; 3]; 8]>,
}

impl Q1Reference {
    pub fn new(dim: usize) -> Self {
        let nq = 1usize << dim;
        let mut points = Vec::with_capacity(nq);
        let mut weights = Vec::with_capacity(nq);
        let mut phi = Vec::with_capacity(nq);
        let mut dphi = Vec::with_capacity(nq);
        for q in 0..nq {
            let mut xi = [0.0; 3];
            for (k, c) in xi.iter_mut().enumerate().take(dim) {
                *c = if (q >> k) & 1 == 1 {
                    GAUSS_HI
                } else {
                    GAUSS_LO
                };
            }
            let (p, g) = Self::eval_at(dim, &xi);
            points.push(xi);
            weights.push(1.0 / nq as f64);
            phi.push(p);
            dphi.push(g);
        }
        Self {
            dim,
            points,
            weights,
            phi,
            dphi,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_basis(&self) -> usize {
        1 << self.dim
    }

    /// Basis values and reference gradients at a local point.
    pub fn eval_at(dim: usize, xi: &Point) -> ([f64; 8], [[f64; 3]; 8]) {
        let nb = 1usize << dim;
        let mut p = [0.0; 8];
        let mut g = [[0.0; 3]; 8];
        for b in 0..nb {
            let mut val = 1.0;
            for k in 0..dim {
                val *= if (b >> k) & 1 == 1 {
                    xi[k]
                } else {
                    1.0 - xi[k]
                };
            }
            p[b] = val;
            for k in 0..dim {
                let mut d = if (b >> k) & 1 == 1 { 1.0 } else { -1.0 };
                for m in 0..dim {
                    if m != k {
                        d *= if (b >> m) & 1 == 1 {
                            xi[m]
                        } else {
                            1.0 - xi[m]
                        };
                    }
                }
                g[b][k] = d;
            }
        }
        (p, g)
    }
}

/// Iterates over every quadrature point of a grid with its physical position,
/// physical weight, element index and local point index.
pub fn for_each_quadrature_point(
    grid: &Grid,
    reference: &Q1Reference,
    mut f: impl FnMut(usize, usize, &Point, f64),
) {
    let h = grid.h();
    let vol = grid.element_volume();
    for e in 0..grid.num_elements() {
        let o = grid.element_origin(e);
        for (q, xi) in reference.points.iter().enumerate() {
            let mut x = [0.0; 3];
            for k in 0..grid.dim() {
                x[k] = o[k] + xi[k] * h;
            }
            f(e, q, &x, vol * reference.weights[q]);
        }
    }
}

/// Value and gradient of a nodal vector field at a quadrature point.
///
/// Returns `(u[α], grad[k][α] = ∂_k u^α)`.
#[inline]
pub fn field_at_qp(
    grid: &Grid,
    reference: &Q1Reference,
    nodes: &[usize; 8],
    q: usize,
    values: &[f64],
    ncomp: usize,
) -> ([f64; 3], [[f64; 3]; 3]) {
    let inv_h = 1.0 / grid.h();
    let d = grid.dim();
    let mut u = [0.0; 3];
    let mut g = [[0.0; 3]; 3];
    for b in 0..reference.num_basis() {
        let base = nodes[b] * ncomp;
        let phi = reference.phi[q][b];
        let dphi = &reference.dphi[q][b];
        for a in 0..ncomp {
            let v = values[base + a];
            u[a] += phi * v;
            for k in 0..d {
                g[k][a] += dphi[k] * inv_h * v;
            }
        }
    }
    (u, g)
}
