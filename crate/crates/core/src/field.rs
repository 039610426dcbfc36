use crate::error::{Error, Result};
use crate::grid::{field_at_qp, for_each_quadrature_point, Grid, Point, Q1Reference};

/// Nodal values of a vector field on a structured grid, component fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteVectorField {
    grid: Grid,
    ncomp: usize,
    values: Vec<f64>,
}

impl DiscreteVectorField {
    pub fn new(grid: Grid, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if ncomp == 0 || values.len() != grid.num_nodes() * ncomp {
            return Err(Error::GridMismatch(format!(
                "expected {} values ({} nodes x {ncomp}), got {}",
                grid.num_nodes() * ncomp,
                grid.num_nodes(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            ncomp,
            values,
        })
    }

    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        Self {
            grid,
            ncomp,
            values: vec![0.0; grid.num_nodes() * ncomp],
        }
    }

    /// Nodal interpolant of a global function.
    pub fn interpolate(grid: Grid, ncomp: usize, f: impl Fn(&Point) -> [f64; 3]) -> Self {
        let values = grid.interpolate(ncomp, f);
        Self {
            grid,
            ncomp,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, node: usize) -> &[f64] {
        &self.values[node * self.ncomp..(node + 1) * self.ncomp]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Multilinear interpolation at an arbitrary point. Periodic grids wrap;
    /// box grids clamp to the domain.
    pub fn eval(&self, x: &[f64]) -> [f64; 3] {
        let g = &self.grid;
        let d = g.dim();
        let h = g.h();
        let mut cell = [0usize; 3];
        let mut t = [0.0; 3];
        for k in 0..d {
            let mut s = (x[k] - g.origin()) / h;
            if g.is_periodic() {
                let n = g.cells() as f64;
                s -= (s / n).floor() * n;
                let i = (s.floor() as usize).min(g.cells() - 1);
                cell[k] = i;
                t[k] = s - i as f64;
            } else {
                s = s.clamp(0.0, g.cells() as f64);
                let i = (s.floor() as usize).min(g.cells() - 1);
                cell[k] = i;
                t[k] = s - i as f64;
            }
        }
        let mut elem = 0;
        for k in (0..d).rev() {
            elem = elem * g.cells() + cell[k];
        }
        let nodes = g.element_nodes(elem);
        let (phi, _) = Q1Reference::eval_at(d, &t);
        let mut out = [0.0; 3];
        for b in 0..(1 << d) {
            for (a, o) in out.iter_mut().enumerate().take(self.ncomp.min(3)) {
                *o += phi[b] * self.values[nodes[b] * self.ncomp + a];
            }
        }
        out
    }

    /// `∫ u` per component, by the element quadrature.
    pub fn integral(&self) -> [f64; 3] {
        let r = Q1Reference::new(self.grid.dim());
        let mut out = [0.0; 3];
        for_each_quadrature_point(&self.grid, &r, |e, q, _, w| {
            let nodes = self.grid.element_nodes(e);
            let (u, _) = field_at_qp(&self.grid, &r, &nodes, q, &self.values, self.ncomp);
            for (o, v) in out.iter_mut().zip(u).take(self.ncomp.min(3)) {
                *o += w * v;
            }
        });
        out
    }

    /// `(∫ |u|²)^{1/2}` over all components, by the element quadrature.
    pub fn l2_norm(&self) -> f64 {
        let r = Q1Reference::new(self.grid.dim());
        let nc = self.ncomp;
        let mut total = 0.0;
        let mut u = vec![0.0; nc];
        for_each_quadrature_point(&self.grid, &r, |e, q, _, w| {
            let nodes = self.grid.element_nodes(e);
            u.iter_mut().for_each(|v| *v = 0.0);
            for b in 0..r.num_basis() {
                let phi = r.phi[q][b];
                for (a, v) in u.iter_mut().enumerate() {
                    *v += phi * self.values[nodes[b] * nc + a];
                }
            }
            total += w * u.iter().map(|v| v * v).sum::<f64>();
        });
        total.sqrt()
    }

    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.grid != other.grid || self.ncomp != other.ncomp {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            grid: self.grid,
            ncomp: self.ncomp,
            values,
        })
    }
}
