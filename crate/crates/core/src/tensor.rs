//! Fourth-order elasticity tensors `a_{ij}^{αβ}` and periodic coefficient fields.
//!
//! Storage is the full `d⁴` array, index order `(i, j, α, β)` with `β` fastest.
//! The bilinear form is `a_{ij}^{αβ} ∂_j u^β ∂_i w^α`, so the quadratic form on a
//! matrix `ξ` (row = derivative index, column = component) reads
//! `a_{ij}^{αβ} ξ_i^α ξ_j^β`.

use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Small dense `d × d` matrix, `m[i][α]`.
pub type Mat = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor4 {
    dim: usize,
    data: [f64; 81],
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "tensor dimension must be 1..=3");
        Self {
            dim,
            data: [0.0; 81],
        }
    }

    /// `λ δ_{iα}δ_{jβ} + μ(δ_{ij}δ_{αβ} + δ_{iβ}δ_{jα})`
    pub fn isotropic(lambda: f64, mu: f64, dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        let kd = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..dim {
            for j in 0..dim {
                for a in 0..dim {
                    for b in 0..dim {
                        let v = lambda * kd(i, a) * kd(j, b)
                            + mu * (kd(i, j) * kd(a, b) + kd(i, b) * kd(j, a));
                        t.set(i, j, a, b, v);
                    }
                }
            }
        }
        t
    }

    /// Builds a tensor from `d⁴` entries in `(i, j, α, β)` order.
    pub fn from_entries(dim: usize, entries: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) || entries.len() != dim.pow(4) {
            return Err(Error::InvalidTensor(format!(
                "expected {} entries for dimension {dim}, got {}",
                dim.pow(4),
                entries.len()
            )));
        }
        let mut t = Self::zeros(dim);
        t.data[..entries.len()].copy_from_slice(entries);
        Ok(t)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, a: usize, b: usize) -> usize {
        let d = self.dim;
        ((i * d + j) * d + a) * d + b
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.data[self.idx(i, j, a, b)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, a: usize, b: usize, v: f64) {
        let k = self.idx(i, j, a, b);
        self.data[k] = v;
    }

    /// The `d⁴` entries in `(i, j, α, β)` order.
    pub fn entries(&self) -> &[f64] {
        &self.data[..self.dim.pow(4)]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut t = *self;
        t.data.iter_mut().for_each(|v| *v *= s);
        t
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `(A:ξ)_i^α = a_{ij}^{αβ} ξ_j^β`
    pub fn contract(&self, xi: &Mat) -> Mat {
        let d = self.dim;
        let mut out = [[0.0; 3]; 3];
        for i in 0..d {
            for a in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    for b in 0..d {
                        s += self.get(i, j, a, b) * xi[j][b];
                    }
                }
                out[i][a] = s;
            }
        }
        out
    }

    pub fn quadratic_form(&self, xi: &Mat) -> f64 {
        let c = self.contract(xi);
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for a in 0..d {
                s += xi[i][a] * c[i][a];
            }
        }
        s
    }

    /// Largest violation of `a_{ij}^{αβ} = a_{ji}^{βα} = a_{αj}^{iβ}`.
    pub fn symmetry_violation(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        let v = self.get(i, j, a, b);
                        worst = worst.max((v - self.get(j, i, b, a)).abs());
                        worst = worst.max((v - self.get(a, j, i, b)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Matrix of the quadratic form restricted to symmetric matrices, in the
    /// orthonormal basis `E_ii`, `(E_iα + E_αi)/√2`.
    pub fn symmetric_form_matrix(&self) -> DMatrix<f64> {
        let basis = symmetric_basis(self.dim);
        let m = basis.len();
        DMatrix::from_fn(m, m, |p, q| {
            let c = self.contract(&basis[q]);
            let mut s = 0.0;
            for i in 0..self.dim {
                for a in 0..self.dim {
                    s += basis[p][i][a] * c[i][a];
                }
            }
            s
        })
    }

    /// Extremal eigenvalues of the quadratic form on symmetric matrices.
    pub fn symmetric_eigen_bounds(&self) -> (f64, f64) {
        let mut m = self.symmetric_form_matrix();
        // symmetrize so that a non-symmetric tensor still yields a real spectrum
        let mt = m.transpose();
        m = (m + mt) * 0.5;
        let eig = SymmetricEigen::new(m);
        let lo = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let hi = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Orthonormal basis of symmetric `d × d` matrices (Frobenius inner product).
pub fn symmetric_basis(dim: usize) -> Vec<Mat> {
    let mut out = Vec::new();
    for i in 0..dim {
        for a in i..dim {
            let mut e = [[0.0; 3]; 3];
            if i == a {
                e[i][i] = 1.0;
            } else {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                e[i][a] = s;
                e[a][i] = s;
            }
            out.push(e);
        }
    }
    out
}

/// Spatial smoothness of a coefficient field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothness {
    Constant,
    /// Hölder continuous with the given exponent (smooth fields report 1).
    Holder(f64),
    Rough,
}

/// Trigonometric modulation `m(y) = 1 + a Π_k sin(2π y_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulation {
    pub amplitude: f64,
}

impl Modulation {
    pub fn eval(&self, y: &[f64]) -> f64 {
        let prod: f64 = y.iter().map(|&c| (2.0 * PI * c).sin()).product();
        1.0 + self.amplitude * prod
    }

    pub fn bounds(&self) -> (f64, f64) {
        let a = self.amplitude.abs();
        (1.0 - a, 1.0 + a)
    }
}

/// 1-periodic coefficient field `A(y) = m(y) A_base`.
///
/// Every field built here is a scalar modulation of a constant tensor, which
/// keeps the elasticity symmetries exact at every point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityTensorField {
    base: Tensor4,
    modulation: Option<Modulation>,
    kappa1: f64,
    kappa2: f64,
    smoothness: Smoothness,
}

impl ElasticityTensorField {
    pub fn isotropic(lambda: f64, mu: f64, dim: usize) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidTensor(format!(
                "mu must be positive, got {mu}"
            )));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidTensor(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidTensor(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        Ok(Self {
            base: Tensor4::isotropic(lambda, mu, dim),
            modulation: None,
            kappa1: 2.0 * mu,
            kappa2: dim as f64 * lambda + 2.0 * mu,
            smoothness: Smoothness::Constant,
        })
    }

    /// Isotropic base multiplied by `1 + amplitude Π sin(2π y_k)`.
    pub fn modulated(lambda: f64, mu: f64, dim: usize, amplitude: f64) -> Result<Self> {
        let iso = Self::isotropic(lambda, mu, dim)?;
        iso.with_modulation(Modulation { amplitude })
    }

    pub fn with_modulation(self, modulation: Modulation) -> Result<Self> {
        let (lo, hi) = modulation.bounds();
        if !(lo > 0.0) {
            return Err(Error::InvalidTensor(format!(
                "modulation minimum must be positive, got {lo}"
            )));
        }
        let (k1, k2) = self.modulation.map_or((self.kappa1, self.kappa2), |_| {
            self.base.symmetric_eigen_bounds()
        });
        Ok(Self {
            base: self.base,
            modulation: if modulation.amplitude == 0.0 {
                None
            } else {
                Some(modulation)
            },
            kappa1: k1 * lo,
            kappa2: k2 * hi,
            smoothness: if modulation.amplitude == 0.0 {
                self.smoothness
            } else {
                Smoothness::Holder(1.0)
            },
        })
    }

    /// Constant field from raw entries. Bounds are taken from the spectrum on
    /// symmetric matrices; symmetries are not enforced so that checks can be
    /// exercised on defective input.
    pub fn constant(base: Tensor4) -> Self {
        let (k1, k2) = base.symmetric_eigen_bounds();
        Self {
            base,
            modulation: None,
            kappa1: k1,
            kappa2: k2,
            smoothness: Smoothness::Constant,
        }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &Tensor4 {
        &self.base
    }

    pub fn modulation(&self) -> Option<Modulation> {
        self.modulation
    }

    /// Declared `(κ₁, κ₂)`.
    pub fn bounds(&self) -> (f64, f64) {
        (self.kappa1, self.kappa2)
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn is_constant(&self) -> bool {
        self.modulation.is_none()
    }

    /// Scalar factor `m(y)` multiplying the base tensor.
    #[inline]
    pub fn scale_at(&self, y: &[f64]) -> f64 {
        self.modulation.map_or(1.0, |m| m.eval(y))
    }

    pub fn eval(&self, y: &[f64]) -> Tensor4 {
        match self.modulation {
            None => self.base,
            Some(m) => self.base.scaled(m.eval(y)),
        }
    }

    /// `A^ε(x) = A(x / ε)`
    pub fn eval_scaled(&self, x: &[f64], eps: f64) -> Tensor4 {
        let mut y = [0.0; 3];
        for (w, &p) in y.iter_mut().zip(x) {
            *w = p / eps;
        }
        self.eval(&y[..self.dim()])
    }

    /// Largest symmetry violation over at least `n_samples` cell points.
    pub fn check_symmetries(&self, n_samples: usize) -> f64 {
        sample_points(self.dim(), n_samples)
            .iter()
            .map(|y| self.eval(&y[..self.dim()]).symmetry_violation())
            .fold(0.0, f64::max)
    }

    /// Sampled `(κ₁, κ₂)`: min/max over points of the extremal eigenvalues on
    /// symmetric matrices.
    pub fn check_ellipticity(&self, n_samples: usize) -> Result<(f64, f64)> {
        let (blo, bhi) = self.base.symmetric_eigen_bounds();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for y in sample_points(self.dim(), n_samples) {
            let s = self.scale_at(&y[..self.dim()]);
            // s > 0 by construction, so the spectrum scales monotonically
            lo = lo.min(s * blo);
            hi = hi.max(s * bhi);
        }
        if lo <= 0.0 {
            return Err(Error::EllipticityLost(lo));
        }
        Ok((lo, hi))
    }
}

/// Regular lattice `{i/m}^d` with `m` a multiple of 4 and `m^d >= n`.
fn sample_points(dim: usize, n: usize) -> Vec<[f64; 3]> {
    let mut m = (n.max(1) as f64).powf(1.0 / dim as f64).ceil() as usize;
    m = m.max(4).div_ceil(4) * 4;
    let total = m.pow(dim as u32);
    (0..total)
        .map(|lin| {
            let mut y = [0.0; 3];
            let mut rem = lin;
            for c in y.iter_mut().take(dim) {
                *c = (rem % m) as f64 / m as f64;
                rem /= m;
            }
            y
        })
        .collect()
}
