//! Periodic microstructure on the unit cell `Q = [0,1)^d`.
//!
//! The matrix phase `ω` is the complement of a periodic array of inclusions.
//! Phase membership is decided analytically (no mesh), so finite element code
//! samples it at quadrature points without adding geometry error of its own.

use crate::error::{Error, Result};

/// Shape of the single inclusion placed in every unit cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InclusionShape {
    /// `ω` is the whole space.
    None,
    /// Disk (d = 2) or ball (d = 3) of the given radius centered at the cell midpoint.
    Ball { radius: f64 },
}

impl InclusionShape {
    /// Signed distance of a wrapped cell point to the inclusion boundary,
    /// negative inside the inclusion.
    fn signed_distance(&self, y: &[f64]) -> f64 {
        match *self {
            InclusionShape::None => f64::INFINITY,
            InclusionShape::Ball { radius } => {
                let r2: f64 = y.iter().map(|&c| (c - 0.5) * (c - 0.5)).sum();
                r2.sqrt() - radius
            }
        }
    }
}

/// 1-periodic microstructure: the indicator `1₊` of the matrix phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCellGeometry {
    dim: usize,
    shape: InclusionShape,
}

impl UnitCellGeometry {
    pub fn new(dim: usize, shape: InclusionShape) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidGeometry(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if let InclusionShape::Ball { radius } = shape {
            if !(radius > 0.0 && radius < 0.5) {
                return Err(Error::InvalidGeometry(format!(
                    "inclusion radius must lie in (0, 1/2), got {radius}"
                )));
            }
        }
        Ok(Self { dim, shape })
    }

    pub fn disk(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, InclusionShape::Ball { radius })
    }

    /// Homogeneous cell without inclusions.
    pub fn homogeneous(dim: usize) -> Result<Self> {
        Self::new(dim, InclusionShape::None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> InclusionShape {
        self.shape
    }

    pub fn has_inclusion(&self) -> bool {
        !matches!(self.shape, InclusionShape::None)
    }

    /// `1₊(y)`: 1 in the matrix, 0 in the inclusion. Points are wrapped into `Q`.
    pub fn indicator_plus(&self, point: &[f64]) -> f64 {
        if self.in_matrix(point) {
            1.0
        } else {
            0.0
        }
    }

    pub fn indicator_minus(&self, point: &[f64]) -> f64 {
        1.0 - self.indicator_plus(point)
    }

    pub fn in_matrix(&self, point: &[f64]) -> bool {
        debug_assert_eq!(point.len(), self.dim);
        let mut y = [0.0; 3];
        for (w, &p) in y.iter_mut().zip(point) {
            *w = p - p.floor();
        }
        self.shape.signed_distance(&y[..self.dim]) > 0.0
    }

    /// `k_δ(point / eps) = 1₊ + δ 1₋` at the rescaled point.
    pub fn kappa(&self, delta: f64, point: &[f64], eps: f64) -> f64 {
        let mut y = [0.0; 3];
        for (w, &p) in y.iter_mut().zip(point) {
            *w = p / eps;
        }
        if self.in_matrix(&y[..self.dim]) {
            1.0
        } else {
            delta
        }
    }

    /// Smallest distance between two distinct periodic copies of the inclusion.
    ///
    /// Infinite for a homogeneous cell.
    pub fn gap(&self) -> Result<f64> {
        match self.shape {
            InclusionShape::None => Ok(f64::INFINITY),
            InclusionShape::Ball { radius } => {
                // nearest periodic images of a centered ball sit one unit apart
                let g = 1.0 - 2.0 * radius;
                if g > 0.0 {
                    Ok(g)
                } else {
                    Err(Error::DegenerateGeometry(g))
                }
            }
        }
    }

    /// Midpoint-rule estimate of `|Q ∩ ω|` on `resolution^d` subcells.
    pub fn volume_fraction(&self, resolution: usize) -> Result<f64> {
        if resolution < 16 {
            return Err(Error::InvalidArgument(format!(
                "volume_fraction needs resolution >= 16, got {resolution}"
            )));
        }
        if !self.has_inclusion() {
            return Ok(1.0);
        }
        let h = 1.0 / resolution as f64;
        let total = resolution.pow(self.dim as u32);
        let mut count = 0usize;
        let mut y = [0.0; 3];
        for lin in 0..total {
            let mut rem = lin;
            for c in y.iter_mut().take(self.dim) {
                *c = ((rem % resolution) as f64 + 0.5) * h;
                rem /= resolution;
            }
            if self.in_matrix(&y[..self.dim]) {
                count += 1;
            }
        }
        Ok(count as f64 / total as f64)
    }

    /// Exact `|Q ∩ ω|` for the analytic shapes.
    pub fn exact_volume_fraction(&self) -> f64 {
        match self.shape {
            InclusionShape::None => 1.0,
            InclusionShape::Ball { radius } => {
                if self.dim == 2 {
                    1.0 - std::f64::consts::PI * radius * radius
                } else {
                    1.0 - 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3)
                }
            }
        }
    }
}

/// The weight `k_δ = 1₊ + δ 1₋` on a fixed geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightField {
    geometry: UnitCellGeometry,
    delta: f64,
}

impl WeightField {
    pub fn new(geometry: UnitCellGeometry, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self { geometry, delta })
    }

    pub fn geometry(&self) -> &UnitCellGeometry {
        &self.geometry
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `k_δ(y)` at a cell point.
    pub fn at_cell(&self, y: &[f64]) -> f64 {
        self.geometry.kappa(self.delta, y, 1.0)
    }

    /// `k_δ^ε(x) = k_δ(x / ε)`.
    pub fn at(&self, x: &[f64], eps: f64) -> f64 {
        self.geometry.kappa(self.delta, x, eps)
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "delta must lie in [0, 1], got {delta}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disk(r: f64) -> UnitCellGeometry {
        UnitCellGeometry::disk(2, r).unwrap()
    }

    #[test]
    fn indicator_examples() {
        let g = disk(0.25);
        assert_eq!(g.indicator_plus(&[0.5, 0.5]), 0.0);
        assert_eq!(g.indicator_plus(&[0.01, 0.01]), 1.0);
        assert_eq!(g.indicator_plus(&[1.5, 1.5]), 0.0);
    }

    #[test]
    fn kappa_examples() {
        let g = disk(0.25);
        assert_eq!(g.kappa(0.5, &[0.5, 0.5], 1.0), 0.5);
        assert_eq!(g.kappa(1.0, &[0.5, 0.5], 1.0), 1.0);
        assert_eq!(g.kappa(1.0, &[0.1, 0.9], 0.3), 1.0);
        assert_eq!(g.kappa(0.0, &[0.01, 0.01], 1.0), 1.0);
        // rescaled: x = 0.0625 sits at a cell center for eps = 0.125
        assert_eq!(g.kappa(0.1, &[0.0625, 0.0625], 0.125), 0.1);
    }

    #[test]
    fn rejects_bad_radius_and_dimension() {
        assert!(UnitCellGeometry::disk(2, 0.5).is_err());
        assert!(UnitCellGeometry::disk(2, 0.0).is_err());
        assert!(UnitCellGeometry::disk(4, 0.2).is_err());
        assert!(WeightField::new(disk(0.2), 1.5).is_err());
    }

    /// Brute-force gap: sample both inclusion boundaries and minimize over
    /// the 3^d neighbor shifts.
    fn sampled_gap(radius: f64) -> f64 {
        let m = 720;
        let pts: Vec<[f64; 2]> = (0..m)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                [0.5 + radius * t.cos(), 0.5 + radius * t.sin()]
            })
            .collect();
        let mut best = f64::INFINITY;
        for sx in -1i32..=1 {
            for sy in -1i32..=1 {
                if sx == 0 && sy == 0 {
                    continue;
                }
                for a in &pts {
                    for b in &pts {
                        let dx = a[0] - (b[0] + sx as f64);
                        let dy = a[1] - (b[1] + sy as f64);
                        best = best.min((dx * dx + dy * dy).sqrt());
                    }
                }
            }
        }
        best
    }

    #[test]
    fn gap_matches_sampled_oracle() {
        for (r, expected) in [(0.25, 0.5), (0.4, 0.2), (0.05, 0.9)] {
            let oracle = sampled_gap(r);
            assert!((oracle - expected).abs() < 1e-9, "oracle {oracle}");
            assert!((disk(r).gap().unwrap() - oracle).abs() < 1e-9);
        }
        assert!(UnitCellGeometry::homogeneous(2)
            .unwrap()
            .gap()
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn gap_decreases_with_radius() {
        let radii = [0.05, 0.1, 0.2, 0.3, 0.4, 0.49];
        let gaps: Vec<f64> = radii.iter().map(|&r| disk(r).gap().unwrap()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn volume_fraction_examples() {
        let v = disk(0.25).volume_fraction(1024).unwrap();
        assert!((v - (1.0 - std::f64::consts::PI / 16.0)).abs() < 1e-3);
        let v = disk(0.4999).volume_fraction(1024).unwrap();
        assert!((v - (1.0 - std::f64::consts::PI / 4.0)).abs() < 1e-2);
        assert_eq!(
            UnitCellGeometry::homogeneous(2)
                .unwrap()
                .volume_fraction(16)
                .unwrap(),
            1.0
        );
        assert!(disk(0.25).volume_fraction(8).is_err());
    }

    #[test]
    fn ball_volume_fraction_3d() {
        let g = UnitCellGeometry::disk(3, 0.3).unwrap();
        let v = g.volume_fraction(128).unwrap();
        assert!((v - g.exact_volume_fraction()).abs() < 2e-3);
    }

    proptest! {
        #[test]
        fn periodic_and_partition(
            x in -5.0f64..5.0, y in -5.0f64..5.0,
            zx in -4i32..4, zy in -4i32..4,
            r in 0.01f64..0.49,
        ) {
            let g = disk(r);
            let p = [x, y];
            // shift by integers that keep the fractional part exact
            let x2 = x + zx as f64;
            let y2 = y + zy as f64;
            prop_assume!((x2 - x2.floor() - (x - x.floor())).abs() < 1e-12);
            prop_assume!((y2 - y2.floor() - (y - y.floor())).abs() < 1e-12);
            let shifted = [x2, y2];
            let a = g.indicator_plus(&p);
            let b = g.indicator_plus(&shifted);
            let dist = (((x - x.floor()) - 0.5).powi(2) + ((y - y.floor()) - 0.5).powi(2)).sqrt();
            if (dist - r).abs() > 1e-9 {
                prop_assert_eq!(a, b);
            }
            prop_assert_eq!(a + g.indicator_minus(&p), 1.0);
        }

        #[test]
        fn kappa_is_affine_in_indicator(
            x in -3.0f64..3.0, y in -3.0f64..3.0,
            delta in 0.0f64..=1.0, eps in 0.05f64..2.0,
        ) {
            let g = disk(0.3);
            let p = [x, y];
            let scaled = [x / eps, y / eps];
            let expected = delta + (1.0 - delta) * g.indicator_plus(&scaled);
            prop_assert_eq!(g.kappa(delta, &p, eps), expected);
        }
    }
}
