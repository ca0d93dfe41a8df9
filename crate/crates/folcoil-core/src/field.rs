//! Scalar sample fields over a periodic grid, with the pointwise algebra the
//! chart equations are written in.
//!
//! Fields are immutable after construction: every operation returns a fresh
//! field. Reductions use a fixed (index-order) summation so results are
//! bit-reproducible.

use std::sync::Arc;

use crate::error::{FolError, Result};
use crate::grid::GridRef;
use crate::spectral;

/// Relative threshold below which a denominator counts as zero.
pub const DIV_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: GridRef,
    values: Arc<Vec<f64>>,
    /// Lazily computed flag: does the field carry spectral energy above
    /// half-band? Shared across clones since values are shared.
    high_band: Arc<std::sync::OnceLock<bool>>,
}

/// Elementary pointwise functions accepted by `ScalarField::map_elementary`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementary {
    Sin,
    Cos,
    Exp,
    Log,
    Sech,
    Tanh,
}

impl ScalarField {
    pub fn new(grid: GridRef, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FolError::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(FolError::Invalid("non-finite field sample".to_string()));
        }
        Ok(ScalarField::from_values(grid, values))
    }

    pub fn constant(grid: GridRef, c: f64) -> Self {
        let n = grid.len();
        ScalarField::from_values(grid, vec![c; n])
    }

    pub fn zeros(grid: GridRef) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Sample a function of the node coordinates.
    pub fn from_fn(grid: GridRef, f: impl Fn(&[f64]) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        ScalarField::from_values(grid, values)
    }

    fn from_values(grid: GridRef, values: Vec<f64>) -> Self {
        ScalarField {
            grid,
            values: Arc::new(values),
            high_band: Arc::new(std::sync::OnceLock::new()),
        }
    }

    /// True when the field carries spectral energy above half-band; cached.
    pub fn has_high_band(&self) -> bool {
        *self
            .high_band
            .get_or_init(|| spectral::has_high_band(&self.grid, &self.values))
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(FolError::GridMismatch(format!(
                "axes {:?} vs {:?}",
                self.grid.axes(),
                other.grid.axes()
            )));
        }
        Ok(())
    }

    fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(ScalarField::from_values(self.grid.clone(), values))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_values(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a - b)
    }

    /// Pointwise product. Dealiased by the 3/2 rule when both operands carry
    /// energy above half-band; see `spectral::mul_dealiased`.
    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        Ok(spectral::mul_dealiased(self, other))
    }

    /// Plain pointwise product with no dealiasing.
    pub fn mul_pointwise(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a * b)
    }

    pub fn div(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        let scale = other.max_abs();
        let min_abs = other
            .values
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v.abs()));
        if min_abs <= DIV_EPS * scale || scale == 0.0 {
            return Err(FolError::DivisionByNearZero { min_abs, scale });
        }
        self.zip(other, |a, b| a / b)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn map_elementary(&self, f: Elementary) -> Result<ScalarField> {
        if f == Elementary::Log {
            let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                return Err(FolError::Invalid(format!(
                    "log of non-positive field (min = {min:.3e})"
                )));
            }
        }
        Ok(self.map(|v| match f {
            Elementary::Sin => v.sin(),
            Elementary::Cos => v.cos(),
            Elementary::Exp => v.exp(),
            Elementary::Log => v.ln(),
            Elementary::Sech => 1.0 / v.cosh(),
            Elementary::Tanh => v.tanh(),
        }))
    }

    /// Mean over all nodes, summed in index order.
    pub fn mean(&self) -> f64 {
        let sum: f64 = self.values.iter().sum();
        sum / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Discrete L² norm: sqrt(mean of squares).
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// Exact derivative of the trigonometric interpolant along a named axis.
    pub fn spectral_partial(&self, axis: &str) -> Result<ScalarField> {
        let ax = self.grid.axis_index(axis)?;
        Ok(self.spectral_partial_axis(ax))
    }

    /// Same as `spectral_partial`, by axis position.
    pub fn spectral_partial_axis(&self, axis: usize) -> ScalarField {
        let values = spectral::partial(&self.grid, &self.values, axis);
        ScalarField::from_values(self.grid.clone(), values)
    }

    /// Average over the given leaf axes; the result is constant along them.
    /// An empty axis set is the identity.
    pub fn leafwise_mean(&self, leaf_axes: &[&str]) -> Result<ScalarField> {
        let mut mask = vec![false; self.grid.dim()];
        for name in leaf_axes {
            mask[self.grid.axis_index(name)?] = true;
        }
        Ok(self.leafwise_mean_mask(&mask))
    }

    pub fn leafwise_mean_mask(&self, leaf_axes: &[bool]) -> ScalarField {
        if leaf_axes.iter().all(|&b| !b) {
            return self.clone();
        }
        let grid = &self.grid;
        let mut sums = vec![0.0f64; grid.len()];
        let mut count = 1usize;
        // Average one leaf axis at a time; order is fixed so the reduction is
        // bit-reproducible.
        let mut current: Vec<f64> = self.values.as_ref().clone();
        for (axis, &is_leaf) in leaf_axes.iter().enumerate() {
            if !is_leaf {
                continue;
            }
            let n = grid.resolution(axis);
            let stride = grid.stride(axis);
            count *= n;
            sums.iter_mut().for_each(|v| *v = 0.0);
            for base in crate::grid::lane_offsets(grid, axis) {
                let mut s = 0.0;
                for k in 0..n {
                    s += current[base + k * stride];
                }
                for k in 0..n {
                    sums[base + k * stride] = s;
                }
            }
            std::mem::swap(&mut current, &mut sums);
        }
        let inv = 1.0 / count as f64;
        ScalarField::from_values(grid.clone(), current.iter().map(|v| v * inv).collect())
    }

    /// Evaluate the trigonometric interpolant at an arbitrary point.
    pub fn interpolant(&self) -> spectral::Interpolant {
        spectral::Interpolant::new(&self.grid, &self.values)
    }
}

/// Max-abs difference of two fields on the same grid, for tests and residual
/// reports.
pub fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    assert!(a.grid().same_as(b.grid()));
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;

    fn grid2() -> GridRef {
        PeriodicGrid::new(&["x", "y"], &[16, 16]).unwrap()
    }

    #[test]
    fn mean_of_sin_squared_is_half() {
        let g = PeriodicGrid::new(&["x"], &[16]).unwrap();
        let f = ScalarField::from_fn(g, |c| c[0].sin());
        let f2 = f.mul(&f).unwrap();
        assert!((f2.mean() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn self_division_is_one() {
        let g = grid2();
        let f = ScalarField::from_fn(g, |c| 2.0 + c[0].sin());
        let q = f.div(&f).unwrap();
        assert!(q.values().iter().all(|&v| (v - 1.0).abs() <= 1e-15));
    }

    #[test]
    fn near_zero_division_rejected() {
        let g = grid2();
        let f = ScalarField::constant(g.clone(), 1.0);
        let d = ScalarField::from_fn(g, |c| c[0].sin());
        assert!(matches!(
            f.div(&d),
            Err(FolError::DivisionByNearZero { .. })
        ));
    }

    #[test]
    fn product_identity_sin_cos() {
        let g = grid2();
        let s = ScalarField::from_fn(g.clone(), |c| c[0].sin());
        let c = ScalarField::from_fn(g.clone(), |c| c[0].cos());
        let p = s.mul(&c).unwrap();
        let expect = ScalarField::from_fn(g, |c| 0.5 * (2.0 * c[0]).sin());
        assert!(max_abs_diff(&p, &expect) <= 1e-10);
    }

    #[test]
    fn leafwise_mean_examples() {
        let g = grid2();
        let one = ScalarField::constant(g.clone(), 1.0);
        assert!(
            max_abs_diff(&one.leafwise_mean(&["x", "y"]).unwrap(), &one) <= 1e-15
        );

        let s = ScalarField::from_fn(g.clone(), |c| c[0].sin());
        assert!(s.leafwise_mean(&["x"]).unwrap().max_abs() <= 1e-14);

        // Empty axis set is the identity.
        assert!(max_abs_diff(&s.leafwise_mean(&[]).unwrap(), &s) <= 0.0);

        let g3 = PeriodicGrid::new(&["x", "y", "z"], &[16, 8, 8]).unwrap();
        let f = ScalarField::from_fn(g3.clone(), |c| c[0].sin().powi(2) + c[2].cos());
        let m = f.leafwise_mean(&["x", "y"]).unwrap();
        let expect = ScalarField::from_fn(g3, |c| 0.5 + c[2].cos());
        assert!(max_abs_diff(&m, &expect) <= 1e-12);
    }

    #[test]
    fn grid_mismatch_detected() {
        let a = ScalarField::zeros(grid2());
        let b = ScalarField::zeros(PeriodicGrid::new(&["x", "z"], &[16, 16]).unwrap());
        assert!(a.add(&b).is_err());
    }
}
