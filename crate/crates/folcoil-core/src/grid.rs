//! Periodic grids on the torus [0, 2π)^d with named, ordered axes.

use std::sync::Arc;

use crate::error::{FolError, Result};

pub const PERIOD: f64 = std::f64::consts::TAU;

/// A uniform periodic grid. Every axis has period 2π; nonuniform periods are
/// rescaled by the caller. Axes are ordered and named; sample layout is
/// row-major in axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    axes: Vec<String>,
    resolutions: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

/// Shared handle to a grid; fields hold one of these so that grid identity
/// checks are cheap.
pub type GridRef = Arc<PeriodicGrid>;

impl PeriodicGrid {
    pub fn new(axes: &[&str], resolutions: &[usize]) -> Result<GridRef> {
        // Scenario charts use up to 4 axes; 5 is admitted so the general
        // codimension machinery can host charts with n - k >= 2 leaf axes.
        if axes.is_empty() || axes.len() > 5 {
            return Err(FolError::Invalid(format!(
                "grid dimension must be 1..=5, got {}",
                axes.len()
            )));
        }
        if axes.len() != resolutions.len() {
            return Err(FolError::Invalid(
                "axis/resolution count mismatch".to_string(),
            ));
        }
        for (name, &n) in axes.iter().zip(resolutions) {
            if n < 8 || !n.is_power_of_two() {
                return Err(FolError::Invalid(format!(
                    "resolution on axis `{name}` must be a power of two >= 8, got {n}"
                )));
            }
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(FolError::Invalid(format!("duplicate axis `{a}`")));
            }
        }
        let mut strides = vec![0usize; axes.len()];
        let mut s = 1usize;
        for i in (0..axes.len()).rev() {
            strides[i] = s;
            s *= resolutions[i];
        }
        Ok(Arc::new(PeriodicGrid {
            axes: axes.iter().map(|a| a.to_string()).collect(),
            resolutions: resolutions.to_vec(),
            strides,
            len: s,
        }))
    }

    /// Grid with the same resolution on every axis.
    pub fn uniform(axes: &[&str], resolution: usize) -> Result<GridRef> {
        let res = vec![resolution; axes.len()];
        Self::new(axes, &res)
    }

    pub(crate) fn from_raw(
        axes: Vec<String>,
        resolutions: Vec<usize>,
        strides: Vec<usize>,
        len: usize,
    ) -> Self {
        PeriodicGrid {
            axes,
            resolutions,
            strides,
            len,
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn resolutions(&self) -> &[usize] {
        &self.resolutions
    }

    pub fn resolution(&self, axis: usize) -> usize {
        self.resolutions[axis]
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| FolError::UnknownAxis(name.to_string()))
    }

    /// Grid spacing 2π/N on the given axis.
    pub fn spacing(&self, axis: usize) -> f64 {
        PERIOD / self.resolutions[axis] as f64
    }

    /// Coordinates of the node with the given flat index.
    pub fn coords(&self, mut flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for i in (0..self.dim()).rev() {
            let n = self.resolutions[i];
            out[i] = (flat % n) as f64 * self.spacing(i);
            flat /= n;
        }
        out
    }

    /// Flat index of the node with the given per-axis indices.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.strides)
            .map(|(&i, &s)| i * s)
            .sum()
    }

    /// True when `other` is the same grid (same axes and resolutions).
    pub fn same_as(&self, other: &PeriodicGrid) -> bool {
        self == other
    }
}

/// Base offsets of all 1-D lanes along `axis`; lane elements sit at
/// `base + k * stride(axis)` for `k` in `0..resolution(axis)`.
pub fn lane_offsets(grid: &PeriodicGrid, axis: usize) -> Vec<usize> {
    let n = grid.resolution(axis);
    let mut offsets = Vec::with_capacity(grid.len() / n);
    // Walk all nodes whose index along `axis` is zero.
    let mut idx = vec![0usize; grid.dim()];
    loop {
        offsets.push(grid.flat_index(&idx));
        // Odometer increment skipping `axis`.
        let mut i = grid.dim();
        loop {
            if i == 0 {
                return offsets;
            }
            i -= 1;
            if i == axis {
                continue;
            }
            idx[i] += 1;
            if idx[i] < grid.resolution(i) {
                break;
            }
            idx[i] = 0;
        }
    }
}
