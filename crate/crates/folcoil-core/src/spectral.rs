//! Fourier machinery behind the field calculus: exact derivatives of the
//! trigonometric interpolant, 3/2-rule dealiased products, differentiation
//! matrices, and off-grid evaluation.
//!
//! Conventions: forward transform F[u]_j = Σ_m u_m e^(-i j x_m); wavenumbers
//! j, j - N for the upper half; the Nyquist mode is treated as a pure cosine,
//! so its coefficient is zeroed in odd derivatives.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::ScalarField;
use crate::grid::{lane_offsets, GridRef, PeriodicGrid};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan_forward(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

fn plan_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Signed wavenumber of FFT bin `j` out of `n`.
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// In-place FFT along one axis of a row-major multi-array.
fn fft_axis(grid: &PeriodicGrid, data: &mut [Complex64], axis: usize, forward: bool) {
    let n = grid.resolution(axis);
    let stride = grid.stride(axis);
    let plan = if forward {
        plan_forward(n)
    } else {
        plan_inverse(n)
    };
    let mut lane = vec![Complex64::ZERO; n];
    for base in lane_offsets(grid, axis) {
        for k in 0..n {
            lane[k] = data[base + k * stride];
        }
        plan.process(&mut lane);
        for k in 0..n {
            data[base + k * stride] = lane[k];
        }
    }
}

/// Full d-dimensional forward transform of real samples (unnormalized).
pub fn fft_nd(grid: &PeriodicGrid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for axis in 0..grid.dim() {
        fft_axis(grid, &mut data, axis, true);
    }
    data
}

/// Inverse of `fft_nd`, returning the real part with 1/N normalization.
pub fn ifft_nd_real(grid: &PeriodicGrid, mut data: Vec<Complex64>) -> Vec<f64> {
    for axis in 0..grid.dim() {
        fft_axis(grid, &mut data, axis, false);
    }
    let norm = 1.0 / grid.len() as f64;
    data.iter().map(|c| c.re * norm).collect()
}

/// Exact spectral derivative along `axis`: multiply by ik, zero the Nyquist
/// bin so the odd derivative stays real-symmetric.
pub fn partial(grid: &PeriodicGrid, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.resolution(axis);
    let stride = grid.stride(axis);
    let plan_f = plan_forward(n);
    let plan_i = plan_inverse(n);
    let norm = 1.0 / n as f64;
    let mut out = vec![0.0f64; values.len()];
    let mut lane = vec![Complex64::ZERO; n];
    for base in lane_offsets(grid, axis) {
        for k in 0..n {
            lane[k] = Complex64::new(values[base + k * stride], 0.0);
        }
        plan_f.process(&mut lane);
        for (j, c) in lane.iter_mut().enumerate() {
            if j == n / 2 {
                *c = Complex64::ZERO;
            } else {
                let k = wavenumber(j, n) as f64;
                *c *= Complex64::new(0.0, k);
            }
        }
        plan_i.process(&mut lane);
        for k in 0..n {
            out[base + k * stride] = lane[k].re * norm;
        }
    }
    out
}

/// Fraction of spectral energy carried by modes with |k| above half-band
/// (|k_axis| > N_axis/4 on any axis), relative to total energy.
fn high_band_fraction(grid: &PeriodicGrid, values: &[f64]) -> f64 {
    let spec = fft_nd(grid, values);
    let mut total = 0.0f64;
    let mut high = 0.0f64;
    for (flat, c) in spec.iter().enumerate() {
        let e = c.norm_sqr();
        total += e;
        let mut rem = flat;
        let mut is_high = false;
        for axis in (0..grid.dim()).rev() {
            let n = grid.resolution(axis);
            let j = rem % n;
            rem /= n;
            if wavenumber(j, n).unsigned_abs() as usize > n / 4 {
                is_high = true;
            }
        }
        if is_high {
            high += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        high / total
    }
}

const HIGH_BAND_THRESHOLD: f64 = 1e-13;

/// Does the field carry any meaningful energy above half-band?
pub(crate) fn has_high_band(grid: &PeriodicGrid, values: &[f64]) -> bool {
    high_band_fraction(grid, values) > HIGH_BAND_THRESHOLD
}

/// Pointwise product, dealiased by the 3/2 rule when both operands carry
/// spectral energy above half-band.
pub fn mul_dealiased(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let grid = a.grid().clone();
    let need = a.has_high_band() && b.has_high_band();
    if !need {
        let values: Vec<f64> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| x * y)
            .collect();
        return ScalarField::new(grid, values).expect("same grid");
    }
    let pa = pad_to_half_again(&grid, a.values());
    let pb = pad_to_half_again(&grid, b.values());
    let padded = padded_grid(&grid);
    let prod: Vec<f64> = pa.iter().zip(&pb).map(|(&x, &y)| x * y).collect();
    let values = truncate_from_padded(&grid, &padded, &prod);
    ScalarField::new(grid, values).expect("same grid")
}

fn padded_grid(grid: &PeriodicGrid) -> GridRef {
    // 3N/2 is even but not a power of two; build the layout directly.
    let axes: Vec<&str> = grid.axes().iter().map(|s| s.as_str()).collect();
    let res: Vec<usize> = grid.resolutions().iter().map(|&n| 3 * n / 2).collect();
    PeriodicGrid::new_unchecked(&axes, &res)
}

/// Spread a spectrum into a larger grid, splitting each Nyquist coefficient
/// evenly between the ±N/2 bins of the target.
fn pad_to_half_again(grid: &PeriodicGrid, values: &[f64]) -> Vec<f64> {
    let spec = fft_nd(grid, values);
    let padded = padded_grid(grid);
    let mut out = vec![Complex64::ZERO; padded.len()];
    let dim = grid.dim();
    let mut idx = vec![0usize; dim];
    for (flat, &c) in spec.iter().enumerate() {
        let mut rem = flat;
        for axis in (0..dim).rev() {
            idx[axis] = rem % grid.resolution(axis);
            rem /= grid.resolution(axis);
        }
        // Each axis index maps to one or two target bins with a weight.
        let mut targets: Vec<(usize, f64)> = vec![(0, 1.0)];
        for axis in 0..dim {
            let n = grid.resolution(axis);
            let m = padded.resolution(axis);
            let j = idx[axis];
            let k = wavenumber(j, n);
            let mut next = Vec::with_capacity(targets.len() * 2);
            if j == n / 2 {
                // Nyquist: split as cos = (e^{+ik} + e^{-ik})/2.
                let up = (k as usize) % m;
                let down = (m as i64 + (-k)) as usize % m;
                for &(base, w) in &targets {
                    next.push((base * m + up, w * 0.5));
                    next.push((base * m + down, w * 0.5));
                }
            } else {
                let pos = ((k.rem_euclid(m as i64)) as usize) % m;
                for &(base, w) in &targets {
                    next.push((base * m + pos, w));
                }
            }
            targets = next;
        }
        for (t, w) in targets {
            out[t] += c * w;
        }
    }
    let scale = padded.len() as f64 / grid.len() as f64;
    ifft_nd_real(&padded, out)
        .into_iter()
        .map(|v| v * scale)
        .collect()
}

/// Truncate a padded-grid sample set back to the original band, folding the
/// ±N/2 bins into the Nyquist slot.
fn truncate_from_padded(grid: &PeriodicGrid, padded: &PeriodicGrid, values: &[f64]) -> Vec<f64> {
    let spec = fft_nd(padded, values);
    let dim = grid.dim();
    let mut out = vec![Complex64::ZERO; grid.len()];
    let mut idx = vec![0usize; dim];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut rem = flat;
        for axis in (0..dim).rev() {
            idx[axis] = rem % grid.resolution(axis);
            rem /= grid.resolution(axis);
        }
        // Gather the one or two source bins per axis (Nyquist folds ±N/2).
        let mut sources: Vec<(usize, f64)> = vec![(0, 1.0)];
        for axis in 0..dim {
            let n = grid.resolution(axis);
            let m = padded.resolution(axis);
            let j = idx[axis];
            let k = wavenumber(j, n);
            let mut next = Vec::with_capacity(sources.len() * 2);
            if j == n / 2 {
                let up = (k as usize) % m;
                let down = (m as i64 - k) as usize % m;
                for &(base, w) in &sources {
                    next.push((base * m + up, w));
                    next.push((base * m + down, w));
                }
            } else {
                let pos = (k.rem_euclid(m as i64)) as usize % m;
                for &(base, w) in &sources {
                    next.push((base * m + pos, w));
                }
            }
            sources = next;
        }
        for (s, w) in sources {
            *slot += spec[s] * w;
        }
    }
    let norm = 1.0 / padded.len() as f64;
    for c in out.iter_mut() {
        *c *= norm;
    }
    // out now holds band-limited coefficients scaled for the original grid.
    let mut data = out;
    for axis in 0..dim {
        fft_axis(grid, &mut data, axis, false);
    }
    data.iter().map(|c| c.re).collect()
}

/// Dense spectral differentiation matrix on n periodic nodes (period 2π),
/// consistent with `partial` by construction.
pub fn diff_matrix(n: usize) -> Vec<f64> {
    let grid = PeriodicGrid::new_unchecked(&["t"], &[n]);
    let mut mat = vec![0.0f64; n * n];
    let mut e = vec![0.0f64; n];
    for col in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[col] = 1.0;
        let d = partial(&grid, &e, 0);
        for row in 0..n {
            mat[row * n + col] = d[row];
        }
    }
    mat
}

/// Trigonometric interpolant of a sampled field, for off-grid evaluation.
/// The Nyquist bin contributes a pure cosine, matching `partial`.
pub struct Interpolant {
    resolutions: Vec<usize>,
    spectrum: Vec<Complex64>,
}

impl Interpolant {
    pub fn new(grid: &PeriodicGrid, values: &[f64]) -> Self {
        let norm = 1.0 / grid.len() as f64;
        let spectrum = fft_nd(grid, values)
            .into_iter()
            .map(|c| c * norm)
            .collect();
        Interpolant {
            resolutions: grid.resolutions().to_vec(),
            spectrum,
        }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        let dim = self.resolutions.len();
        debug_assert_eq!(point.len(), dim);
        // Per-axis phase tables; Nyquist as cos(kx).
        let mut phases: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
        for (axis, &n) in self.resolutions.iter().enumerate() {
            let x = point[axis];
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                if j == n / 2 {
                    row.push(Complex64::new(((n / 2) as f64 * x).cos(), 0.0));
                } else {
                    let k = wavenumber(j, n) as f64;
                    row.push(Complex64::from_polar(1.0, k * x));
                }
            }
            phases.push(row);
        }
        let mut sum = Complex64::ZERO;
        let mut idx = vec![0usize; dim];
        for (flat, &c) in self.spectrum.iter().enumerate() {
            let mut rem = flat;
            for axis in (0..dim).rev() {
                idx[axis] = rem % self.resolutions[axis];
                rem /= self.resolutions[axis];
            }
            let mut phase = Complex64::new(1.0, 0.0);
            for axis in 0..dim {
                phase *= phases[axis][idx[axis]];
            }
            sum += c * phase;
        }
        sum.re
    }
}

impl PeriodicGrid {
    /// Internal constructor that skips the power-of-two check, for padded
    /// (3N/2) working grids.
    pub(crate) fn new_unchecked(axes: &[&str], resolutions: &[usize]) -> GridRef {
        let mut strides = vec![0usize; axes.len()];
        let mut s = 1usize;
        for i in (0..axes.len()).rev() {
            strides[i] = s;
            s *= resolutions[i];
        }
        Arc::new(PeriodicGrid::from_raw(
            axes.iter().map(|a| a.to_string()).collect(),
            resolutions.to_vec(),
            strides,
            s,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::max_abs_diff;

    #[test]
    fn derivative_of_sin_is_cos() {
        let g = crate::grid::PeriodicGrid::new(&["x"], &[16]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |c| c[0].sin());
        let d = f.spectral_partial("x").unwrap();
        let expect = ScalarField::from_fn(g, |c| c[0].cos());
        assert!(max_abs_diff(&d, &expect) <= 1e-10);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = crate::grid::PeriodicGrid::new(&["x", "y"], &[16, 8]).unwrap();
        let f = ScalarField::constant(g, 3.5);
        assert!(f.spectral_partial("y").unwrap().max_abs() <= 1e-14);
    }

    #[test]
    fn mixed_partials_commute() {
        let g = crate::grid::PeriodicGrid::new(&["x", "y"], &[32, 32]).unwrap();
        let f = ScalarField::from_fn(g, |c| (c[0].sin()).exp() * c[1].cos());
        let dxy = f
            .spectral_partial("x")
            .unwrap()
            .spectral_partial("y")
            .unwrap();
        let dyx = f
            .spectral_partial("y")
            .unwrap()
            .spectral_partial("x")
            .unwrap();
        assert!(max_abs_diff(&dxy, &dyx) <= 1e-10);
    }

    #[test]
    fn unknown_axis_is_an_error() {
        let g = crate::grid::PeriodicGrid::new(&["x"], &[16]).unwrap();
        let f = ScalarField::zeros(g);
        assert!(f.spectral_partial("q7").is_err());
    }

    #[test]
    fn derivative_mean_is_zero() {
        let g = crate::grid::PeriodicGrid::new(&["x"], &[32]).unwrap();
        let f = ScalarField::from_fn(g, |c| (0.3 * c[0].sin() + 1.0).exp());
        assert!(f.spectral_partial("x").unwrap().mean().abs() <= 1e-12);
    }

    #[test]
    fn linearity_of_partial() {
        let g = crate::grid::PeriodicGrid::new(&["x", "y"], &[16, 16]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |c| c[0].sin() * c[1].cos());
        let h = ScalarField::from_fn(g, |c| (2.0 * c[1]).sin());
        let lhs = f
            .scale(2.0)
            .add(&h.scale(-3.0))
            .unwrap()
            .spectral_partial("y")
            .unwrap();
        let rhs = f
            .spectral_partial("y")
            .unwrap()
            .scale(2.0)
            .add(&h.spectral_partial("y").unwrap().scale(-3.0))
            .unwrap();
        let scale = rhs.max_abs();
        assert!(max_abs_diff(&lhs, &rhs) <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn dealiased_product_of_full_band_fields() {
        // sin(7x)·sin(7x) aliases at N=16 without padding; the 3/2 rule must
        // recover the resolvable part exactly: sin²(7x) = 1/2 − cos(14x)/2,
        // and cos(14x) aliases to cos(2x) on the plain grid but is dropped by
        // the padded product's truncation. Check against the band-limited
        // truth: the resolvable part at N=16 keeps only the mean 1/2.
        let g = crate::grid::PeriodicGrid::new(&["x"], &[16]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |c| (7.0 * c[0]).sin());
        let p = f.mul(&f).unwrap();
        // Modes of p: only k=0 (value 1/2) should survive; k=14 is out of band.
        let spec = fft_nd(p.grid(), p.values());
        let n = 16.0;
        assert!((spec[0].re / n - 0.5).abs() <= 1e-10);
        for j in 1..16 {
            assert!(spec[j].norm() / n <= 1e-10, "bin {j} leaked");
        }
    }

    #[test]
    fn diff_matrix_matches_partial() {
        let n = 32;
        let g = crate::grid::PeriodicGrid::new(&["t"], &[n]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |c| (c[0].sin()).exp());
        let d = f.spectral_partial("t").unwrap();
        let mat = diff_matrix(n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                out[i] += mat[i * n + j] * f.values()[j];
            }
        }
        for i in 0..n {
            assert!((out[i] - d.values()[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn interpolant_reproduces_nodes_and_midpoints() {
        let g = crate::grid::PeriodicGrid::new(&["x", "y"], &[16, 16]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |c| (c[0] + 2.0 * c[1]).sin() + c[0].cos());
        let interp = f.interpolant();
        for flat in [0usize, 5, 100, 200] {
            let p = g.coords(flat);
            assert!((interp.eval(&p) - f.values()[flat]).abs() <= 1e-12);
        }
        // Trig polynomial below Nyquist is reproduced exactly off-grid.
        let p = [0.37f64, 1.91];
        let truth = (p[0] + 2.0 * p[1]).sin() + p[0].cos();
        assert!((interp.eval(&p) - truth).abs() <= 1e-12);
    }
}
