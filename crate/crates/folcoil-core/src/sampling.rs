//! Deterministic sample generators: low-order trigonometric fields for
//! residual tests and quasi-random node sequences for pointwise matrix
//! checks. Everything is seeded so reports are reproducible.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::field::ScalarField;
use crate::grid::GridRef;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random real trigonometric polynomial with modes |k| ≤ 2 per axis, smooth
/// and fully resolved on every grid with resolution ≥ 8.
pub fn random_trig_field(grid: &GridRef, rng: &mut ChaCha8Rng, scale: f64) -> ScalarField {
    let dim = grid.dim();
    let mut terms: Vec<(Vec<i32>, f64, f64)> = Vec::new();
    for _ in 0..6 {
        let k: Vec<i32> = (0..dim).map(|_| rng.gen_range(-2..=2)).collect();
        let weight = 1.0 + k.iter().map(|v| (v * v) as f64).sum::<f64>();
        let amp = rng.gen_range(-1.0..1.0) * scale / weight;
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        terms.push((k, amp, phase));
    }
    ScalarField::from_fn(grid.clone(), move |c| {
        terms
            .iter()
            .map(|(k, amp, phase)| {
                let arg: f64 =
                    k.iter().zip(c).map(|(&ki, &xi)| ki as f64 * xi).sum::<f64>() + phase;
                amp * arg.sin()
            })
            .sum()
    })
}

/// Random strictly positive field exp(t) for a small random trig t.
pub fn random_positive_field(grid: &GridRef, rng: &mut ChaCha8Rng, scale: f64) -> ScalarField {
    random_trig_field(grid, rng, scale).map(f64::exp)
}

/// Deterministic quasi-random sequence of grid node indices (flat indices),
/// drawn without replacement when the grid is large enough.
pub fn sample_nodes(grid: &GridRef, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng(seed);
    let len = grid.len();
    if count >= len {
        return (0..len).collect();
    }
    let mut seen = std::collections::HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let idx = rng.gen_range(0..len);
        if seen.insert(idx) {
            out.push(idx);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;

    #[test]
    fn sampling_is_deterministic() {
        let g = PeriodicGrid::new(&["x", "y"], &[16, 16]).unwrap();
        let a = sample_nodes(&g, 20, 7);
        let b = sample_nodes(&g, 20, 7);
        assert_eq!(a, b);
        let f1 = random_trig_field(&g, &mut rng(3), 1.0);
        let f2 = random_trig_field(&g, &mut rng(3), 1.0);
        assert!(crate::field::max_abs_diff(&f1, &f2) <= 0.0);
    }

    #[test]
    fn positive_field_is_positive() {
        let g = PeriodicGrid::new(&["x"], &[16]).unwrap();
        let f = random_positive_field(&g, &mut rng(5), 0.5);
        assert!(f.min() > 0.0);
    }
}
