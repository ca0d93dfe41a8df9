//! The torus computation end to end: kernel dimensions of the discretized
//! tangential operators (untwisted H⁰ ≅ ℝ, twisted H⁰ = 0), block/dense
//! consistency, gauge invariance of the kernel dimension, and the coboundary
//! certificates in both flavors.

use folcoil_core::cohomology::*;
use folcoil_core::sampling::{random_trig_field, rng};
use folcoil_core::{FoliationChart, PeriodicGrid, ScalarField, TorusFoliationChart};

fn sin_chart(res: usize) -> TorusFoliationChart {
    let g = PeriodicGrid::new(&["x", "y"], &[res, res]).unwrap();
    TorusFoliationChart::new(ScalarField::from_fn(g, |c| c[1].sin())).unwrap()
}

const KERNEL_THRESHOLD: f64 = 1e-3;

#[test]
fn untwisted_kernel_contains_constants() {
    let chart = sin_chart(32);
    let op = assemble_operator(&chart, false, 32).unwrap();
    let dense = op.dense.as_ref().unwrap();
    let dim = 32 * 32;
    // M · 1 = 0 to rounding.
    let mut worst = 0.0f64;
    for r in 0..dim {
        let s: f64 = (0..dim).map(|c| dense[r * dim + c]).sum();
        worst = worst.max(s.abs());
    }
    assert!(worst <= 1e-12, "constants must be in the kernel: {worst}");
}

#[test]
fn kernel_dimensions_match_the_worked_example() {
    let chart = sin_chart(64);
    for n in [32usize, 64, 128] {
        let untw = assemble_operator(&chart, false, n).unwrap();
        let tw = assemble_operator(&chart, true, n).unwrap();
        assert_eq!(
            kernel_dimension(&untw, KERNEL_THRESHOLD),
            1,
            "untwisted kernel at n = {n}"
        );
        assert_eq!(
            kernel_dimension(&tw, KERNEL_THRESHOLD),
            0,
            "twisted kernel at n = {n}"
        );
        if n == 64 {
            assert!(
                singular_value_gap(&tw) >= 1e-3,
                "twisted spectral gap {:.3e}",
                singular_value_gap(&tw)
            );
        }
    }
}

#[test]
fn product_chart_with_zero_u() {
    // u ≡ 0: d^λ = d_F = ∂_x; the kernel is the x-constant fields, one per
    // y-row.
    let g = PeriodicGrid::new(&["x", "y"], &[32, 32]).unwrap();
    let chart = TorusFoliationChart::new(ScalarField::zeros(g)).unwrap();
    let tw = assemble_operator(&chart, true, 32).unwrap();
    assert_eq!(kernel_dimension(&tw, KERNEL_THRESHOLD), 32);
}

#[test]
fn zero_operator_has_full_kernel() {
    let op = OperatorMatrix {
        n: 16,
        twisted: false,
        dense: None,
        singular_values: vec![0.0; 256],
    };
    assert_eq!(kernel_dimension(&op, KERNEL_THRESHOLD), 256);
}

#[test]
fn block_and_dense_spectra_agree() {
    // The x-mode decomposition is a unitary change of basis, so the two
    // singular spectra must coincide. Force the dense path with a slightly
    // x-dependent perturbation of zero size... instead compare directly: the
    // assemble path picks blocks for x-independent u; recompute densely.
    let chart = sin_chart(16);
    let op = assemble_operator(&chart, true, 16).unwrap();
    let dense = op.dense.as_ref().unwrap();
    let dim = 16 * 16;
    let mat = nalgebra::DMatrix::from_row_slice(dim, dim, dense);
    let gram = mat.transpose() * &mat;
    let mut sv: Vec<f64> = gram
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let smax = op.singular_values[0];
    for (a, b) in op.singular_values.iter().zip(&sv) {
        assert!(
            (a - b).abs() <= 1e-6 * smax,
            "spectra diverge: {a} vs {b}"
        );
    }
}

#[test]
fn gauge_shift_preserves_kernel_dimension() {
    // Shifting μ by d_F h conjugates the operator by e^h; the kernel
    // dimension is unchanged.
    let chart = sin_chart(32);
    let n = 32;
    let base = assemble_operator(&chart, true, n).unwrap();
    let g = chart.u().grid().clone();
    let h = ScalarField::from_fn(g.clone(), |c| 0.5 * (c[0] + c[1]).sin());
    let dh = chart
        .tangential_d(&chart.tangential_scalar(h))
        .unwrap()
        .coefficient(&[0]);
    // d^λ g = Xg + u_y g; shifting μ by d_F h subtracts (Xh) g.
    let coeff = chart
        .u()
        .spectral_partial_axis(1)
        .sub(&dh)
        .unwrap();
    let shifted = assemble_operator_with_coefficient(&chart, &coeff, n).unwrap();
    assert_eq!(
        kernel_dimension(&base, KERNEL_THRESHOLD),
        kernel_dimension(&shifted, KERNEL_THRESHOLD)
    );

    // Same for the untwisted operator (kernel dimension 1).
    let base = assemble_operator(&chart, false, n).unwrap();
    let zero = ScalarField::zeros(g.clone());
    let h2 = ScalarField::from_fn(g, |c| 0.4 * c[0].cos());
    let dh2 = chart
        .tangential_d(&chart.tangential_scalar(h2))
        .unwrap()
        .coefficient(&[0]);
    let coeff = zero.sub(&dh2).unwrap();
    let shifted = assemble_operator_with_coefficient(&chart, &coeff, n).unwrap();
    assert_eq!(
        kernel_dimension(&base, KERNEL_THRESHOLD),
        kernel_dimension(&shifted, KERNEL_THRESHOLD)
    );
}

#[test]
fn untwisted_certificate_flags_periods_and_round_trips() {
    let chart = sin_chart(64);
    let g = chart.u().grid().clone();

    // f ≡ 1 is not a coboundary: periods (1, 1).
    let one = ScalarField::constant(g.clone(), 1.0);
    let cert = coboundary_certificate_untwisted(&one, &chart).unwrap();
    assert!((cert.a0 - 1.0).abs() <= 1e-12 && (cert.a_pi - 1.0).abs() <= 1e-12);

    // f = d_F g: every certificate component at the 1e-8 level.
    let mut r = rng(91);
    let gf = random_trig_field(&g, &mut r, 1.0);
    let df = chart.leaf_derivative(&gf).unwrap();
    let cert = coboundary_certificate_untwisted(&df, &chart).unwrap();
    assert!(
        cert.max_abs() <= 1e-8,
        "coboundary certificate {:.3e}",
        cert.max_abs()
    );

    // A y-only primitive exercises the constant normalization: d_F(cos y) =
    // sin²y has nonzero raw leaf integrals but is exact.
    let cosy = ScalarField::from_fn(g.clone(), |c| c[1].cos());
    let df = chart.leaf_derivative(&cosy).unwrap();
    let cert = coboundary_certificate_untwisted(&df, &chart).unwrap();
    assert!(
        cert.max_abs() <= 1e-8,
        "normalized certificate {:.3e}",
        cert.max_abs()
    );
    assert!(
        (cert.normalization - 2.0).abs() <= 1e-6,
        "reachable constant should be cos(0) − cos(π) = 2, got {}",
        cert.normalization
    );

    // A genuinely non-exact zero-period form: nonzero leaf certificate.
    let bump = ScalarField::from_fn(g, |c| c[1].sin().powi(2) * c[0].cos());
    let cert = coboundary_certificate_untwisted(&bump, &chart).unwrap();
    assert!(cert.a0.abs() <= 1e-12 && cert.a_pi.abs() <= 1e-12);
    assert!(
        cert.max_abs() > 1e-2,
        "nontrivial class must be flagged, certificate {:.3e}",
        cert.max_abs()
    );
}

#[test]
fn twisted_certificate_round_trip() {
    let chart = sin_chart(64);
    let g = chart.u().grid().clone();
    let mut r = rng(92);
    for seed in 0..3 {
        let gf = random_trig_field(&g, &mut r, 1.0);
        let h = chart
            .twisted_d(&chart.tangential_scalar(gf.clone()))
            .unwrap()
            .coefficient(&[0]);
        let cert = coboundary_certificate_twisted(&h, &chart).unwrap();
        assert!(
            cert.residual <= 1e-6,
            "seed {seed}: twisted round-trip residual {:.3e}",
            cert.residual
        );
        assert!(
            cert.decay <= 1e-6,
            "seed {seed}: primitive decay {:.3e}",
            cert.decay
        );
        assert!(cert.tail_means.0.abs() <= 1e-9 && cert.tail_means.1.abs() <= 1e-9);
    }
}

#[test]
fn twisted_primitive_matches_up_to_leaf_kernel() {
    // Reconstructing the primitive of d^λ g along the central leaf recovers
    // g∘φ up to the decaying kernel element c·sech t.
    let chart = sin_chart(64);
    let g = chart.u().grid().clone();
    let gf = ScalarField::from_fn(g, |c| (c[0]).sin() * (2.0 * c[1]).cos());
    let h = chart
        .twisted_d(&chart.tangential_scalar(gf.clone()))
        .unwrap()
        .coefficient(&[0]);

    // Pull h back to the leaf through x₀ = 0 on the lower cylinder and solve.
    let interp_h = h.interpolant();
    let interp_g = gf.interpolant();
    let line = LineSample::from_fn(LEAF_RADIUS, LEAF_NODES, |t| {
        let y = 2.0 * (-t).exp().atan();
        interp_h.eval(&[t.rem_euclid(std::f64::consts::TAU), y])
    });
    let sol = leaf_ode_solve(&line).unwrap();
    // g∘φ − g(φ(0))·sech t should match the reconstruction.
    let g_at_0 = interp_g.eval(&[0.0, 2.0f64.atan().mul_add(0.0, std::f64::consts::FRAC_PI_2)]);
    let mut worst = 0.0f64;
    for i in (0..LEAF_NODES).step_by(41) {
        let t = sol.node(i);
        let y = 2.0 * (-t).exp().atan();
        let expected = interp_g.eval(&[t.rem_euclid(std::f64::consts::TAU), y])
            - g_at_0 / t.cosh();
        worst = worst.max((sol.values[i] - expected).abs());
    }
    assert!(worst <= 1e-7, "primitive mismatch {worst:.3e}");
}
