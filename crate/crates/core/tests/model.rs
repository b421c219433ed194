// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

use coldsqueeze_core::model::*;
use coldsqueeze_core::noise::build_fluctuation_system;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(c: f64, delta: f64, theta: f64) -> ModelParams {
    ModelParams {
        c,
        delta,
        theta,
        ..ModelParams::default()
    }
}

#[test]
fn dense_gaussian_bins_match_closed_form() {
    for delta in [-30.0, -20.0, -5.0, 0.0, 1.0, 30.0] {
        let p = ModelParams {
            transverse: Transverse::GaussianBins(256),
            ..params(100.0, delta, 0.5)
        };
        for i in 0..=60 {
            let x = 1e-3 * 10f64.powf(6.0 * i as f64 / 60.0);
            let binned = state_equation(x, &p).unwrap();
            let closed = state_equation_gaussian_closed_form(x, &p).unwrap();
            assert!(
                ((binned - closed) / closed).abs() <= 1e-3,
                "Δ={delta} X={x}"
            );
        }
    }
}

#[test]
fn nominal_cooperativity_roundtrip() {
    let p = params(220.0, -20.0, 0.0);
    let y = 220.0;
    let ratio = peak_transmission_ratio(220.0, y, &p);
    let c = cooperativity_from_amplitudes(ratio * y, y, &p).unwrap();
    assert!((c - 220.0).abs() < 1e-4 * 220.0, "{c}");
    assert_eq!(cooperativity_from_amplitudes(y, y, &p).unwrap(), 0.0);
}

#[test]
fn critical_point_unfolds_into_two_turning_points() {
    let at = |c: f64| {
        let p = params(c, 0.0, 0.0);
        turning_points(&p, p.default_x_max())
    };
    let tp = at(4.0);
    assert!(!tp.bistable && tp.points.len() == 1);
    assert!((tp.points[0] - 3.0).abs() <= 1e-6);
    assert!((state_equation(tp.points[0], &params(4.0, 0.0, 0.0)).unwrap() - 27.0).abs() <= 1e-6);
    for eps in [1e-12, 1e-10, 1e-8, 1e-4] {
        let tp = at(4.0 + eps);
        assert!(tp.bistable && tp.points.len() == 2, "C=4+{eps}: {tp:?}");
        assert!(tp.points[0] < 3.0 && 3.0 < tp.points[1]);
    }
    assert!(!at(3.9).bistable);
}

#[test]
fn slope_and_eigenvalue_stability_agree() {
    // A negative slope always implies a real unstable eigenvalue; the converse can
    // fail where self-pulsing sets in, and such points are reported.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut self_pulsing = Vec::new();
    for _ in 0..100 {
        let p = params(
            rng.random_range(0.0..300.0),
            rng.random_range(-30.0..30.0),
            rng.random_range(-10.0..10.0),
        );
        let x = 10f64.powf(rng.random_range(-3.0..3.0));
        let y = state_equation(x, &p).unwrap();
        for ss in solve_steady_states(y, &p).unwrap() {
            let growth = build_fluctuation_system(&ss, &p).unwrap().max_growth_rate();
            if !ss.stable {
                assert!(
                    growth > 0.0,
                    "middle branch without growing mode: {p:?} X={}",
                    ss.intensity
                );
            } else if growth > 1e-9 {
                self_pulsing.push((p.c, p.delta, p.theta, ss.intensity, growth));
            }
        }
    }
    for s in &self_pulsing {
        eprintln!(
            "slope-stable but dynamically unstable: C={:.2} Δ={:.2} θ={:.2} X={:.3e} growth={:.3e}",
            s.0, s.1, s.2, s.3, s.4
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn drive_exceeds_intensity(
        c in 0.0f64..500.0,
        delta in -30.0f64..30.0,
        theta in -10.0f64..10.0,
        lx in -4.0f64..4.0,
    ) {
        let x = 10f64.powf(lx);
        let y = state_equation(x, &params(c, delta, theta)).unwrap();
        prop_assert!(y >= x);
        let y0 = state_equation(x, &params(0.0, delta, 0.0)).unwrap();
        prop_assert_eq!(y0, x);
    }

    #[test]
    fn linear_limits_coincide(
        c in 0.1f64..500.0,
        delta in -30.0f64..30.0,
        lx in -8.0f64..-4.0,
    ) {
        let x = 10f64.powf(lx);
        let sat = 1.0 + delta * delta;
        for layout in [Transverse::PlaneWave, Transverse::GaussianBins(64)] {
            let p = ModelParams { transverse: layout, ..params(c, delta, 0.0) };
            // Y/X = 1 + 4CA + 4C²(1+Δ²)A², solved for the response A.
            let ratio = state_equation(x, &p).unwrap() / x;
            let k = 4.0 * c * c * sat;
            let a = (-4.0 * c + (16.0 * c * c + 4.0 * k * (ratio - 1.0)).sqrt()) / (2.0 * k);
            prop_assert!((a * sat - 1.0).abs() <= x + 1e-9, "A·(1+Δ²) = {}", a * sat);
        }
    }

    #[test]
    fn roots_solve_the_state_equation(
        c in 0.0f64..300.0,
        delta in -30.0f64..30.0,
        theta in -10.0f64..10.0,
        ly in -2.0f64..5.0,
        gaussian in any::<bool>(),
    ) {
        let p = ModelParams {
            transverse: if gaussian { Transverse::GaussianBins(8) } else { Transverse::PlaneWave },
            ..params(c, delta, theta)
        };
        let y = 10f64.powf(ly);
        let roots = solve_steady_states(y, &p).unwrap();
        prop_assert!(!roots.is_empty() && roots.len() <= 3);
        for ss in &roots {
            let resid = (state_equation(ss.intensity, &p).unwrap() - y).abs() / y;
            prop_assert!(resid <= 1e-9, "residual {resid}");
            prop_assert!(ss.intensity <= y * (1.0 + 1e-12));
            prop_assert!(ss.bins.iter().all(|b| b.d > 0.0 && b.d <= 1.0));
            prop_assert!((ss.x.norm_sqr() / ss.intensity - 1.0).abs() < 1e-9);
            if ss.branch == Branch::Middle {
                prop_assert!(!ss.stable);
            }
        }
        if roots.len() == 3 {
            prop_assert_eq!(roots[1].branch, Branch::Middle);
        }
    }

    #[test]
    fn turning_points_are_slope_zeros(
        c in 4.5f64..300.0,
        delta in -10.0f64..10.0,
        theta in -10.0f64..10.0,
    ) {
        let p = params(c, delta, theta);
        let tp = turning_points(&p, p.default_x_max());
        for &x in &tp.points {
            let scale = state_equation(x, &p).unwrap() / x;
            prop_assert!(state_slope(x, &p).unwrap().abs() <= 1e-7 * scale);
        }
        prop_assert_eq!(tp.bistable, tp.points.len() == 2);
    }
}
