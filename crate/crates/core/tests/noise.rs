// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

use coldsqueeze_core::model::*;
use coldsqueeze_core::noise::*;
use proptest::prelude::*;

fn params(c: f64, delta: f64, theta: f64) -> ModelParams {
    ModelParams {
        c,
        delta,
        theta,
        ..ModelParams::default()
    }
}

/// Steady state with intracavity intensity `x` (the root closest to it).
fn state_at(x: f64, p: &ModelParams) -> SteadyState {
    let y = state_equation(x, p).unwrap();
    solve_steady_states(y, p)
        .unwrap()
        .into_iter()
        .min_by(|a, b| (a.intensity - x).abs().total_cmp(&(b.intensity - x).abs()))
        .unwrap()
}

fn identity_deviation(q: &QuadratureSpectrum) -> f64 {
    (q.v[0][0] - 1.0)
        .abs()
        .max((q.v[1][1] - 1.0).abs())
        .max(q.v[0][1].abs())
}

#[test]
fn nominal_regime_squeezing_before_losses() {
    let p = params(220.0, -20.0, -8.0);
    let mut best = f64::INFINITY;
    // Drive just below the release threshold, cooperativity swept through resonance.
    let y = 0.95
        * coldsqueeze_core::experiment::release_threshold(220.0, &p)
            .unwrap()
            .0;
    for i in 0..400 {
        let q = ModelParams {
            c: 60.0 + 0.2 * i as f64,
            ..p.clone()
        };
        let ss = &solve_steady_states(y, &q).unwrap()[0];
        best = best.min(spectrum_at(ss, &q, 5e6).unwrap().s_min);
    }
    assert!((0.4..=0.65).contains(&best), "S_min = {best}");
}

#[test]
fn high_frequency_rolloff() {
    // |V − I| ≤ 10 (Λ/Ω)² for Ω ≥ 20Λ, Λ the largest system rate in units of κ.
    for (c, delta, theta, x) in [
        (50.0, -5.0, 1.0, 3.0),
        (220.0, -20.0, -2.0, 100.0),
        (10.0, 0.0, 0.0, 2.0),
        (5.0, 0.5, 0.3, 0.5),
    ] {
        let p = params(c, delta, theta);
        let fs = build_fluctuation_system(&state_at(x, &p), &p).unwrap();
        let scale = fs
            .eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(1.0, f64::max);
        for k in [20.0, 50.0, 200.0] {
            let q = output_spectrum(&fs, k * scale * p.kappa_hz).unwrap();
            assert!(
                identity_deviation(&q) <= 10.0 / (k * k),
                "Ω={k}Λ dev={}",
                identity_deviation(&q)
            );
        }
    }
}

#[test]
fn noise_diverges_approaching_turning_point() {
    let p = params(10.0, 0.0, 0.0);
    let tp = turning_points(&p, p.default_x_max());
    assert!(tp.bistable);
    // Lower branch ends at the first turning point (local maximum of Y).
    let y_turn = state_equation(tp.points[0], &p).unwrap();
    let mut prev = 0.0;
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let ss = solve_steady_states(y_turn * (1.0 - eps), &p)
            .unwrap()
            .remove(0);
        assert_eq!(ss.branch, Branch::Lower);
        let s_max = spectrum_at(&ss, &p, 0.0).unwrap().s_max;
        assert!(s_max > prev, "ε={eps}: {s_max} after {prev}");
        prev = s_max;
    }
    assert!(prev > 100.0);
}

#[test]
fn gaussian_layout_spectra_are_physical() {
    let p = ModelParams {
        transverse: Transverse::GaussianBins(8),
        ..params(100.0, -20.0, -4.0)
    };
    let ss = state_at(20.0, &p);
    let fs = build_fluctuation_system(&ss, &p).unwrap();
    assert_eq!(fs.dim(), 2 + 3 * 8);
    let q = output_spectrum(&fs, 5e6).unwrap();
    assert!(q.s_min >= 0.0 && q.s_min * q.s_max >= 1.0 - 1e-9);
}

#[test]
fn weak_drive_agrees_with_master_equation() {
    let p = ModelParams {
        n_atoms: 1.0,
        ..params(0.2, 0.0, 0.0)
    };
    let ss = state_at(0.05, &p);
    let eps = drive_amplitude(ss.drive, &p).unwrap();
    let grid = [0.0, 1.5 * p.kappa_hz];
    let me = me_oracle_spectrum(&p, eps, &grid, 10).unwrap();
    let fs = build_fluctuation_system(&ss, &p).unwrap();
    for (q_me, &om) in me.iter().zip(&grid) {
        let q = output_spectrum(&fs, om).unwrap();
        for (a, b) in [(q.v[0][0], q_me.v[0][0]), (q.v[1][1], q_me.v[1][1])] {
            assert!((a / b - 1.0).abs() < 0.05, "Ω={om}: {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stable_states_respect_uncertainty_product(
        c in 0.0f64..300.0,
        delta in -30.0f64..30.0,
        theta in -10.0f64..10.0,
        lx in -3.0f64..3.0,
        omega in 0.0f64..5.0,
    ) {
        let p = params(c, delta, theta);
        let ss = state_at(10f64.powf(lx), &p);
        let fs = build_fluctuation_system(&ss, &p).unwrap();
        prop_assume!(ss.stable && fs.max_growth_rate() < 0.0);
        let q = output_spectrum(&fs, omega * p.kappa_hz).unwrap();
        prop_assert!(q.s_min >= -1e-9);
        prop_assert!(q.s_min * q.s_max >= 1.0 - 1e-9, "{q:?}");
        prop_assert!(q.s_min <= q.s_max);
    }

    #[test]
    fn vacuum_passivity(
        c in 0.0f64..500.0,
        delta in -30.0f64..30.0,
        theta in -10.0f64..10.0,
        lx in -9.0f64..-6.0,
        omega in 0.0f64..10.0,
    ) {
        let p = params(c, delta, theta);
        let ss = state_at(10f64.powf(lx), &p);
        let q = spectrum_at(&ss, &p, omega * p.kappa_hz).unwrap();
        prop_assert!(identity_deviation(&q) <= 1e-6);
    }

    #[test]
    fn atom_number_drops_out(
        c in 1.0f64..300.0,
        delta in -30.0f64..30.0,
        lx in -2.0f64..2.0,
        log_n in 0.0f64..9.0,
    ) {
        let p = params(c, delta, 0.0);
        let q = ModelParams { n_atoms: 10f64.powf(log_n), ..p.clone() };
        let ss = state_at(10f64.powf(lx), &p);
        let a = spectrum_at(&ss, &p, 3e6).unwrap();
        let b = spectrum_at(&ss, &q, 3e6).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((a.v[i][j] - b.v[i][j]).abs() <= 1e-6 * a.v[i][j].abs().max(1.0));
            }
        }
    }
}
