// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use coldsqueeze_core::cloud::*;
use coldsqueeze_core::config::RunConfig;
use coldsqueeze_core::experiment::*;
use coldsqueeze_core::model::*;
use coldsqueeze_core::noise::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn times(n: usize, t_max: f64) -> Vec<f64> {
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

fn params(c: f64, delta: f64, theta: f64) -> ModelParams {
    ModelParams {
        c,
        delta,
        theta,
        ..ModelParams::default()
    }
}

fn decay_law_against_monte_carlo() -> Outcome {
    let cp = CloudParams::default();
    let run = mc_cooperativity(&cp, cp.sigma_r / 15.0, &times(31, 30e-3), 1_000_000, 2026).unwrap();
    let worst = run
        .points
        .iter()
        .map(|p| rel(p.c, cooperativity_decay(p.t_s, &cp)))
        .fold(0.0, f64::max);
    outcome(
        worst <= 0.03,
        format!("max relative deviation {worst:.4} (limit 0.03)"),
    )
}

fn fit_roundtrip() -> Outcome {
    let cp = CloudParams::default();
    let truth = [cp.c0, cp.tau_r(), cp.tau_g()];
    let ts = times(30, 30e-3);
    let exact: Vec<_> = ts
        .iter()
        .map(|&t| CooperativitySample {
            t_s: t,
            c: cooperativity_decay(t, &cp),
            sigma_c: None,
        })
        .collect();
    let rep = fit_cooperativity(&exact, cp.mass_kg, cp.g_grav).unwrap();
    let exact_err = [rep.c0, rep.tau_r, rep.tau_g]
        .iter()
        .zip(truth)
        .map(|(a, b)| rel(*a, b))
        .fold(0.0, f64::max);

    let mut fits = [Vec::new(), Vec::new(), Vec::new()];
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<_> = ts
            .iter()
            .map(|&t| {
                let xi: f64 = StandardNormal.sample(&mut rng);
                let c = cooperativity_decay(t, &cp) * (1.0 + 0.05 * xi);
                CooperativitySample {
                    t_s: t,
                    c,
                    sigma_c: Some(0.05 * c),
                }
            })
            .collect();
        let r = fit_cooperativity(&noisy, cp.mass_kg, cp.g_grav).unwrap();
        fits[0].push(r.c0);
        fits[1].push(r.tau_r);
        fits[2].push(r.tau_g);
    }
    let med_err = fits
        .into_iter()
        .zip(truth)
        .map(|(v, t)| rel(median(v), t))
        .fold(0.0, f64::max);
    outcome(
        exact_err <= 1e-6 && med_err <= 0.10,
        format!("noiseless max error {exact_err:.2e} (limit 1e-6); 5% noise median error {med_err:.4} (limit 0.10)"),
    )
}

fn absorptive_critical_point() -> Outcome {
    let p = params(4.0, 0.0, 0.0);
    let tp = turning_points(&p, p.default_x_max());
    let Some(&x) = tp.points.first() else {
        return outcome(false, "no turning point at C=4".into());
    };
    let y = state_equation(x, &p).unwrap();
    let unfolds = turning_points(&params(4.0 + 1e-8, 0.0, 0.0), 1e3).bistable
        && !turning_points(&params(3.99, 0.0, 0.0), 1e3).bistable;
    outcome(
        tp.points.len() == 1
            && !tp.bistable
            && (x - 3.0).abs() <= 1e-6
            && (y - 27.0).abs() <= 1e-6
            && unfolds,
        format!("degenerate point X={x:.9}, Y={y:.9}; bistable just above C=4 only: {unfolds}"),
    )
}

fn gaussian_bins_match_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..=12 {
        let delta = -30.0 + 5.0 * k as f64;
        let p = ModelParams {
            transverse: Transverse::GaussianBins(256),
            ..params(220.0, delta, 0.0)
        };
        for i in 0..=60 {
            let x = 1e-3 * 10f64.powf(i as f64 / 10.0);
            let a = state_equation(x, &p).unwrap();
            let b = state_equation_gaussian_closed_form(x, &p).unwrap();
            worst = worst.max(rel(a, b));
        }
    }
    outcome(
        worst <= 1e-3,
        format!("max relative difference {worst:.2e} over X in [1e-3, 1e3], Δ in [-30, 30]"),
    )
}

fn state_at(x: f64, p: &ModelParams) -> SteadyState {
    let y = state_equation(x, p).unwrap();
    solve_steady_states(y, p)
        .unwrap()
        .into_iter()
        .min_by(|a, b| (a.intensity - x).abs().total_cmp(&(b.intensity - x).abs()))
        .unwrap()
}

fn vacuum_passivity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for c in [0.0, 0.5, 1.0, 5.0, 20.0, 100.0, 220.0, 500.0] {
        for delta in [-30.0, -20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 30.0] {
            for theta in [-10.0, -2.0, 0.0, 2.0, 10.0] {
                for x in [1e-9, 1e-7, 1e-6] {
                    let p = params(c, delta, theta);
                    let fs = build_fluctuation_system(&state_at(x, &p), &p).unwrap();
                    for k in 0..=10 {
                        let q = output_spectrum(&fs, k as f64 * p.kappa_hz).unwrap();
                        let dev = (q.v[0][0] - 1.0)
                            .abs()
                            .max((q.v[1][1] - 1.0).abs())
                            .max(q.v[0][1].abs());
                        worst = worst.max(dev);
                        count += 1;
                    }
                }
            }
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max |V - I| {worst:.3e} over {count} points (limit 1e-6)"),
    )
}

fn uncertainty_product() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut accepted, mut skipped, mut worst) = (0, 0, f64::INFINITY);
    while accepted < 1000 {
        let p = params(
            rng.random_range(0.0..300.0),
            rng.random_range(-30.0..30.0),
            rng.random_range(-10.0..10.0),
        );
        let ss = state_at(10f64.powf(rng.random_range(-3.0..3.0)), &p);
        let fs = build_fluctuation_system(&ss, &p).unwrap();
        if !ss.stable || fs.max_growth_rate() >= 0.0 {
            skipped += 1;
            continue;
        }
        let q = output_spectrum(&fs, rng.random_range(0.0..5.0) * p.kappa_hz).unwrap();
        worst = worst.min(q.s_min * q.s_max);
        accepted += 1;
    }
    outcome(
        worst >= 1.0 - 1e-9,
        format!("min S_min·S_max {worst:.12} over 1000 stable states ({skipped} unstable draws skipped)"),
    )
}

fn master_equation_oracle() -> Outcome {
    let p = ModelParams {
        n_atoms: 1.0,
        ..params(0.2, 0.0, 0.0)
    };
    let ss = state_at(0.05, &p);
    let eps = drive_amplitude(ss.drive, &p).unwrap();
    let grid: Vec<f64> = (0..=8).map(|i| 0.5 * i as f64 * p.kappa_hz).collect();
    let me = me_oracle_spectrum(&p, eps, &grid, 15).unwrap();
    let fs = build_fluctuation_system(&ss, &p).unwrap();
    let mut worst: f64 = 0.0;
    for (q_me, &om) in me.iter().zip(&grid) {
        let q = output_spectrum(&fs, om).unwrap();
        for (a, b) in [
            (q.v[0][0], q_me.v[0][0]),
            (q.v[1][1], q_me.v[1][1]),
            (q.s_min, q_me.s_min),
            (q.s_max, q_me.s_max),
        ] {
            worst = worst.max(rel(a, b));
        }
    }
    outcome(
        worst <= 0.05,
        format!("max relative difference {worst:.4} over Ω in [0, 4κ], cutoff 15"),
    )
}

fn release_scan_regime() -> Outcome {
    let cfg = RunConfig::default();
    let sc = cfg.scan_for(ScanMode::FreeRelease);
    let trace = free_release_scan(&sc, &cfg.cloud, &cfg.model).unwrap();
    let s = &trace.samples;
    let peak = trace.peak_index();
    let t_peak = s[peak].t_s;
    let min = s.iter().map(|x| x.s_meas).fold(f64::INFINITY, f64::min);
    let x_peak = s[peak].x;
    let excess = s
        .iter()
        .filter(|x| x.x >= 0.5 * x_peak)
        .map(|x| x.s_max)
        .fold(0.0, f64::max);
    let seg: Vec<f64> = s
        .iter()
        .filter(|x| x.t_s > t_peak && (x.s_min - 1.0).abs() < 5e-3 && (x.s_max - 1.0).abs() < 5e-3)
        .map(|x| x.s_meas)
        .collect();
    let mean = seg.iter().sum::<f64>() / seg.len().max(1) as f64;
    let sigma = sc.rel_noise
        * (1.0 + sc.elec_floor)
        * (1.0 / seg.len().max(1) as f64 + 1.0 / s.len() as f64).sqrt();
    let shot_ok = seg.len() > 1000 && (mean - 1.0).abs() <= 3.0 * sigma + 5e-3;
    outcome(
        (0.45..=0.70).contains(&min) && shot_ok && (5e-3..=15e-3).contains(&t_peak) && excess > 3.0,
        format!(
            "Y={:.2}, min noise {min:.3} (0.45-0.70), off-resonance mean {mean:.4} ± {sigma:.4} over {} samples, crossing at {:.2} ms (5-15), upper-side max {excess:.2} (> 3)",
            trace.drive_y,
            seg.len(),
            t_peak * 1e3
        ),
    )
}

fn jumps_match_edges(p: &ModelParams, y: f64, sc: &ScanConfig) -> (usize, usize, bool) {
    let up = piezo_scan(sc, p).unwrap();
    let theta_end = sc.theta0 + sc.theta_rate * sc.duration_s;
    let down = piezo_scan(
        &ScanConfig {
            theta0: theta_end,
            theta_rate: -sc.theta_rate,
            ..sc.clone()
        },
        p,
    )
    .unwrap();
    let step = sc.theta_rate.abs() * sc.dt_s;
    let n = ((theta_end - sc.theta0).abs() / step).ceil() as usize;
    let edges = hysteresis_edges(p, y, sc.theta0.min(theta_end), sc.theta0.max(theta_end), n);
    let jumps = up.jumps.len() + down.jumps.len();
    let matched = up.jumps.iter().chain(&down.jumps).all(|j| {
        let (a, b) = (j.theta_from.min(j.theta_to), j.theta_from.max(j.theta_to));
        edges
            .iter()
            .any(|e| e.theta >= a - step && e.theta <= b + step)
    });
    // Every edge the sweep passes must produce a jump in one direction.
    (jumps, edges.len(), matched && jumps == edges.len())
}

fn piezo_scan_regime() -> Outcome {
    let cfg = RunConfig::build(&{
        let mut raw = coldsqueeze_core::config::RawConfig::default();
        raw.set_override("model.C=20").unwrap();
        raw.set_override("scan.power_w=16e-6").unwrap();
        raw
    })
    .unwrap();
    let sc = cfg.scan_for(ScanMode::PiezoSweep);
    let y = sc.drive_y.unwrap();
    let trace = piezo_scan(&sc, &cfg.model).unwrap();
    let best = trace
        .samples
        .iter()
        .map(|s| s.s_min)
        .fold(f64::INFINITY, f64::min);
    let (jumps, edges, consistent) = jumps_match_edges(&cfg.model, y, &sc);

    // A bistable sweep makes the jump check non-vacuous.
    let strong = ModelParams {
        c: 60.0,
        ..cfg.model.clone()
    };
    let sc60 = ScanConfig {
        drive_y: Some(400.0),
        ..sc.clone()
    };
    let (jumps60, edges60, consistent60) = jumps_match_edges(&strong, 400.0, &sc60);
    outcome(
        (0.70..=0.90).contains(&best) && consistent && consistent60 && jumps60 == 2,
        format!(
            "C=20, Y={y:.1}: best S_min {best:.4} (0.70-0.90), {jumps} jumps / {edges} edges; C=60, Y=400: {jumps60} jumps / {edges60} edges, all within one θ step: {consistent60}"
        ),
    )
}

fn run_cli(dir: &Path, tag: &str, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = dir.join(format!("{tag}.csv"));
    let status = Command::new(env!("CARGO_BIN_EXE_coldsqueeze"))
        .args(args)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cp = CloudParams::default();
    let data = dir.path().join("decay.csv");
    let mut text = String::from("t_s,c\n");
    for t in times(20, 30e-3) {
        text.push_str(&format!(
            "{t:?},{:?}\n",
            cooperativity_decay(t, &cp) * (1.0 + 0.01 * (t * 1e4).sin())
        ));
    }
    std::fs::write(&data, text).unwrap();
    let data = data.to_str().unwrap().to_string();
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("steady", vec!["steady", "--scan.drive_Y=200"]),
        ("turning", vec!["turning", "--model.C=60"]),
        (
            "spectrum",
            vec!["spectrum", "--scan.drive_Y=200", "--scan.omega_points=21"],
        ),
        (
            "release",
            vec!["release", "--scan.duration_s=4e-3", "--scan.seed=9"],
        ),
        (
            "piezo",
            vec![
                "piezo",
                "--model.C=20",
                "--scan.power_w=16e-6",
                "--scan.duration_s=4e-3",
            ],
        ),
        ("fitc", vec!["fitc", &data]),
        (
            "mc-cloud",
            vec![
                "mc-cloud",
                "--cloud.mc_samples=100000",
                "--cloud.t_points=7",
            ],
        ),
        (
            "oracle",
            vec![
                "oracle",
                "--model.C=0.2",
                "--model.delta=0",
                "--scan.drive_Y=0.05",
                "--scan.omega_points=5",
            ],
        ),
    ];
    let mut failures = Vec::new();
    for (tag, args) in &cases {
        let a = run_cli(dir.path(), &format!("{tag}-a"), args);
        let b = run_cli(dir.path(), &format!("{tag}-b"), args);
        match (a, b) {
            (Ok(a), Ok(b)) if a == b && !a.is_empty() => {}
            (Ok(_), Ok(_)) => failures.push(format!("{tag}: outputs differ")),
            (Err(e), _) | (_, Err(e)) => failures.push(format!("{tag}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} subcommands byte-identical on rerun", cases.len())
        } else {
            failures.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "decay law vs Monte Carlo",
            decay_law_against_monte_carlo,
            Some(Duration::from_secs(10)),
        ),
        ("fit roundtrip", fit_roundtrip, Some(Duration::from_secs(5))),
        ("absorptive critical point", absorptive_critical_point, None),
        (
            "Gaussian bins vs closed form",
            gaussian_bins_match_closed_form,
            None,
        ),
        (
            "vacuum passivity",
            vacuum_passivity,
            Some(Duration::from_secs(30)),
        ),
        ("uncertainty product", uncertainty_product, None),
        (
            "master-equation oracle",
            master_equation_oracle,
            Some(Duration::from_secs(60)),
        ),
        (
            "free-release scan",
            release_scan_regime,
            Some(Duration::from_secs(60)),
        ),
        ("piezo scan", piezo_scan_regime, None),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        println!(
            "{} {:>2} {name}: {} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
