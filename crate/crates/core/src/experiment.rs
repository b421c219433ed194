// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! Synthetic noise traces for a released cloud and for a piezo cavity sweep.
//!
//! Each sample follows the steady state quasi-statically, evaluates the output
//! noise at the analysis frequency, mixes in detection losses, reads the quadrature
//! selected by the scanned local-oscillator phase and passes it through the spectrum
//! analyzer: electronic floor, multiplicative statistical noise, single-pole video
//! filter, then shot-noise calibration against a blocked-cavity record.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::cloud::{cooperativity_decay, CloudParams};
use crate::error::{Error, Result};
use crate::model::{
    solve_with_turning, turning_points_of, Branch, Medium, ModelParams, SteadyState,
};
use crate::noise::{build_fluctuation_system, output_spectrum, DetectionChain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    FreeRelease,
    PiezoSweep,
}

impl ScanMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanMode::FreeRelease => "release",
            ScanMode::PiezoSweep => "piezo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub mode: ScanMode,
    pub duration_s: f64,
    pub dt_s: f64,
    /// Drive intensity in saturation units. When absent, a free-release scan drives
    /// at `threshold_fraction` of its bistability threshold.
    pub drive_y: Option<f64>,
    pub threshold_fraction: f64,
    /// Cavity detuning at t = 0, units of κ.
    pub theta0: f64,
    /// Piezo sweep rate, κ per second.
    pub theta_rate: f64,
    pub lo_freq_hz: f64,
    pub lo_phase0: f64,
    pub omega_hz: f64,
    /// Relative rms of the analyzer noise.
    pub rel_noise: f64,
    pub vbw_hz: f64,
    /// Electronic noise power as a fraction of shot noise.
    pub elec_floor: f64,
    pub eta: f64,
    pub seed: u64,
}

impl ScanConfig {
    pub fn release() -> Self {
        ScanConfig {
            mode: ScanMode::FreeRelease,
            duration_s: 30e-3,
            dt_s: 2e-6,
            drive_y: None,
            threshold_fraction: 0.95,
            theta0: -8.0,
            theta_rate: 0.0,
            lo_freq_hz: 1e3,
            lo_phase0: 0.0,
            omega_hz: 5e6,
            rel_noise: 0.10,
            vbw_hz: 10e3,
            elec_floor: 0.1,
            eta: 0.9,
            seed: 1,
        }
    }

    pub fn piezo() -> Self {
        ScanConfig {
            mode: ScanMode::PiezoSweep,
            duration_s: 20e-3,
            theta0: -8.0,
            theta_rate: 600.0,
            ..ScanConfig::release()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        positive("duration_s", self.duration_s)?;
        positive("dt_s", self.dt_s)?;
        positive("lo_freq_hz", self.lo_freq_hz)?;
        positive("vbw_hz", self.vbw_hz)?;
        positive("threshold_fraction", self.threshold_fraction)?;
        if self.dt_s > self.duration_s {
            return Err(Error::param("dt_s", "must not exceed duration_s"));
        }
        if self.duration_s / self.dt_s > 1e7 {
            return Err(Error::param("dt_s", "more than 1e7 samples requested"));
        }
        if !(self.omega_hz >= 0.0 && self.omega_hz.is_finite()) {
            return Err(Error::param("omega_hz", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.rel_noise) {
            return Err(Error::param("rel_noise", "must lie in [0, 1)"));
        }
        if self.vbw_hz >= 0.5 / self.dt_s {
            return Err(Error::param(
                "vbw_hz",
                format!("must be below the Nyquist rate {} Hz", 0.5 / self.dt_s),
            ));
        }
        if !(self.elec_floor >= 0.0 && self.elec_floor.is_finite()) {
            return Err(Error::param("elec_floor", "must be >= 0"));
        }
        DetectionChain {
            eta: self.eta,
            ..DetectionChain::default()
        }
        .validate()?;
        if let Some(y) = self.drive_y {
            if !(y >= 0.0 && y.is_finite()) {
                return Err(Error::param("drive_y", format!("must be >= 0, got {y}")));
            }
        }
        if !(self.theta0.is_finite() && self.lo_phase0.is_finite()) {
            return Err(Error::param("theta0", "must be finite"));
        }
        if self.mode == ScanMode::PiezoSweep {
            if self.drive_y.is_none() {
                return Err(Error::param("drive_y", "required for a piezo sweep"));
            }
            if !(self.theta_rate.is_finite() && self.theta_rate != 0.0) {
                return Err(Error::param("theta_rate", "must be finite and nonzero"));
            }
        }
        Ok(())
    }

    fn sample_count(&self) -> usize {
        (self.duration_s / self.dt_s + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t_s: f64,
    pub c: f64,
    /// Cavity detuning set by the scan (κ).
    pub theta: f64,
    /// Detuning seen by the field including the atomic phase shift (κ).
    pub theta_eff: f64,
    /// Intracavity intensity.
    pub x: f64,
    pub branch: Branch,
    pub lo_phase: f64,
    /// Noise of the selected quadrature after detection losses, before the analyzer.
    pub s_true: f64,
    /// Calibrated, filtered analyzer output.
    pub s_meas: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Calibrated, filtered blocked-cavity record.
    pub shot_ref: f64,
}

/// Discontinuity of the tracked state between samples `index − 1` and `index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub index: usize,
    pub theta_from: f64,
    pub theta_to: f64,
    pub x_from: f64,
    pub x_to: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub mode: ScanMode,
    pub drive_y: f64,
    pub samples: Vec<TraceSample>,
    pub jumps: Vec<Jump>,
    pub warnings: Vec<String>,
}

impl Trace {
    /// Index of the intensity maximum.
    pub fn peak_index(&self) -> usize {
        self.samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.x.total_cmp(&b.1.x))
            .map_or(0, |(i, _)| i)
    }
}

/// LO phase at time `t`.
pub fn lo_phase(t: f64, sc: &ScanConfig) -> f64 {
    sc.lo_phase0 + 2.0 * PI * sc.lo_freq_hz * t
}

/// Single-pole smoothing factor for step `dt`.
pub fn video_alpha(vbw_hz: f64, dt_s: f64) -> f64 {
    1.0 - (-2.0 * PI * vbw_hz * dt_s).exp()
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multiplicative analyzer noise `(1 + rel_noise·ξ)` followed by the video filter.
/// The filter starts settled on the first noisy sample.
pub fn analyzer_chain(s_true: &[f64], sc: &ScanConfig, seed: u64) -> Result<Vec<f64>> {
    if sc.vbw_hz >= 0.5 / sc.dt_s || !(sc.vbw_hz > 0.0) {
        return Err(Error::param(
            "vbw_hz",
            "video bandwidth must lie in (0, 1/(2 dt))",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(filter_noisy(s_true, sc, &mut rng))
}

fn filter_noisy(s: &[f64], sc: &ScanConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let alpha = video_alpha(sc.vbw_hz, sc.dt_s);
    let mut out = Vec::with_capacity(s.len());
    let mut y = f64::NAN;
    for &v in s {
        let xi: f64 = StandardNormal.sample(rng);
        let noisy = v * (1.0 + sc.rel_noise * xi);
        y = if y.is_nan() {
            noisy
        } else {
            y + alpha * (noisy - y)
        };
        out.push(y);
    }
    out
}

/// Shot-noise normalization with electronic-noise subtraction:
/// `(P − ⟨P_elec⟩) / (⟨P_shot⟩ − ⟨P_elec⟩)`.
pub fn calibrate_and_correct(raw: &[f64], shot_raw: &[f64], elec: &[f64]) -> Result<Vec<f64>> {
    let mean = |v: &[f64]| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let (shot, el) = (mean(shot_raw), mean(elec));
    let den = shot - el;
    if !(den > 0.0) {
        return Err(Error::Domain(format!(
            "shot-noise level {shot} does not exceed electronic noise {el}"
        )));
    }
    Ok(raw.iter().map(|p| (p - el) / den).collect())
}

/// Lowest drive at which a free-release scan from `c_max` down to 0 passes through
/// bistability: the minimum over C of the lower turning-point ordinate. Returns
/// `(Y, C)`, or `None` if no C in `(0, c_max]` is bistable.
pub fn release_threshold(c_max: f64, p: &ModelParams) -> Option<(f64, f64)> {
    let ordinate = |c: f64| {
        let q = ModelParams { c, ..p.clone() };
        let m = Medium::new(&q);
        let tp = turning_points_of(&m, q.default_x_max());
        tp.bistable.then(|| m.drive(tp.points[1]).0)
    };
    let n = 400;
    let mut best: Option<(f64, f64, usize)> = None;
    for i in 1..=n {
        let c = c_max * i as f64 / n as f64;
        if let Some(y) = ordinate(c) {
            if best.is_none_or(|b| y < b.0) {
                best = Some((y, c, i));
            }
        }
    }
    let (mut y_best, mut c_best, i) = best?;
    // Golden-section refinement inside the neighbouring grid cells.
    let step = c_max / n as f64;
    let (mut lo, mut hi) = ((i as f64 - 1.0) * step, ((i + 1) as f64 * step).min(c_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |c: f64| ordinate(c).unwrap_or(f64::INFINITY);
    for _ in 0..60 {
        let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let c_mid = 0.5 * (lo + hi);
    let y_mid = f(c_mid);
    if y_mid < y_best {
        y_best = y_mid;
        c_best = c_mid;
    }
    Some((y_best, c_best))
}

/// Kind of hysteresis edge: which stable branch ends there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    LowerEnds,
    UpperEnds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisEdge {
    pub theta: f64,
    pub kind: EdgeKind,
}

/// Cavity detunings in `[theta_lo, theta_hi]` at which one stable branch ends for
/// drive `y`: the lower branch where `Y` crosses the ordinate of the first turning
/// point, the upper branch where it crosses the second. Located on a grid of
/// `n` steps, reported at cell midpoints.
pub fn hysteresis_edges(
    p: &ModelParams,
    y: f64,
    theta_lo: f64,
    theta_hi: f64,
    n: usize,
) -> Vec<HysteresisEdge> {
    let ordinates = |theta: f64| {
        let q = ModelParams { theta, ..p.clone() };
        let m = Medium::new(&q);
        let tp = turning_points_of(&m, y.max(q.default_x_max()));
        tp.bistable
            .then(|| (m.drive(tp.points[0]).0 - y, m.drive(tp.points[1]).0 - y))
    };
    let thetas: Vec<f64> = (0..=n)
        .map(|i| theta_lo + (theta_hi - theta_lo) * i as f64 / n as f64)
        .collect();
    let vals: Vec<_> = thetas.iter().map(|&t| ordinates(t)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        let mid = 0.5 * (thetas[i] + thetas[i + 1]);
        match (vals[i], vals[i + 1]) {
            (Some(a), Some(b)) => {
                if a.0 * b.0 < 0.0 {
                    edges.push(HysteresisEdge {
                        theta: mid,
                        kind: EdgeKind::LowerEnds,
                    });
                }
                if a.1 * b.1 < 0.0 {
                    edges.push(HysteresisEdge {
                        theta: mid,
                        kind: EdgeKind::UpperEnds,
                    });
                }
            }
            // Bistability appears or disappears with the drive inside the fold.
            (Some(a), None) | (None, Some(a)) if a.0 > 0.0 && a.1 < 0.0 => {
                edges.push(HysteresisEdge {
                    theta: mid,
                    kind: EdgeKind::LowerEnds,
                });
            }
            _ => {}
        }
    }
    edges
}

/// Picks the stable root closest in log-intensity to `prev`, or the lowest stable
/// root when starting.
fn track(roots: &[SteadyState], prev: Option<f64>) -> Option<&SteadyState> {
    let stable = roots.iter().filter(|s| s.stable);
    match prev {
        None => stable.min_by(|a, b| a.intensity.total_cmp(&b.intensity)),
        Some(xp) => {
            let dist = |s: &SteadyState| (s.intensity.max(1e-300) / xp.max(1e-300)).ln().abs();
            stable.min_by(|a, b| dist(a).total_cmp(&dist(b)))
        }
    }
}

struct Physics {
    c: f64,
    theta: f64,
    theta_eff: f64,
    x: f64,
    branch: Branch,
    v: [[f64; 2]; 2],
    s_min: f64,
    s_max: f64,
}

fn run_scan(
    sc: &ScanConfig,
    p: &ModelParams,
    y: f64,
    schedule: impl Fn(f64) -> (f64, f64),
) -> Result<Trace> {
    let n = sc.sample_count();
    let chain = DetectionChain {
        eta: sc.eta,
        ..DetectionChain::default()
    };
    let mut physics = Vec::with_capacity(n);
    let mut jumps = Vec::new();
    let mut prev: Option<(f64, Branch, f64)> = None;
    let mut prev_tps: Vec<f64> = Vec::new();
    for k in 0..n {
        let t = k as f64 * sc.dt_s;
        let (c, theta) = schedule(t);
        let q = ModelParams {
            c,
            theta,
            ..p.clone()
        };
        let medium = Medium::new(&q);
        let (roots, tps) = solve_with_turning(&medium, y, q.delta)?;
        let ss = track(&roots, prev.map(|v| v.0))
            .ok_or_else(|| {
                Error::Solver(format!("no stable steady state at t={t}, C={c}, θ={theta}"))
            })?
            .clone();
        if let Some((x_prev, _, theta_prev)) = prev {
            let (a, b) = (x_prev.min(ss.intensity), x_prev.max(ss.intensity));
            if prev_tps.len() == 2 && prev_tps.iter().all(|&tp| a < tp && tp < b) {
                jumps.push(Jump {
                    index: k,
                    theta_from: theta_prev,
                    theta_to: theta,
                    x_from: x_prev,
                    x_to: ss.intensity,
                });
            }
        }
        prev_tps = if tps.bistable { tps.points } else { Vec::new() };

        let fs = build_fluctuation_system(&ss, &q)?;
        let spec = chain.apply(&output_spectrum(&fs, sc.omega_hz)?);
        let theta_eff = medium.transfer(ss.intensity).im;
        prev = Some((ss.intensity, ss.branch, theta));
        physics.push(Physics {
            c,
            theta,
            theta_eff,
            x: ss.intensity,
            branch: ss.branch,
            v: spec.v,
            s_min: spec.s_min,
            s_max: spec.s_max,
        });
    }

    let lo: Vec<f64> = (0..n).map(|k| lo_phase(k as f64 * sc.dt_s, sc)).collect();
    let s_true: Vec<f64> = physics
        .iter()
        .zip(&lo)
        .map(|(ph, &phi)| {
            let (s, c) = phi.sin_cos();
            c * c * ph.v[0][0] + s * s * ph.v[1][1] + 2.0 * s * c * ph.v[0][1]
        })
        .collect();
    let e = sc.elec_floor;
    let raw_in: Vec<f64> = s_true.iter().map(|s| s + e).collect();
    let raw = filter_noisy(&raw_in, sc, &mut rng_stream(sc.seed, 0));
    let shot = filter_noisy(&vec![1.0 + e; n], sc, &mut rng_stream(sc.seed, 1));
    let elec = if e > 0.0 {
        filter_noisy(&vec![e; n], sc, &mut rng_stream(sc.seed, 2))
    } else {
        vec![0.0; n]
    };
    let s_meas = calibrate_and_correct(&raw, &shot, &elec)?;
    let shot_ref = calibrate_and_correct(&shot, &shot, &elec)?;

    let samples = physics
        .iter()
        .enumerate()
        .map(|(k, ph)| TraceSample {
            t_s: k as f64 * sc.dt_s,
            c: ph.c,
            theta: ph.theta,
            theta_eff: ph.theta_eff,
            x: ph.x,
            branch: ph.branch,
            lo_phase: lo[k],
            s_true: s_true[k],
            s_meas: s_meas[k],
            s_min: ph.s_min,
            s_max: ph.s_max,
            shot_ref: shot_ref[k],
        })
        .collect();
    Ok(Trace {
        mode: sc.mode,
        drive_y: y,
        samples,
        jumps,
        warnings: Vec::new(),
    })
}

/// Drive used by a free-release scan: the explicit value or a fraction of the
/// release threshold.
pub fn release_drive(sc: &ScanConfig, cp: &CloudParams, p: &ModelParams) -> Result<f64> {
    if let Some(y) = sc.drive_y {
        return Ok(y);
    }
    let q = ModelParams {
        theta: sc.theta0,
        ..p.clone()
    };
    release_threshold(cp.c0, &q)
        .map(|(y, _)| sc.threshold_fraction * y)
        .ok_or_else(|| {
            Error::param(
                "drive_y",
                "no bistability during the release; give the drive explicitly",
            )
        })
}

/// Cavity scanned by the decaying atomic phase shift of a released cloud.
pub fn free_release_scan(sc: &ScanConfig, cp: &CloudParams, p: &ModelParams) -> Result<Trace> {
    sc.validate()?;
    cp.validate()?;
    p.validate()?;
    let y = release_drive(sc, cp, p)?;
    let mut trace = run_scan(sc, p, y, |t| (cooperativity_decay(t, cp), sc.theta0))?;
    let peak = trace.peak_index();
    if peak == 0 || peak + 1 == trace.samples.len() {
        trace
            .warnings
            .push("no resonance crossing inside the scan window".into());
    }
    if let Some(first) = trace.samples.first() {
        if first.theta_eff.abs() < 1.0 {
            trace.warnings.push(format!(
                "cavity starts within a linewidth of resonance (θ_eff = {:.3})",
                first.theta_eff
            ));
        }
    }
    Ok(trace)
}

/// Cavity length swept at fixed cooperativity `p.c`.
pub fn piezo_scan(sc: &ScanConfig, p: &ModelParams) -> Result<Trace> {
    sc.validate()?;
    p.validate()?;
    let y = sc.drive_y.expect("validated");
    let mut trace = run_scan(sc, p, y, |t| (p.c, sc.theta0 + sc.theta_rate * t))?;
    let peak = trace.peak_index();
    if peak == 0 || peak + 1 == trace.samples.len() {
        trace
            .warnings
            .push("no resonance crossing inside the sweep".into());
    }
    Ok(trace)
}
