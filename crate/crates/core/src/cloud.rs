// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! Cooperativity of a released atom cloud that expands ballistically and falls
//! through a horizontal Gaussian probe beam.
//!
//! ```text
//! C(t) = C(0) · τr²/(τr² + t²) · exp(−t⁴ / (τg² (τr² + t²)))
//! σv = √(k_B T / m),  τr = σr / σv,  τg = 2√2 σv / g
//! ```

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::constants::{CS133_MASS, G_STANDARD, K_B};
use crate::error::{Error, Result};

/// Initial cloud and species parameters. Timescales are derived on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudParams {
    /// Gaussian rms radius, m.
    pub sigma_r: f64,
    pub temp_k: f64,
    pub mass_kg: f64,
    /// Cooperativity at release.
    pub c0: f64,
    /// Gravitational acceleration, m/s².
    pub g_grav: f64,
}

impl Default for CloudParams {
    fn default() -> Self {
        CloudParams {
            sigma_r: 4e-3,
            temp_k: 5e-3,
            mass_kg: CS133_MASS,
            c0: 220.0,
            g_grav: G_STANDARD,
        }
    }
}

impl CloudParams {
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
        positive("sigma_r", self.sigma_r)?;
        positive("temp_k", self.temp_k)?;
        positive("mass_kg", self.mass_kg)?;
        if !(self.c0 >= 0.0 && self.c0.is_finite()) {
            return Err(Error::param("c0", format!("must be >= 0, got {}", self.c0)));
        }
        if !(self.g_grav >= 0.0 && self.g_grav.is_finite()) {
            return Err(Error::param(
                "g_grav",
                format!("must be >= 0, got {}", self.g_grav),
            ));
        }
        Ok(())
    }

    /// rms velocity per axis, m/s.
    pub fn sigma_v(&self) -> f64 {
        (K_B * self.temp_k / self.mass_kg).sqrt()
    }

    /// Expansion time, s.
    pub fn tau_r(&self) -> f64 {
        self.sigma_r / self.sigma_v()
    }

    /// Fall time, s; infinite without gravity.
    pub fn tau_g(&self) -> f64 {
        2.0 * std::f64::consts::SQRT_2 * self.sigma_v() / self.g_grav
    }

    /// Cloud parameters reproducing the given timescales.
    pub fn from_timescales(
        c0: f64,
        tau_r: f64,
        tau_g: f64,
        mass_kg: f64,
        g_grav: f64,
    ) -> Result<Self> {
        if !(tau_r > 0.0 && tau_g > 0.0 && tau_g.is_finite() && g_grav > 0.0) {
            return Err(Error::Domain(
                "timescale inversion needs finite positive tau_r, tau_g and g_grav".into(),
            ));
        }
        let sigma_v = tau_g * g_grav / (2.0 * std::f64::consts::SQRT_2);
        let cp = CloudParams {
            sigma_r: tau_r * sigma_v,
            temp_k: mass_kg * sigma_v * sigma_v / K_B,
            mass_kg,
            c0,
            g_grav,
        };
        cp.validate()?;
        Ok(cp)
    }
}

/// One measured point of the cooperativity decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooperativitySample {
    pub t_s: f64,
    pub c: f64,
    pub sigma_c: Option<f64>,
}

/// `C(t)/C(0)` for timescales `tau_r`, `tau_g` (the latter may be infinite).
pub fn decay_shape(t: f64, tau_r: f64, tau_g: f64) -> f64 {
    let t2 = t * t;
    let den = tau_r * tau_r + t2;
    let fall = if tau_g.is_finite() {
        t2 * t2 / (tau_g * tau_g * den)
    } else {
        0.0
    };
    tau_r * tau_r / den * (-fall).exp()
}

/// Cooperativity `t` seconds after release.
pub fn cooperativity_decay(t: f64, cp: &CloudParams) -> f64 {
    cp.c0 * decay_shape(t.max(0.0), cp.tau_r(), cp.tau_g())
}

/// Monte Carlo estimator of the beam-weighted column density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum McEstimator {
    /// Samples velocities only and integrates the Gaussian initial positions
    /// analytically against the beam profile. Unbiased with far lower variance for
    /// narrow beams.
    #[default]
    Conditional,
    /// Samples positions and velocities and evaluates the beam profile directly.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPoint {
    pub t_s: f64,
    pub c: f64,
    /// Standard error of `c`.
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub points: Vec<McPoint>,
    pub warnings: Vec<String>,
}

/// Samples per RNG stream. Fixed so results do not depend on the thread count.
const MC_BLOCK: usize = 1 << 14;
const MC_MIN_SAMPLES: usize = 10_000;

/// Ballistic Monte Carlo estimate of `C(t)` with the conditional estimator.
pub fn mc_cooperativity(
    cp: &CloudParams,
    waist: f64,
    times: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<McRun> {
    mc_cooperativity_with(cp, waist, times, n_samples, seed, McEstimator::Conditional)
}

/// Ballistic Monte Carlo estimate of `C(t)`.
///
/// Atoms start from an isotropic Gaussian of rms `sigma_r` with Maxwell velocities
/// and fall under gravity; each contributes `exp(−2ρ²/w²)`, `ρ` its distance from
/// the horizontal beam axis through the initial cloud centre. Block `b` of
/// `2^14` samples draws from ChaCha8 stream `b` of `seed`.
pub fn mc_cooperativity_with(
    cp: &CloudParams,
    waist: f64,
    times: &[f64],
    n_samples: usize,
    seed: u64,
    estimator: McEstimator,
) -> Result<McRun> {
    cp.validate()?;
    if !(waist > 0.0 && waist.is_finite()) {
        return Err(Error::param("waist", format!("must be > 0, got {waist}")));
    }
    if n_samples < MC_MIN_SAMPLES {
        return Err(Error::param(
            "n_samples",
            format!("must be >= {MC_MIN_SAMPLES}, got {n_samples}"),
        ));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::Domain(format!(
            "times must be finite and >= 0, got {t}"
        )));
    }
    let mut warnings = Vec::new();
    if waist > cp.sigma_r / 5.0 {
        warnings.push(format!(
            "waist {waist:.3e} m exceeds sigma_r/5; finite-waist corrections are not negligible"
        ));
    }

    let sigma_r = cp.sigma_r;
    let sigma_v = cp.sigma_v();
    let g = cp.g_grav;
    let w2 = waist * waist;
    let blocks = n_samples.div_ceil(MC_BLOCK);
    let nt = times.len();

    let partials: Vec<Vec<(f64, f64)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BLOCK.min(n_samples - b * MC_BLOCK);
            let mut acc = vec![(0.0, 0.0); nt];
            let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
            for _ in 0..count {
                let vy = sigma_v * normal();
                let vz = sigma_v * normal();
                let (y0, z0, spread, norm) = match estimator {
                    McEstimator::Conditional => (0.0, 0.0, w2 + 4.0 * sigma_r * sigma_r, 1.0),
                    McEstimator::Direct => (
                        sigma_r * normal(),
                        sigma_r * normal(),
                        w2,
                        1.0 + 4.0 * sigma_r * sigma_r / w2,
                    ),
                };
                for (k, &t) in times.iter().enumerate() {
                    let y = y0 + vy * t;
                    let z = z0 + vz * t - 0.5 * g * t * t;
                    let v = norm * (-2.0 * (y * y + z * z) / spread).exp();
                    acc[k].0 += v;
                    acc[k].1 += v * v;
                }
            }
            acc
        })
        .collect();

    let n = n_samples as f64;
    let points = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (s, s2) = partials
                .iter()
                .fold((0.0, 0.0), |(a, b), p| (a + p[k].0, b + p[k].1));
            let mean = s / n;
            let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
            McPoint {
                t_s: t,
                c: cp.c0 * mean,
                std_err: cp.c0 * (var / n).sqrt(),
            }
        })
        .collect();
    Ok(McRun { points, warnings })
}

/// Relative 1σ uncertainties of the fitted quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitUncertainty {
    pub c0: f64,
    pub tau_r: f64,
    pub tau_g: f64,
    pub sigma_r: f64,
    pub temp_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub c0: f64,
    pub tau_r: f64,
    pub tau_g: f64,
    /// Cloud radius and temperature implied by the timescales.
    pub cloud: CloudParams,
    /// RMS of the unweighted residuals.
    pub rms: f64,
    pub rel_err: FitUncertainty,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

struct Problem<'a> {
    t: &'a [f64],
    c: &'a [f64],
    w: Vec<f64>,
}

impl Problem<'_> {
    fn cost(&self, q: &Vector3<f64>) -> f64 {
        let (c0, tr, tg) = (q[0].exp(), q[1].exp(), q[2].exp());
        self.t
            .iter()
            .zip(self.c)
            .zip(&self.w)
            .map(|((&t, &c), &w)| {
                let r = c0 * decay_shape(t, tr, tg) - c;
                w * r * r
            })
            .sum()
    }

    /// Normal matrix `JᵀWJ` and gradient `JᵀWr` in log parameters.
    fn normal(&self, q: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
        let (c0, tr, tg) = (q[0].exp(), q[1].exp(), q[2].exp());
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((&t, &c), &w) in self.t.iter().zip(self.c).zip(&self.w) {
            let t2 = t * t;
            let den = tr * tr + t2;
            let f = c0 * decay_shape(t, tr, tg);
            let fall = t2 * t2 / (tg * tg * den);
            let j = Vector3::new(
                f,
                f * (2.0 * t2 / den + 2.0 * fall * tr * tr / den),
                f * 2.0 * fall,
            );
            jtj += w * j * j.transpose();
            jtr += w * (f - c) * j;
        }
        (jtj, jtr)
    }
}

const FIT_STARTS: usize = 8;

/// Damped Gauss–Newton (Levenberg–Marquardt) in log parameters, with `ln τr` and
/// `ln τg` clamped to `bounds`.
fn refine(
    prob: &Problem,
    mut q: Vector3<f64>,
    mut cost: f64,
    bounds: &[std::ops::RangeInclusive<f64>; 2],
) -> (f64, Vector3<f64>, usize) {
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < 500 {
        iterations += 1;
        let (jtj, jtr) = prob.normal(&q);
        let mut damped = jtj;
        for i in 0..3 {
            damped[(i, i)] = damped[(i, i)] * (1.0 + lambda) + 1e-30;
        }
        let Some(step) = damped.cholesky().map(|ch| ch.solve(&(-jtr))) else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
            continue;
        };
        let mut trial = q + step;
        for k in 0..2 {
            trial[k + 1] = trial[k + 1].clamp(*bounds[k].start(), *bounds[k].end());
        }
        let trial_cost = prob.cost(&trial);
        if trial_cost <= cost {
            let moved = (trial - q).amax();
            let gain = cost - trial_cost;
            q = trial;
            cost = trial_cost;
            lambda = (lambda / 10.0).max(1e-12);
            if moved < 1e-13 || gain <= 1e-30 * cost.max(1e-300) {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (cost, q, iterations)
}

fn fit_error(msg: impl Into<String>) -> Error {
    Error::Fit(msg.into())
}

fn logspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

/// Weighted least-squares fit of the decay law in log parameters: coarse grid over
/// `(τr, τg)` with `C(0)` solved in closed form, then damped Gauss–Newton.
pub fn fit_cooperativity(
    samples: &[CooperativitySample],
    mass_kg: f64,
    g_grav: f64,
) -> Result<FitReport> {
    if samples.len() < 4 {
        return Err(fit_error(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }
    if samples
        .iter()
        .any(|s| !(s.t_s >= 0.0 && s.t_s.is_finite() && s.c >= 0.0 && s.c.is_finite()))
    {
        return Err(fit_error("samples need finite t_s >= 0 and c >= 0"));
    }
    let with_sigma = samples.iter().filter(|s| s.sigma_c.is_some()).count();
    if with_sigma != 0 && with_sigma != samples.len() {
        return Err(fit_error("sigma_c must be given for all samples or none"));
    }
    if samples
        .iter()
        .any(|s| s.sigma_c.is_some_and(|e| !(e > 0.0)))
    {
        return Err(fit_error("sigma_c must be > 0"));
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].t_s.total_cmp(&samples[b].t_s));
    let t: Vec<f64> = order.iter().map(|&i| samples[i].t_s).collect();
    let c: Vec<f64> = order.iter().map(|&i| samples[i].c).collect();
    let w: Vec<f64> = order
        .iter()
        .map(|&i| samples[i].sigma_c.map_or(1.0, |e| 1.0 / (e * e)))
        .collect();

    let t_max = t[t.len() - 1];
    if !(t_max > 0.0) || t_max - t[0] <= 1e-9 * t_max {
        return Err(fit_error("all samples are at the same time"));
    }
    let half = c.len() / 2;
    let early = c[..half].iter().sum::<f64>() / half as f64;
    let late = c[c.len() - half..].iter().sum::<f64>() / half as f64;
    if !(early > 0.0) || late >= 0.95 * early {
        return Err(fit_error(format!(
            "data do not decay (early mean {early:.4}, late mean {late:.4})"
        )));
    }

    let prob = Problem { t: &t, c: &c, w };
    let bounds = [
        (1e-6 * t_max).ln()..=(1e6 * t_max).ln(),
        (1e-5 * t_max).ln()..=(1e8 * t_max).ln(),
    ];

    // Best C(0), τr for each τg column; the fall term flattens out at large τg, so
    // refinement starts from several columns rather than the single best point.
    let mut starts: Vec<(f64, Vector3<f64>)> = logspace(1e-2 * t_max, 1e4 * t_max, 61)
        .filter_map(|tg| {
            logspace(1e-3 * t_max, 1e3 * t_max, 121)
                .filter_map(|tr| {
                    let (mut num, mut den) = (0.0, 0.0);
                    for ((&ti, &ci), &wi) in t.iter().zip(&c).zip(&prob.w) {
                        let s = decay_shape(ti, tr, tg);
                        num += wi * ci * s;
                        den += wi * s * s;
                    }
                    (num > 0.0 && den > 0.0).then(|| {
                        let q = Vector3::new((num / den).ln(), tr.ln(), tg.ln());
                        (prob.cost(&q), q)
                    })
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
        })
        .collect();
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    starts.truncate(FIT_STARTS);
    let (cost, q, iterations) = starts
        .iter()
        .map(|&(cost, q)| refine(&prob, q, cost, &bounds))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| fit_error("no admissible starting point"))?;

    let mut warnings = Vec::new();
    for (k, name) in [(1, "tau_r"), (2, "tau_g")] {
        let b = &bounds[k - 1];
        if q[k] <= *b.start() + 1e-9 || q[k] >= *b.end() - 1e-9 {
            warnings.push(format!(
                "{name} reached its search bound; not resolved by the data"
            ));
        }
    }

    let (jtj, _) = prob.normal(&q);
    let cov = jtj.try_inverse().unwrap_or_else(|| {
        warnings.push("singular Jacobian; uncertainties undefined".into());
        Matrix3::from_element(f64::INFINITY)
    });
    let n = t.len() as f64;
    let scale = if with_sigma > 0 {
        1.0
    } else {
        cost / (n - 3.0).max(1.0)
    };
    let var = |v: f64| {
        if v.is_nan() {
            f64::INFINITY
        } else {
            (scale * v).max(0.0).sqrt()
        }
    };

    let (c0, tau_r, tau_g) = (q[0].exp(), q[1].exp(), q[2].exp());
    if ![c0, tau_r, tau_g].iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(fit_error("fit diverged"));
    }
    let rms = (t
        .iter()
        .zip(&c)
        .map(|(&ti, &ci)| (c0 * decay_shape(ti, tau_r, tau_g) - ci).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let cloud = CloudParams::from_timescales(c0, tau_r, tau_g, mass_kg, g_grav)
        .map_err(|e| fit_error(format!("cannot map timescales to a cloud: {e}")))?;
    Ok(FitReport {
        c0,
        tau_r,
        tau_g,
        cloud,
        rms,
        rel_err: FitUncertainty {
            c0: var(cov[(0, 0)]),
            tau_r: var(cov[(1, 1)]),
            tau_g: var(cov[(2, 2)]),
            sigma_r: var(cov[(1, 1)] + cov[(2, 2)] + 2.0 * cov[(1, 2)]),
            temp_k: var(4.0 * cov[(2, 2)]),
        },
        iterations,
        warnings,
    })
}
