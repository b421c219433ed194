// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! Atom–cavity parameterization and the bistable steady state.
//!
//! Intensities are in saturation units: the two-level saturation denominator of an
//! atom seeing mode amplitude `u` is `1 + Δ² + u²X`. The intracavity field obeys
//!
//! ```text
//! y = x [ (1 + iθ) + 2C (1 − iΔ) A(X) ],   A(X) = Σ_j w_j u_j² / (1 + Δ² + u_j² X)
//! ```
//!
//! so `Y = X [ (1 + 2C A)² + (θ − 2CΔ A)² ]`. A plane wave is the single bin
//! `u = w = 1`; a Gaussian beam over a transversely uniform cloud replaces the sum by
//! `∫₀¹ ds / (1 + Δ² + sX)` in `s = u²`, discretized here with Gauss–Legendre nodes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gauss::gauss_legendre_unit;

/// One transverse group of atoms: mode amplitude `u` and atom-number weight `w`
/// (fraction of `N`, measured in units of the mode area).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub u: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Transverse {
    PlaneWave,
    /// Gaussian beam sampled at `M` Gauss–Legendre nodes in `s = u²`.
    GaussianBins(usize),
    /// Explicit bin layout.
    Custom(Vec<Bin>),
}

impl Transverse {
    pub fn bins(&self) -> Vec<Bin> {
        match self {
            Transverse::PlaneWave => vec![Bin { u: 1.0, w: 1.0 }],
            Transverse::GaussianBins(m) => {
                let (s, lambda) = gauss_legendre_unit(*m);
                s.iter()
                    .zip(&lambda)
                    .map(|(&s, &l)| Bin {
                        u: s.sqrt(),
                        w: l / s,
                    })
                    .collect()
            }
            Transverse::Custom(bins) => bins.clone(),
        }
    }

    pub fn bin_count(&self) -> usize {
        match self {
            Transverse::PlaneWave => 1,
            Transverse::GaussianBins(m) => *m,
            Transverse::Custom(b) => b.len(),
        }
    }
}

/// Parameters of the atom–cavity system. Detunings are signed and measured as
/// `(ω_probe − ω_ref)` in units of the relevant half-linewidth.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Cooperativity `C`.
    pub c: f64,
    /// Atomic detuning Δ in units of γ.
    pub delta: f64,
    /// Cavity detuning θ in units of κ.
    pub theta: f64,
    /// Cavity field half-linewidth κ, Hz.
    pub kappa_hz: f64,
    /// Atomic dipole half-linewidth γ, Hz.
    pub gamma_hz: f64,
    /// γ∥/γ; 2 for a purely radiative two-level atom.
    pub gamma_par_ratio: f64,
    /// Effective atom number `N`.
    pub n_atoms: f64,
    /// Fraction of κ due to losses other than the input mirror (extra vacuum port).
    pub loss_fraction: f64,
    pub transverse: Transverse,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            c: 220.0,
            delta: -20.0,
            theta: 0.0,
            kappa_hz: 5.0e6,
            gamma_hz: 2.6e6,
            gamma_par_ratio: 2.0,
            n_atoms: 1.0e7,
            loss_fraction: 0.0,
            transverse: Transverse::PlaneWave,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = |name, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite, got {v}")))
            }
        };
        finite("c", self.c)?;
        finite("delta", self.delta)?;
        finite("theta", self.theta)?;
        if self.c < 0.0 {
            return Err(Error::param("c", format!("must be >= 0, got {}", self.c)));
        }
        if !(self.kappa_hz > 0.0) {
            return Err(Error::param("kappa_hz", "must be > 0"));
        }
        if !(self.gamma_hz > 0.0) {
            return Err(Error::param("gamma_hz", "must be > 0"));
        }
        // γ∥ > 2γ would need a negative dephasing rate.
        if !(self.gamma_par_ratio > 0.0 && self.gamma_par_ratio <= 2.0) {
            return Err(Error::param(
                "gamma_par_ratio",
                format!("must lie in (0, 2], got {}", self.gamma_par_ratio),
            ));
        }
        if !(self.n_atoms >= 1.0) {
            return Err(Error::param("n_atoms", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.loss_fraction) {
            return Err(Error::param("loss_fraction", "must lie in [0, 1)"));
        }
        match &self.transverse {
            Transverse::GaussianBins(0) => {
                return Err(Error::param("transverse", "bin count must be >= 1"))
            }
            Transverse::Custom(b) if b.is_empty() => {
                return Err(Error::param("transverse", "bin count must be >= 1"))
            }
            Transverse::Custom(b) if b.iter().any(|b| !(b.u > 0.0 && b.w > 0.0)) => {
                return Err(Error::param("transverse", "bin u and w must be > 0"))
            }
            _ => {}
        }
        Ok(())
    }

    /// κ/γ.
    pub fn kappa_over_gamma(&self) -> f64 {
        self.kappa_hz / self.gamma_hz
    }

    /// Default upper end of the turning-point search.
    pub fn default_x_max(&self) -> f64 {
        100.0 * (1.0 + self.delta * self.delta)
    }
}

/// Precomputed saturable response `A(X)` of the transverse layout.
#[derive(Debug, Clone)]
pub(crate) struct Medium {
    bins: Vec<Bin>,
    /// 1 + Δ²
    a: f64,
    c: f64,
    delta: f64,
    theta: f64,
}

/// `A`, `dA/dX`, `d²A/dX²` at one intensity.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Response {
    pub a: f64,
    pub da: f64,
    pub d2a: f64,
}

impl Medium {
    pub(crate) fn new(p: &ModelParams) -> Self {
        Medium {
            bins: p.transverse.bins(),
            a: 1.0 + p.delta * p.delta,
            c: p.c,
            delta: p.delta,
            theta: p.theta,
        }
    }

    pub(crate) fn response(&self, x: f64) -> Response {
        let mut r = Response {
            a: 0.0,
            da: 0.0,
            d2a: 0.0,
        };
        for b in &self.bins {
            let s = b.u * b.u;
            let inv = 1.0 / (self.a + s * x);
            let t = b.w * s * inv;
            r.a += t;
            r.da -= t * s * inv;
            r.d2a += 2.0 * t * s * s * inv * inv;
        }
        r
    }

    /// Complex factor `H` with `y = x H`.
    pub(crate) fn transfer(&self, x: f64) -> Complex64 {
        let a = self.response(x).a;
        Complex64::new(
            1.0 + 2.0 * self.c * a,
            self.theta - 2.0 * self.c * self.delta * a,
        )
    }

    /// `Y`, `dY/dX`, `d²Y/dX²`.
    pub(crate) fn drive(&self, x: f64) -> (f64, f64, f64) {
        let r = self.response(x);
        let c = self.c;
        let p = 1.0 + 2.0 * c * r.a;
        let q = self.theta - 2.0 * c * self.delta * r.a;
        let f = p * p + q * q;
        let k = p - q * self.delta;
        let df = 4.0 * c * r.da * k;
        let d2f = 4.0 * c * r.d2a * k + 8.0 * c * c * r.da * r.da * (1.0 + self.delta * self.delta);
        (x * f, f + x * df, 2.0 * df + x * d2f)
    }

    pub(crate) fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub(crate) fn sat(&self) -> f64 {
        self.a
    }
}

/// Drive intensity `Y` that sustains intracavity intensity `X`.
pub fn state_equation(x_int: f64, p: &ModelParams) -> Result<f64> {
    check_intensity(x_int)?;
    Ok(Medium::new(p).drive(x_int).0)
}

/// `dY/dX` of the state equation.
pub fn state_slope(x_int: f64, p: &ModelParams) -> Result<f64> {
    check_intensity(x_int)?;
    Ok(Medium::new(p).drive(x_int).1)
}

/// State equation for an infinitely finely resolved Gaussian beam, using
/// `∫₀¹ ds/(1+Δ²+sX) = ln(1 + X/(1+Δ²)) / X`. Ignores `p.transverse`.
pub fn state_equation_gaussian_closed_form(x_int: f64, p: &ModelParams) -> Result<f64> {
    check_intensity(x_int)?;
    let a = gaussian_response(x_int, 1.0 + p.delta * p.delta);
    let re = 1.0 + 2.0 * p.c * a;
    let im = p.theta - 2.0 * p.c * p.delta * a;
    Ok(x_int * (re * re + im * im))
}

fn gaussian_response(x: f64, sat: f64) -> f64 {
    let z = x / sat;
    if z < 1e-8 {
        (1.0 - z / 2.0 + z * z / 3.0) / sat
    } else {
        z.ln_1p() / x
    }
}

fn check_intensity(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::Domain(format!("intensity must be >= 0, got {x}")))
    } else {
        Ok(())
    }
}

/// Local extrema of `Y(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TurningPoints {
    /// Ascending `X` values where `dY/dX = 0`.
    pub points: Vec<f64>,
    pub bistable: bool,
}

impl TurningPoints {
    pub fn none() -> Self {
        TurningPoints {
            points: Vec::new(),
            bistable: false,
        }
    }
}

const TP_GRID: usize = 4000;
/// `|dY/dX| / (Y/X)` below which a touching minimum counts as a double point.
const DEGENERATE_TOL: f64 = 1e-9;

/// Locates the turning points of `Y(X)` on `(0, x_max]`.
///
/// Critical points of `dY/dX` are bracketed on a dense log grid and refined by
/// bisection on `d²Y/dX²`; between consecutive critical points `dY/dX` is monotone and
/// holds at most one sign change. A minimum of `dY/dX` that only touches zero is
/// reported as a single, non-bistable point.
pub fn turning_points(p: &ModelParams, x_max: f64) -> TurningPoints {
    let medium = Medium::new(p);
    turning_points_of(&medium, x_max)
}

pub(crate) fn turning_points_of(medium: &Medium, x_max: f64) -> TurningPoints {
    if medium.c == 0.0 || !(x_max > 0.0) {
        return TurningPoints::none();
    }
    let x_lo = (1e-6 * medium.sat()).min(1e-3 * x_max);
    let ratio = (x_max / x_lo).ln();
    let grid: Vec<f64> = (0..=TP_GRID)
        .map(|i| {
            if i == TP_GRID {
                x_max
            } else {
                x_lo * (ratio * i as f64 / TP_GRID as f64).exp()
            }
        })
        .collect();
    let curv: Vec<f64> = grid.iter().map(|&x| medium.drive(x).2).collect();

    // Critical points of dY/dX (zeros of d²Y/dX²).
    let mut crit = Vec::new();
    for i in 0..TP_GRID {
        if curv[i] == 0.0 {
            crit.push(grid[i]);
        } else if curv[i] * curv[i + 1] < 0.0 {
            crit.push(bisect(|x| medium.drive(x).2, grid[i], grid[i + 1]));
        }
    }

    let slope = |x: f64| medium.drive(x).1;
    let mut knots = Vec::with_capacity(crit.len() + 2);
    knots.push(0.0);
    knots.extend(crit.iter().copied());
    knots.push(x_max);

    let mut points = Vec::new();
    let mut degenerate = false;
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (slo, shi) = (slope(lo), slope(hi));
        if slo * shi < 0.0 {
            points.push(bisect(slope, lo, hi));
        }
    }
    // Touching minima of dY/dX: near-zero with no sign change on either side.
    for (k, &xc) in crit.iter().enumerate() {
        let (lo, hi) = (knots[k], knots[k + 2]);
        if points.iter().any(|&x| lo < x && x < hi) {
            continue;
        }
        let (y, s, _) = medium.drive(xc);
        let scale = if xc > 0.0 { y / xc } else { 1.0 };
        if s.abs() <= DEGENERATE_TOL * scale {
            points.push(xc);
            degenerate = true;
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| ((*a - *b) / *b).abs() < 1e-12);
    let bistable = !degenerate && points.len() == 2;
    TurningPoints { points, bistable }
}

/// Bisection to full double precision on a sign-changing bracket.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Lower,
    Middle,
    Upper,
    Monostable,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Lower => "lower",
            Branch::Middle => "middle",
            Branch::Upper => "upper",
            Branch::Monostable => "monostable",
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Steady-state polarization and inversion of one transverse bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinState {
    pub u: f64,
    pub w: f64,
    /// Polarization `p_j = u_j x d_j / (1 + iΔ)`.
    pub p: Complex64,
    /// Inversion `d_j = (1+Δ²)/(1+Δ²+u_j²X)`; 1 for ground-state atoms.
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Intracavity amplitude, phase referenced to a real positive drive.
    pub x: Complex64,
    /// `|x|²`.
    pub intensity: f64,
    /// Drive intensity `Y`.
    pub drive: f64,
    pub bins: Vec<BinState>,
    pub branch: Branch,
    pub stable: bool,
    /// `dY/dX` at this state.
    pub slope: f64,
}

impl SteadyState {
    pub(crate) fn build(
        medium: &Medium,
        x_int: f64,
        drive: f64,
        delta: f64,
        branch: Branch,
    ) -> Self {
        let h = medium.transfer(x_int);
        let x = if drive > 0.0 {
            Complex64::new(drive.sqrt(), 0.0) / h
        } else {
            Complex64::new(0.0, 0.0)
        };
        let sat = medium.sat();
        let bins = medium
            .bins()
            .iter()
            .map(|b| {
                let d = sat / (sat + b.u * b.u * x_int);
                let p = b.u * x * d / Complex64::new(1.0, delta);
                BinState {
                    u: b.u,
                    w: b.w,
                    p,
                    d,
                }
            })
            .collect();
        let slope = medium.drive(x_int).1;
        let stable = branch != Branch::Middle && slope >= 0.0;
        SteadyState {
            x,
            intensity: x_int,
            drive,
            bins,
            branch,
            stable,
            slope,
        }
    }
}

/// All steady states sustained by drive `y_drive`, ascending in intensity.
pub fn solve_steady_states(y_drive: f64, p: &ModelParams) -> Result<Vec<SteadyState>> {
    p.validate()?;
    solve_with(&Medium::new(p), y_drive, p.delta)
}

pub(crate) fn solve_with(medium: &Medium, y_drive: f64, delta: f64) -> Result<Vec<SteadyState>> {
    solve_with_turning(medium, y_drive, delta).map(|(roots, _)| roots)
}

/// Roots plus the turning points below `y_drive` used to bracket them.
pub(crate) fn solve_with_turning(
    medium: &Medium,
    y_drive: f64,
    delta: f64,
) -> Result<(Vec<SteadyState>, TurningPoints)> {
    if y_drive.is_nan() || y_drive < 0.0 {
        return Err(Error::Domain(format!("drive must be >= 0, got {y_drive}")));
    }
    if !y_drive.is_finite() {
        return Err(Error::Domain("drive must be finite".into()));
    }
    if y_drive == 0.0 {
        let zero = SteadyState::build(medium, 0.0, 0.0, delta, Branch::Monostable);
        return Ok((vec![zero], TurningPoints::none()));
    }
    let tps = turning_points_of(medium, y_drive);
    let mut knots = vec![0.0];
    knots.extend(tps.points.iter().copied().filter(|&x| x < y_drive));
    knots.push(y_drive);

    let g = |x: f64| medium.drive(x).0 - y_drive;
    let mut roots: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (glo, ghi) = (g(lo), g(hi));
        let root = if glo == 0.0 && lo > 0.0 {
            Some(lo)
        } else if ghi == 0.0 {
            Some(hi)
        } else if glo * ghi < 0.0 {
            Some(polish(medium, bisect(g, lo, hi), lo, hi, y_drive))
        } else {
            None
        };
        if let Some(r) = root {
            if !roots.iter().any(|&q| ((q - r) / r).abs() < 1e-9) {
                roots.push(r);
            }
        }
    }
    if roots.is_empty() {
        return Err(Error::Solver(format!(
            "no root bracketed for Y={y_drive}, knots={knots:?}"
        )));
    }
    roots.sort_by(f64::total_cmp);
    let states = roots
        .into_iter()
        .map(|x| {
            let branch = classify(&tps, x);
            SteadyState::build(medium, x, y_drive, delta, branch)
        })
        .collect();
    Ok((states, tps))
}

fn classify(tps: &TurningPoints, x: f64) -> Branch {
    if !tps.bistable {
        return Branch::Monostable;
    }
    if x < tps.points[0] {
        Branch::Lower
    } else if x > tps.points[1] {
        Branch::Upper
    } else {
        Branch::Middle
    }
}

/// A couple of guarded Newton steps after bisection.
fn polish(medium: &Medium, mut x: f64, lo: f64, hi: f64, y: f64) -> f64 {
    for _ in 0..3 {
        let (yy, dy, _) = medium.drive(x);
        if dy == 0.0 {
            break;
        }
        let next = x - (yy - y) / dy;
        if !(next > lo && next < hi) {
            break;
        }
        let better = (medium.drive(next).0 - y).abs() < (yy - y).abs();
        if !better {
            break;
        }
        x = next;
    }
    x
}

/// Peak intracavity intensity over a cavity scan at fixed drive, divided by the
/// empty-cavity peak (which equals the drive in saturation units).
///
/// At the peak the cavity detuning cancels the atomic phase shift, so the peak is the
/// largest root of `X (1 + 2C A(X))² = Y`.
pub fn peak_transmission_ratio(c: f64, y_drive: f64, p: &ModelParams) -> f64 {
    if c == 0.0 {
        return 1.0;
    }
    let medium = Medium::new(p);
    let h = |x: f64| {
        let a = medium.response(x).a;
        let f = 1.0 + 2.0 * c * a;
        x * f * f - y_drive
    };
    // h(Y) >= 0; walk down a log grid to the last sign change.
    let n = 2000;
    let lo = y_drive * 1e-12;
    let ratio = (y_drive / lo).ln();
    let mut prev_x = y_drive;
    if h(prev_x) == 0.0 {
        return 1.0;
    }
    for i in (0..n).rev() {
        let x = lo * (ratio * i as f64 / n as f64).exp();
        let hx = h(x);
        if hx <= 0.0 {
            let root = if hx == 0.0 { x } else { bisect(h, x, prev_x) };
            return root / y_drive;
        }
        prev_x = x;
    }
    lo / y_drive
}

/// Inverts the bistable/empty peak-transmission ratio for the cooperativity.
pub fn cooperativity_from_amplitudes(
    bistable_peak: f64,
    empty_peak: f64,
    p: &ModelParams,
) -> Result<f64> {
    if !(bistable_peak > 0.0 && empty_peak > 0.0) {
        return Err(Error::Domain("peak amplitudes must be > 0".into()));
    }
    let target = bistable_peak / empty_peak;
    if target > 1.0 {
        return Err(Error::Domain(format!(
            "bistable peak exceeds empty-cavity peak (ratio {target})"
        )));
    }
    if target == 1.0 {
        return Ok(0.0);
    }
    let y = empty_peak;
    let ratio = |c: f64| peak_transmission_ratio(c, y, p);
    let mut hi = 1.0;
    while ratio(hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Solver(format!(
                "ratio {target} not reached below C=1e12"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ratio(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
