// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! Output-field quadrature noise from linearized quantum Langevin equations.
//!
//! Fluctuation variables are the physical intracavity field `δa` (units of √photons)
//! and, per transverse bin, the intensive scaled polarization `δp_j` and inversion
//! `δd_j`. Rates are measured in units of κ. With the saturation photon number
//! `n_s = γ∥N / (8κC)` the scaled amplitude is `x = a / √n_s`.
//!
//! Atomic noise comes from the generalized Einstein relation applied to the
//! single-atom dissipators (radiative decay `√γ∥ σ`, pure dephasing
//! `√Γφ σz` with `Γφ = (γ − γ∥/2)/2`) at the bin steady state, divided by the bin
//! atom number `w_j N`. Quadrature spectra are symmetrically ordered and normalized
//! so the vacuum gives the identity.

mod oracle;

pub use oracle::{drive_amplitude, me_oracle_spectrum, me_steady_state, MeSteadyState};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{ModelParams, SteadyState};

/// Linear system `d/dt δz = A δz + B ξ` plus the output map
/// `δout = E δz + J ξ` for the two output quadrature components (re, im).
#[derive(Debug, Clone)]
pub struct FluctuationSystem {
    /// Drift matrix over `(δa_re, δa_im, {δp_re, δp_im, δd}_j)`, rates in units of κ.
    pub drift: DMatrix<f64>,
    /// Maps white-noise channels into state space.
    pub noise_input: DMatrix<f64>,
    /// Symmetrized white-noise covariance of the channels
    /// `(in_re, in_im, loss_re, loss_im, {F_p_re, F_p_im, F_d}_j)`.
    pub noise_cov: DMatrix<f64>,
    pub output_state: DMatrix<f64>,
    pub output_direct: DMatrix<f64>,
    pub kappa_hz: f64,
    pub bins: usize,
}

impl FluctuationSystem {
    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn channels(&self) -> usize {
        self.noise_cov.nrows()
    }

    /// Eigenvalues of the drift matrix, units of κ.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.drift
            .clone()
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect()
    }

    /// Largest real part among the drift eigenvalues, units of κ.
    pub fn max_growth_rate(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Adds `c·δz` (`conj = false`) or `c·δz*` (`conj = true`) of the complex variable in
/// columns `(cr, ci)` to the complex equation in rows `(rr, ri)`.
fn add_complex(
    m: &mut DMatrix<f64>,
    (rr, ri): (usize, usize),
    (cr, ci): (usize, usize),
    c: Complex64,
    conj: bool,
) {
    let s = if conj { -1.0 } else { 1.0 };
    m[(rr, cr)] += c.re;
    m[(rr, ci)] -= s * c.im;
    m[(ri, cr)] += c.im;
    m[(ri, ci)] += s * c.re;
}

/// Single-atom two-level operators in the basis (|e⟩, |g⟩).
pub(crate) struct TwoLevel {
    pub sigma: DMatrix<Complex64>,
    pub sigma_dag: DMatrix<Complex64>,
    pub sigma_z: DMatrix<Complex64>,
}

impl TwoLevel {
    pub(crate) fn new() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        TwoLevel {
            sigma: DMatrix::from_row_slice(2, 2, &[z, z, one, z]),
            sigma_dag: DMatrix::from_row_slice(2, 2, &[z, one, z, z]),
            sigma_z: DMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
        }
    }
}

/// `K_AB = Σ_k ⟨[L_k†, A][B, L_k]⟩` for `A, B ∈ (σ, σ†, σz)` at the single-atom state
/// with `⟨σ⟩ = s`, `⟨σz⟩ = z`. Rates in units of κ.
fn einstein_diffusion(s: Complex64, z: f64, gamma_par: f64, dephasing: f64) -> [[Complex64; 3]; 3] {
    let ops = TwoLevel::new();
    let rho = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.5 * (1.0 + z), 0.0),
            s,
            s.conj(),
            Complex64::new(0.5 * (1.0 - z), 0.0),
        ],
    );
    let jumps = [
        &ops.sigma * Complex64::new(gamma_par.sqrt(), 0.0),
        ops.sigma_z.clone() * Complex64::new(dephasing.sqrt(), 0.0),
    ];
    let basis = [&ops.sigma, &ops.sigma_dag, &ops.sigma_z];
    let mut k = [[Complex64::new(0.0, 0.0); 3]; 3];
    for l in &jumps {
        let l_dag = l.adjoint();
        for (i, a) in basis.iter().enumerate() {
            let left = &l_dag * *a - *a * &l_dag;
            for (j, b) in basis.iter().enumerate() {
                let right = *b * l - l * *b;
                k[i][j] += (&rho * &left * &right).trace();
            }
        }
    }
    k
}

/// Linearizes the atom–cavity equations around `ss`.
pub fn build_fluctuation_system(ss: &SteadyState, p: &ModelParams) -> Result<FluctuationSystem> {
    p.validate()?;
    let m = ss.bins.len();
    let n = 2 + 3 * m;
    let n_ch = 4 + 3 * m;
    let gamma = 1.0 / p.kappa_over_gamma();
    let gamma_par = p.gamma_par_ratio * gamma;
    let dephasing = 0.5 * (gamma - 0.5 * gamma_par);
    let big_n = p.n_atoms;
    // Field <- atoms: 2C√n_s; atoms <- field: 1/√n_s.
    let field_from_atoms = (p.c * gamma_par * big_n / 2.0).sqrt();
    let atoms_from_field = (8.0 * p.c / (gamma_par * big_n)).sqrt();
    let r = (gamma_par / gamma).sqrt();
    let kappa_in = 1.0 - p.loss_fraction;
    let kappa_loss = p.loss_fraction;

    let mut a = DMatrix::<f64>::zeros(n, n);
    let field = (0, 1);
    add_complex(&mut a, field, field, -Complex64::new(1.0, p.theta), false);

    let mut b = DMatrix::<f64>::zeros(n, n_ch);
    let mut q = DMatrix::<f64>::zeros(n_ch, n_ch);
    b[(0, 0)] = (2.0 * kappa_in).sqrt();
    b[(1, 1)] = (2.0 * kappa_in).sqrt();
    b[(0, 2)] = (2.0 * kappa_loss).sqrt();
    b[(1, 3)] = (2.0 * kappa_loss).sqrt();
    for c in 0..4 {
        q[(c, c)] = 0.25;
    }

    let x = ss.x;
    let delta = p.delta;
    for (j, bin) in ss.bins.iter().enumerate() {
        let base = 2 + 3 * j;
        let pol = (base, base + 1);
        let inv = base + 2;
        let u = bin.u;

        add_complex(
            &mut a,
            field,
            pol,
            Complex64::new(-field_from_atoms * bin.w * u, 0.0),
            false,
        );

        add_complex(
            &mut a,
            pol,
            field,
            Complex64::new(gamma * u * bin.d * atoms_from_field, 0.0),
            false,
        );
        a[(base, inv)] += gamma * u * x.re;
        a[(base + 1, inv)] += gamma * u * x.im;
        add_complex(&mut a, pol, pol, -gamma * Complex64::new(1.0, delta), false);

        a[(inv, 0)] -= gamma_par * u * atoms_from_field * bin.p.re;
        a[(inv, 1)] -= gamma_par * u * atoms_from_field * bin.p.im;
        a[(inv, base)] -= gamma_par * u * x.re;
        a[(inv, base + 1)] -= gamma_par * u * x.im;
        a[(inv, inv)] -= gamma_par;

        // Single-atom moments: σ = −(i/2) r p, σz = −d.
        let s = Complex64::new(0.0, -0.5 * r) * bin.p;
        let k = einstein_diffusion(s, -bin.d, gamma_par, dephasing);
        // (F_p, F_p*, F_d) = T (F_σ, F_σ†, F_z), then to (re, im, d).
        let t = [
            Complex64::new(0.0, 2.0 / r),
            Complex64::new(0.0, -2.0 / r),
            Complex64::new(-1.0, 0.0),
        ];
        let half = Complex64::new(0.5, 0.0);
        let half_i = Complex64::new(0.0, -0.5);
        let real_map = [
            [half, half, Complex64::new(0.0, 0.0)],
            [half_i, -half_i, Complex64::new(0.0, 0.0)],
            [
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        ];
        let scale = 1.0 / (bin.w * big_n);
        for row in 0..3 {
            for col in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, ti) in t.iter().enumerate() {
                    for (jj, tj) in t.iter().enumerate() {
                        acc += real_map[row][i] * ti * k[i][jj] * tj * real_map[col][jj];
                    }
                }
                q[(4 + 3 * j + row, 4 + 3 * j + col)] = acc.re * scale;
            }
        }
        for c in 0..3 {
            b[(base + c, 4 + 3 * j + c)] = 1.0;
        }
    }
    let q = (&q + q.transpose()) * 0.5;

    let mut e = DMatrix::<f64>::zeros(2, n);
    e[(0, 0)] = (2.0 * kappa_in).sqrt();
    e[(1, 1)] = (2.0 * kappa_in).sqrt();
    let mut j_direct = DMatrix::<f64>::zeros(2, n_ch);
    j_direct[(0, 0)] = -1.0;
    j_direct[(1, 1)] = -1.0;

    Ok(FluctuationSystem {
        drift: a,
        noise_input: b,
        noise_cov: q,
        output_state: e,
        output_direct: j_direct,
        kappa_hz: p.kappa_hz,
        bins: m,
    })
}

/// Output quadrature noise at one analysis frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpectrum {
    pub omega_hz: f64,
    /// Symmetric covariance of the (amplitude, phase) quadratures; shot noise = identity.
    pub v: [[f64; 2]; 2],
    pub s_min: f64,
    pub s_max: f64,
    /// Quadrature angle of `s_min`, in [0, π).
    pub theta_min: f64,
}

impl QuadratureSpectrum {
    pub fn from_matrix(omega_hz: f64, v: [[f64; 2]; 2]) -> Result<Self> {
        let (s_min, s_max, theta_min) = quadrature_extrema(v)?;
        Ok(QuadratureSpectrum {
            omega_hz,
            v,
            s_min,
            s_max,
            theta_min,
        })
    }

    /// Noise of the quadrature at angle `phi`.
    pub fn at_angle(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        c * c * self.v[0][0] + s * s * self.v[1][1] + 2.0 * s * c * self.v[0][1]
    }
}

/// Symmetrized output spectrum of `fs` at `omega_hz`.
pub fn output_spectrum(fs: &FluctuationSystem, omega_hz: f64) -> Result<QuadratureSpectrum> {
    if !(omega_hz >= 0.0) {
        return Err(Error::Domain(format!(
            "analysis frequency must be >= 0, got {omega_hz}"
        )));
    }
    let omega = omega_hz / fs.kappa_hz;
    let n = fs.dim();
    // Z = E (−iΩ − A)^{-1}, solved as (−iΩ − A)ᵀ Zᵀ = Eᵀ.
    let mut mt = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            mt[(i, j)] = Complex64::new(-fs.drift[(j, i)], 0.0);
        }
        mt[(i, i)] -= Complex64::new(0.0, omega);
    }
    let et = fs.output_state.transpose().map(|v| Complex64::new(v, 0.0));
    let zt = mt
        .lu()
        .solve(&et)
        .ok_or_else(|| Error::Singular(format!("A − iΩ not invertible at Ω = {omega_hz} Hz")))?;
    let bc = fs.noise_input.map(|v| Complex64::new(v, 0.0));
    let t = zt.transpose() * bc + fs.output_direct.map(|v| Complex64::new(v, 0.0));
    let qc = fs.noise_cov.map(|v| Complex64::new(v, 0.0));
    let s = &t * qc * t.adjoint();
    let v01 = 2.0 * (s[(0, 1)].re + s[(1, 0)].re);
    let v = [[4.0 * s[(0, 0)].re, v01], [v01, 4.0 * s[(1, 1)].re]];
    QuadratureSpectrum::from_matrix(omega_hz, v)
}

/// Eigenvalues `(S_min, S_max)` of a symmetric 2×2 matrix and the angle of the
/// `S_min` eigenvector in [0, π). An isotropic matrix reports angle 0.
pub fn quadrature_extrema(v: [[f64; 2]; 2]) -> Result<(f64, f64, f64)> {
    let scale = v[0][0].abs().max(v[1][1].abs()).max(1e-300);
    if (v[0][1] - v[1][0]).abs() > 1e-12 * scale {
        return Err(Error::Domain(format!(
            "quadrature matrix not symmetric: {} vs {}",
            v[0][1], v[1][0]
        )));
    }
    let mean = 0.5 * (v[0][0] + v[1][1]);
    let half_diff = 0.5 * (v[0][0] - v[1][1]);
    let b = v[0][1];
    let radius = half_diff.hypot(b);
    let (s_min, s_max) = (mean - radius, mean + radius);
    if radius <= 1e-14 * scale {
        return Ok((s_min, s_max, 0.0));
    }
    let major = 0.5 * (2.0 * b).atan2(2.0 * half_diff);
    let theta = (major + 0.5 * PI).rem_euclid(PI);
    // rem_euclid can round up to exactly π.
    let theta = if theta >= PI { 0.0 } else { theta };
    Ok((s_min, s_max, theta))
}

/// Mixes vacuum into a measured noise power: `ηS + (1 − η)`.
pub fn apply_efficiency(s: f64, eta: f64) -> f64 {
    eta * s + (1.0 - eta)
}

/// Homodyne detection efficiency and its informational components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionChain {
    pub eta: f64,
    pub photodiode_qe: f64,
    pub mode_overlap: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        DetectionChain {
            eta: 0.9,
            photodiode_qe: 0.96,
            mode_overlap: 0.9 / 0.96,
        }
    }
}

impl DetectionChain {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::param(
                "eta",
                format!("must lie in (0, 1], got {}", self.eta),
            ));
        }
        Ok(())
    }

    pub fn apply(&self, q: &QuadratureSpectrum) -> QuadratureSpectrum {
        let mut v = q.v;
        for (i, row) in v.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e *= self.eta;
                if i == j {
                    *e += 1.0 - self.eta;
                }
            }
        }
        QuadratureSpectrum {
            omega_hz: q.omega_hz,
            v,
            s_min: apply_efficiency(q.s_min, self.eta),
            s_max: apply_efficiency(q.s_max, self.eta),
            theta_min: q.theta_min,
        }
    }
}

/// Convenience: spectrum of the steady state `ss` at `omega_hz`.
pub fn spectrum_at(ss: &SteadyState, p: &ModelParams, omega_hz: f64) -> Result<QuadratureSpectrum> {
    let fs = build_fluctuation_system(ss, p)?;
    output_spectrum(&fs, omega_hz)
}

pub(crate) fn col(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(v)
}
