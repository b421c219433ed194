// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! Single-atom driven-cavity master equation on a truncated Fock space, used to
//! validate the linearized spectra.
//!
//! `H = θ a†a + (γΔ/2) σz + g (a†σ + σ†a) + iε (a† − a)` with dissipators
//! `√2 a`, `√γ∥ σ`, `√Γφ σz`; rates in units of κ. Output spectra follow from the
//! quantum regression theorem:
//! `S_φ(Ω) = 1 + 4 Re tr[X_φ (−L − iΩ)⁻¹ (a_φ ρ + ρ a_φ† − ⟨X_φ⟩ρ)]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_4;

use super::{col, QuadratureSpectrum, TwoLevel};
use crate::error::{Error, Result};
use crate::model::ModelParams;

const TAIL_LIMIT: f64 = 1e-8;

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Intracavity drive amplitude ε (units of κ√photons) equivalent to the drive
/// intensity `y_drive` for a single atom: `ε = √(n_s Y)`, `n_s = γ∥/(8κC)`.
pub fn drive_amplitude(y_drive: f64, p: &ModelParams) -> Result<f64> {
    if !(p.c > 0.0) {
        return Err(Error::Domain("saturation units need C > 0".into()));
    }
    let gamma_par = p.gamma_par_ratio / p.kappa_over_gamma();
    Ok((gamma_par / (8.0 * p.c) * y_drive).sqrt())
}

struct Operators {
    dim: usize,
    a: CMat,
    sigma: CMat,
    sigma_z: CMat,
}

impl Operators {
    fn new(cutoff: usize) -> Self {
        let nf = cutoff + 1;
        let mut af = CMat::zeros(nf, nf);
        for n in 1..nf {
            af[(n - 1, n)] = c((n as f64).sqrt());
        }
        let atom = TwoLevel::new();
        let id2 = CMat::identity(2, 2);
        let idf = CMat::identity(nf, nf);
        Operators {
            dim: 2 * nf,
            a: af.kronecker(&id2),
            sigma: idf.kronecker(&atom.sigma),
            sigma_z: idf.kronecker(&atom.sigma_z),
        }
    }
}

/// Column-stacked Liouvillian.
fn liouvillian(ops: &Operators, p: &ModelParams, g: f64, eps: f64) -> CMat {
    let d = ops.dim;
    let id = CMat::identity(d, d);
    let gamma = 1.0 / p.kappa_over_gamma();
    let gamma_par = p.gamma_par_ratio * gamma;
    let dephasing = 0.5 * (gamma - 0.5 * gamma_par);
    let a_dag = ops.a.adjoint();
    let s_dag = ops.sigma.adjoint();

    let h = (&a_dag * &ops.a) * c(p.theta)
        + &ops.sigma_z * c(0.5 * gamma * p.delta)
        + (&a_dag * &ops.sigma + &s_dag * &ops.a) * c(g)
        + (&a_dag - &ops.a) * Complex64::new(0.0, eps);
    let i = Complex64::new(0.0, 1.0);
    let mut l = id.kronecker(&h) * (-i) + h.transpose().kronecker(&id) * i;
    let jumps = [
        &ops.a * c(2f64.sqrt()),
        &ops.sigma * c(gamma_par.sqrt()),
        &ops.sigma_z * c(dephasing.sqrt()),
    ];
    for j in &jumps {
        let jd = j.adjoint();
        let jdj = &jd * j;
        l += j.conjugate().kronecker(j);
        l -= id.kronecker(&jdj) * c(0.5);
        l -= jdj.transpose().kronecker(&id) * c(0.5);
    }
    l
}

fn trace_with(op: &CMat, vec_rho: &[Complex64], d: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += op[(i, j)] * vec_rho[i * d + j];
        }
    }
    acc
}

/// Steady state of the single-atom master equation.
#[derive(Debug, Clone)]
pub struct MeSteadyState {
    /// Column-stacked density matrix.
    pub rho: Vec<Complex64>,
    pub dim: usize,
    pub mean_field: Complex64,
    pub photon_number: f64,
    /// Population of the highest retained Fock state.
    pub tail: f64,
}

fn steady(ops: &Operators, l: &CMat, cutoff: usize) -> Result<MeSteadyState> {
    let d = ops.dim;
    let n2 = d * d;
    let mut m = l.clone();
    for k in 0..n2 {
        m[(0, k)] = c(0.0);
    }
    for i in 0..d {
        m[(0, i * d + i)] = c(1.0);
    }
    let mut rhs = vec![c(0.0); n2];
    rhs[0] = c(1.0);
    let sol = m
        .lu()
        .solve(&col(&rhs))
        .ok_or_else(|| Error::Singular("Liouvillian null space is not one-dimensional".into()))?;
    let rho: Vec<Complex64> = sol.iter().copied().collect();
    let mean_field = trace_with(&ops.a, &rho, d);
    let photon_number = trace_with(&(ops.a.adjoint() * &ops.a), &rho, d).re;
    let tail = (0..2)
        .map(|s| {
            let idx = 2 * cutoff + s;
            rho[idx * d + idx].re
        })
        .sum::<f64>();
    if tail > TAIL_LIMIT {
        return Err(Error::Truncation { cutoff, tail });
    }
    Ok(MeSteadyState {
        rho,
        dim: d,
        mean_field,
        photon_number,
        tail,
    })
}

/// Coupling `g` (units of κ) of a single atom with cooperativity `C = g²/(2κγ)`.
fn single_atom_coupling(p: &ModelParams) -> f64 {
    (2.0 * p.c / p.kappa_over_gamma()).sqrt()
}

pub fn me_steady_state(p: &ModelParams, eps: f64, fock_cutoff: usize) -> Result<MeSteadyState> {
    p.validate()?;
    let ops = Operators::new(fock_cutoff);
    let l = liouvillian(&ops, p, single_atom_coupling(p), eps);
    steady(&ops, &l, fock_cutoff)
}

/// Output quadrature spectra of one atom in the cavity driven with amplitude `eps`
/// (see [`drive_amplitude`]). `p.transverse` and `p.n_atoms` are ignored.
pub fn me_oracle_spectrum(
    p: &ModelParams,
    eps: f64,
    omega_grid_hz: &[f64],
    fock_cutoff: usize,
) -> Result<Vec<QuadratureSpectrum>> {
    p.validate()?;
    if fock_cutoff < 1 {
        return Err(Error::Domain("fock cutoff must be >= 1".into()));
    }
    let ops = Operators::new(fock_cutoff);
    let l = liouvillian(&ops, p, single_atom_coupling(p), eps);
    let ss = steady(&ops, &l, fock_cutoff)?;
    let d = ops.dim;
    let n2 = d * d;
    let rho = CMat::from_column_slice(d, d, &ss.rho);
    let a_dag = ops.a.adjoint();
    let alpha = ss.mean_field;

    // Trace-zero sources for a and a†.
    let src_a = &ops.a * &rho - &rho * alpha;
    let src_ad = &rho * &a_dag - &rho * alpha.conj();
    let mut rhs = CMat::zeros(n2, 2);
    rhs.column_mut(0).copy_from_slice(src_a.as_slice());
    rhs.column_mut(1).copy_from_slice(src_ad.as_slice());

    // Rank-one deflation: L' = L − |ρ⟩⟨⟨1| is invertible and agrees with L on
    // trace-zero operators.
    let mut deflated = l;
    for i in 0..d {
        let tr_col = i * d + i;
        for k in 0..n2 {
            deflated[(k, tr_col)] -= ss.rho[k];
        }
    }

    let mut out = Vec::with_capacity(omega_grid_hz.len());
    for &omega_hz in omega_grid_hz {
        let omega = omega_hz / p.kappa_hz;
        let mut m = -deflated.clone();
        for k in 0..n2 {
            m[(k, k)] -= Complex64::new(0.0, omega);
        }
        let y = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("resolvent singular at Ω = {omega_hz} Hz")))?;
        let ya: Vec<Complex64> = y.column(0).iter().copied().collect();
        let yad: Vec<Complex64> = y.column(1).iter().copied().collect();
        let t1 = trace_with(&ops.a, &ya, d);
        let t2 = trace_with(&a_dag, &ya, d);
        let t3 = trace_with(&ops.a, &yad, d);
        let t4 = trace_with(&a_dag, &yad, d);
        let spectrum = |phi: f64| {
            let e = Complex64::from_polar(1.0, -2.0 * phi);
            1.0 + 4.0 * (e * t1 + t2 + t3 + e.conj() * t4).re
        };
        let s0 = spectrum(0.0);
        let s90 = spectrum(2.0 * FRAC_PI_4);
        let s45 = spectrum(FRAC_PI_4);
        let v01 = s45 - 0.5 * (s0 + s90);
        out.push(QuadratureSpectrum::from_matrix(
            omega_hz,
            [[s0, v01], [v01, s90]],
        )?);
    }
    Ok(out)
}
