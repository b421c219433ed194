// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! Squeezing of a probe beam by cold two-level atoms in an optical cavity.
//!
//! * [`model`]: bistable steady states of the atom–cavity system.
//! * [`noise`]: linearized output quadrature noise spectra and a master-equation oracle.
//! * [`cloud`]: cooperativity decay of a released, falling atom cloud.
//! * [`experiment`]: synthetic free-release and piezo-scan noise traces.
//! * [`config`] and [`io`]: run configuration and CSV formats.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod config;
pub mod constants;
pub mod error;
pub mod experiment;
mod gauss;
pub mod io;
pub mod model;
pub mod noise;

pub use error::{Error, Result};
pub use gauss::gauss_legendre_unit;
pub use model::{
    cooperativity_from_amplitudes, solve_steady_states, state_equation, turning_points, Bin,
    Branch, ModelParams, SteadyState, Transverse, TurningPoints,
};
