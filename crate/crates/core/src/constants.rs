// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

//! Physical constants (CODATA, 6 significant digits).

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380649e-23;

/// Mass of a ¹³³Cs atom, kg.
pub const CS133_MASS: f64 = 2.20695e-25;

/// Standard gravity, m/s².
pub const G_STANDARD: f64 = 9.80665;
