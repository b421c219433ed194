// Copyright 2026 coldsqueeze Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation (negative intensity, bad ratio, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter violates a model invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    /// A root or bracket search did not converge. Carries enough context to reproduce.
    #[error("internal solver error: {0}")]
    Solver(String),

    /// `A - iΩ` (or a Liouvillian) could not be inverted.
    #[error("singular system: {0}")]
    Singular(String),

    /// Fock-space truncation too small for the requested drive.
    #[error("fock cutoff {cutoff} insufficient: tail mass {tail:.3e}")]
    Truncation { cutoff: usize, tail: f64 },

    /// Least-squares fit could not be carried out on the given data.
    #[error("fit failed: {0}")]
    Fit(String),

    #[error("{0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
