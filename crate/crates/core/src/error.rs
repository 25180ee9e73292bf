use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("supply file {path}: expected N = {expected} values, found {actual}")]
    SupplyLength {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("finite-difference step underflows at agent {agent}, step {step}")]
    StepUnderflow { agent: usize, step: usize },

    #[error("solver diverged: non-finite iterate at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error(
        "inner solve for agent {agent} stopped after {iterations} iterations with gradient \
         sup-norm {grad_norm:e} (best cost {best_value})"
    )]
    InnerSolve {
        agent: usize,
        iterations: usize,
        best_value: f64,
        grad_norm: f64,
    },

    #[error("hyperbolic argument k*T = {0} exceeds 20")]
    HyperbolicRange(f64),

    #[error("cost model is not linear-quadratic: {0}")]
    NotLinearQuadratic(&'static str),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn ensure_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}

pub(crate) fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}
