use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no clusters to compare against")]
    NoClusters,

    #[error("empty sliding window at t={t} (T={horizon})")]
    EmptyWindow { t: usize, horizon: usize },

    #[error("horizon T={horizon} too short for window half-width k={k}")]
    HorizonTooShort { horizon: usize, k: usize },

    #[error("EM collapsed: variance of component '{component}' fell to {variance:e} at iteration {iteration}")]
    DegenerateMixture {
        component: &'static str,
        variance: f64,
        iteration: usize,
    },

    #[error("measure weights disagree: total mass {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("inside variance {var_in} is below cluster variance {var_c}; within-cluster wiggle would be negative")]
    NegativeWiggleVariance { var_in: f64, var_c: f64 },

    #[error("non-finite gradient at coordinate {index} (iteration {iteration})")]
    NonFiniteGradient { index: usize, iteration: usize },

    #[error("transport solver did not converge after {0} pivots")]
    TransportNoConvergence(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
