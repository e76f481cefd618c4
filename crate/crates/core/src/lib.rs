//! Particles moving among drifting clusters: simulation, two-mode mixture fitting, and
//! variational estimation of cluster membership from sliding-window displacement measures.
//!
//! The pipeline is [`sim::simulate`] → [`gmm::em_fit`] → [`membership`] terms →
//! [`solve`] → accuracy, orchestrated by [`experiment`].

pub mod error;
pub mod experiment;
pub mod gmm;
pub mod io;
pub mod measures;
pub mod membership;
pub mod seed;
pub mod sim;
pub mod solve;

pub use error::{Error, Result};

/// A point or displacement in `R^d`.
pub type Point = nalgebra::DVector<f64>;
