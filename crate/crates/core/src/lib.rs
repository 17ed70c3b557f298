//! Bouncy Particle Sampler toolkit: targets, the sampler itself, tail
//! transforms, trajectory estimators and drift diagnostics.

pub mod bps;
pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod io;
pub mod quadrature;
pub mod rng;
pub mod targets;
pub mod transform;

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

pub use error::{Error, Result};
