//! Rare-event simulation of multivariate regularly varying random walks
//! conditioned on ruin: a tractable approximating Markov kernel, an unbiased
//! importance-sampling estimator of ruin probabilities with total-variation
//! diagnostics, numerical verification of the underlying Lyapunov drift
//! inequality, and samplers for the asymptotic conditional limit laws.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod increments;
pub mod kernel;
pub mod limits;
pub mod lyapunov;
pub mod numerics;
pub mod rng;
pub mod stats;
pub mod vecops;

pub use error::{Result, RuinError};
