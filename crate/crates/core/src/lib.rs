//! Spectral solvers for time-periodic flow past a translating and rotating body.

pub mod corpus;
pub mod embedding_verifier;
pub mod error;
pub mod galerkin_core;
pub mod nonlinear_solver;
pub mod oseen_spectral;
pub mod spectral_field;
pub mod wiener_algebra;

pub use error::{Error, Result};
