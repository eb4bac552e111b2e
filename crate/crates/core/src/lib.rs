//! Matrix completion with deep non-negative latent factor models.
//!
//! The solver factors a partially observed ratings matrix as a chain
//! `U₁U₂…U_N·V` of non-negative factors. Rating ingestion, the classical
//! ALS and neighbourhood baselines, and the cross-validation harness used to
//! compare them are included as well.

pub mod baselines;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod solver;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
