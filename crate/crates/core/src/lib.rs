//! Numerical laboratory for the one-dimensional restricted fractional
//! Laplacian `(-Δ)^β` on `(-1, 1)` with zero exterior data.
//!
//! The crate is organised bottom-up:
//!
//! * [`operator`] assembles the fractional centered-difference Toeplitz
//!   operator on a uniform interior grid and checks it against its symbol.
//! * [`spectrum`] computes discrete eigenpairs, the asymptotic eigenvalue
//!   law and gap / summability / sup-norm diagnostics.
//! * [`dynamics`] propagates the fractional Schrödinger and wave equations
//!   exactly in the truncated eigenbasis, plus a forced Schrödinger solver.
//! * [`control`] builds observability Gramians, runs the eigenvalue-gap
//!   sharpness experiment and synthesises HUM controls.
//! * [`identity`] extrapolates boundary traces `u/δ^β` and checks the
//!   Pohozaev-type identities.
//!
//! Dense symmetric eigenproblems are handled by [`linalg`]; batch work
//! (sweeps, batteries) goes through [`par`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
mod error;
pub mod gamma;
pub mod identity;
pub mod linalg;
pub mod operator;
pub mod par;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64;
