//! Exact computations around the uncentered Hardy–Littlewood maximal operator
//! on the spider domain `R_k` (`k` unit segments glued at a hub), its sharp
//! `L^p` constants, and Doob maximal functions over unions of filtrations on
//! finite probability spaces.
//!
//! Module map:
//! - [`domain`]: points, balls, step functions, piecewise-Möbius functions.
//! - [`maximal`]: the maximal operator, pointwise and as a full function.
//! - [`rearrangement`]: distribution functions and `k`-decreasing rearrangements.
//! - [`constants`]: the sharp constants `C_{p,k}` and `λ_{r,k}`.
//! - [`filtration`]: finite probability spaces, filtrations and Doob maximal functions.
//! - [`covering`]: the greedy ball selection behind the weak-type estimate.
//! - [`verifier`]: end-to-end inequality checks and extremal constructions.

pub mod constants;
pub mod covering;
pub mod domain;
pub mod error;
pub mod filtration;
pub mod maximal;
pub mod rearrangement;
pub mod scalar;
pub mod verifier;

pub use error::{Error, Result};
pub use scalar::{Backend, Rational, Scalar};
