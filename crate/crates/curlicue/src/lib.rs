//! Exact even-continued-fraction (ECF) dynamics and theta-sum evaluation.
//!
//! The crate is organized around the pipeline
//!
//! * [`ecf`] — exact arithmetic for the ECF shift `T`, digits, convergents
//!   and cylinder intervals;
//! * [`jump`] — the jump transformation `R`, its symbolic coding, renewal
//!   times, the invariant measure `mu_R` and the phase chain;
//! * [`theta`] — direct theta-sum evaluation with exact phase reduction,
//!   curlicue geometry and the renormalization remainders;
//! * [`renorm`] — the iterated renormalization ladder and the sublinear
//!   curve evaluator `gamma_J`;
//! * [`lab`] — Monte Carlo experiments verifying the limit theorems;
//! * [`stats`] — empirical distributions, KS and chi-square helpers.
//!
//! All dynamical quantities are computed over exact rationals
//! ([`num_rational::BigRational`]); floating point only enters when a value
//! is finally reported or fed into a complex exponential.

pub mod ecf;
pub mod error;
pub mod hp;
pub mod jump;
pub mod lab;
pub mod rational;
pub mod renorm;
pub mod special;
pub mod stats;
pub mod stream;
pub mod theta;

pub use error::{Error, Result};
pub use rational::Rational;
