//! Occupation times of refracted jump diffusions with rational-transform jumps.
//!
//! The driving process is a jump diffusion whose two-sided jump densities are
//! finite mixtures of Erlang-type terms (possibly with complex parameters in
//! conjugate pairs), so every Laplace transform in sight is a rational
//! function. The refracted process loses an extra drift `α` whenever it sits
//! strictly below a level `b`; the quantity of interest is the time spent
//! below `b`, which prices state-dependent fees on variable-annuity accounts.
//!
//! Everything reduces to root sets of the (drift-adjusted) characteristic
//! exponent: [`charexp`] finds them, [`wienerhopf`] builds the two
//! Wiener–Hopf factors, [`firstpassage`] solves the one-sided exit problems,
//! [`occupation`] assembles the occupation-time Laplace transform, its
//! expectation, and the distribution at an exponential time, [`inversion`]
//! maps results back to the time domain, and [`montecarlo`] provides an
//! independent simulation cross-check.

pub mod charexp;
pub mod error;
pub mod firstpassage;
pub mod inversion;
pub mod model;
pub mod montecarlo;
pub(crate) mod numerics;
pub mod occupation;
pub mod wienerhopf;

pub use error::{Error, Result};
pub use model::{
    validate, AtomFlags, JumpSide, JumpTerm, LevyModel, RationalJumpDensity, RefractedModel,
    Regime, ValidatedModel, ValidationReport, Violation,
};
