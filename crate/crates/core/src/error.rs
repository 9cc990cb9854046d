//! Error types for the analytic and simulation pipelines.

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("evaluation point is within {eps:.3e} of the pole at {pole}")]
    PoleEvaluation { pole: Complex64, eps: f64 },

    #[error("root count mismatch: found total multiplicity {found}, expected {expected} (side {side})")]
    RootCountMismatch {
        found: usize,
        expected: usize,
        side: &'static str,
    },

    #[error("root solver did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("degenerate partial-fraction expansion near {root}")]
    DegenerateExpansion { root: Complex64 },

    #[error("argument outside the analytic region: Re(s) = {re}, boundary -{boundary}")]
    OutsideAnalyticRegion { re: f64, boundary: f64 },

    #[error("degenerate arguments: |theta - s| = {separation:.3e}")]
    DegenerateArguments { separation: f64 },

    #[error("residue extraction failed near {pole}: {detail}")]
    ResidueExtractionFailure { pole: Complex64, detail: String },

    #[error("Re(phi) = {re} lies outside the admissible strip (-{gamma1}, {beta1})")]
    OutsideStrip { re: f64, gamma1: f64, beta1: f64 },

    #[error("regime contract violation: {0}")]
    RegimeContractViolation(String),

    #[error("Laplace inversion unstable: {0}")]
    InversionUnstable(String),

    #[error("complex-q root tracking failed: {0}")]
    ComplexRootTrackingFailed(String),

    #[error("density is not directly sampleable: {0}")]
    UnsampleableDensity(String),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}
