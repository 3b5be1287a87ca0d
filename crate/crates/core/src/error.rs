//! Error type shared by every module.

use thiserror::Error;

/// Failure modes of the library.
///
/// Every variant maps to one of three coarse categories (see
/// [`Error::category`]) that the command-line front-end turns into exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument sits on a pole of Γ or ψ.
    #[error("pole of {func} at {at}")]
    Pole { func: &'static str, at: String },
    /// Argument outside the supported sector of the complex plane.
    #[error("branch error: {0}")]
    Branch(String),
    /// Result exceeds the double-precision exponent range.
    #[error("overflow: {0}")]
    Overflow(String),
    /// A series or iteration exceeded its term cap.
    #[error("no convergence in {what} after {terms} terms")]
    NonConvergence { what: &'static str, terms: usize },
    /// Argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The logarithmic weight is undefined at k = 0.
    #[error("weight lambda_k is undefined at k = 0")]
    WeightUndefined,
    /// The normalising denominator of a mixed kernel vanishes.
    #[error("mixed kernel denominator vanishes")]
    MixedDenominatorZero,
    /// Truncating an integral at the right end of the grid is not accurate.
    #[error("tail beyond x_max too large: estimate {estimate:e}")]
    Tail { estimate: f64 },
    /// A compressed Green operator is not a contraction.
    #[error("operator norm estimate {norm:.4} is not below 1")]
    NonContraction { norm: f64 },
    /// No compression point satisfies the contraction target.
    #[error("no admissible compression point for target {target}")]
    NoAdmissibleA { target: f64 },
    /// The potential is outside the integrability class required.
    #[error("class violation: {0}")]
    ClassViolation(String),
    /// The requested method cannot be used for these parameters.
    #[error("method unavailable: {0}")]
    MethodUnavailable(String),
    /// The Jost function vanishes on the search contour.
    #[error("contour passes through a zero of the Jost function")]
    ContourThroughZero,
    /// Newton refinement did not recover the winding count.
    #[error("zero count mismatch: winding {winding}, refined {found}")]
    CountMismatch { winding: i64, found: usize },
    /// The resolvent denominator vanishes (k is in the spectrum).
    #[error("resolvent pole: denominator {0:e}")]
    ResolventPole(f64),
    /// A limit extrapolation does not settle.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// Two basis functions have vanishing Wronskian.
    #[error("degenerate basis")]
    DegenerateBasis,
    /// The boundary space is trivial for this order.
    #[error("boundary space is trivial for |Re m| >= 1")]
    TrivialBoundarySpace,
    /// Both scattering coefficients vanish.
    #[error("degenerate zero-energy decomposition")]
    DegenerateDecomposition,
    /// Malformed input file or configuration.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Invalid input or configuration.
    Input,
    /// The potential is outside the required class.
    Class,
    /// A numerical procedure failed.
    Numerical,
}

impl Error {
    /// Category used for exit codes and machine-readable reports.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain(_) | Error::Branch(_) | Error::Parse(_) | Error::WeightUndefined => {
                ErrorCategory::Input
            }
            Error::ClassViolation(_) | Error::TrivialBoundarySpace => ErrorCategory::Class,
            _ => ErrorCategory::Numerical,
        }
    }

    /// Short stable identifier of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Pole { .. } => "PoleError",
            Error::Branch(_) => "BranchError",
            Error::Overflow(_) => "OverflowError",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::Domain(_) => "DomainError",
            Error::WeightUndefined => "WeightUndefined",
            Error::MixedDenominatorZero => "MixedDenominatorZero",
            Error::Tail { .. } => "TailError",
            Error::NonContraction { .. } => "NonContraction",
            Error::NoAdmissibleA { .. } => "NoAdmissibleA",
            Error::ClassViolation(_) => "ClassViolation",
            Error::MethodUnavailable(_) => "MethodUnavailable",
            Error::ContourThroughZero => "ContourThroughZero",
            Error::CountMismatch { .. } => "CountMismatch",
            Error::ResolventPole(_) => "ResolventPole",
            Error::NoConvergence(_) => "NoConvergence",
            Error::DegenerateBasis => "DegenerateBasis",
            Error::TrivialBoundarySpace => "TrivialBoundarySpace",
            Error::DegenerateDecomposition => "DegenerateDecomposition",
            Error::Parse(_) => "ParseError",
        }
    }
}

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
