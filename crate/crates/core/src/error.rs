use thiserror::Error;

/// Errors raised by the spectral toolkit.
///
/// Variants split into validation problems (bad input) and numerical
/// failures; [`HillError::is_validation`] tells them apart.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum HillError {
    #[error("malformed config: {0}")]
    MalformedConfig(String),
    #[error("non-finite coefficient: {0}")]
    NonFiniteCoefficient(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),
    #[error("non-finite state at x={x}")]
    NonFiniteState { x: f64 },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("branch ambiguity at path index {0}")]
    BranchAmbiguity(usize),
    #[error("newton diverged: {0}")]
    NewtonDiverged(String),
    #[error("missed root: {0}")]
    MissedRoot(String),
    #[error("continuation lost: {0}")]
    ContinuationLost(String),
    #[error("winding mismatch: {0}")]
    WindingMismatch(String),
    #[error("degenerate eigenvalue at boundary quasimomentum: {0}")]
    DegenerateAtBoundary(String),
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("exponent fit unstable: {0}")]
    FitUnstable(String),
    #[error("inconsistent criteria: {0}")]
    InconsistentCriteria(String),
    #[error("alpha vanishes: {0}")]
    AlphaZero(String),
    #[error("principal value diverges: {0}")]
    PVDiverges(String),
    #[error("resolvent pole: {0}")]
    ResolventPole(String),
}

impl HillError {
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HillError::MalformedConfig(_)
                | HillError::NonFiniteCoefficient(_)
                | HillError::InvalidArgument(_)
        )
    }

    /// Stable name of the variant, used in machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            HillError::MalformedConfig(_) => "MalformedConfig",
            HillError::NonFiniteCoefficient(_) => "NonFiniteCoefficient",
            HillError::InvalidArgument(_) => "InvalidArgument",
            HillError::ToleranceNotMet(_) => "ToleranceNotMet",
            HillError::NonFiniteState { .. } => "NonFiniteState",
            HillError::QuadratureFailure(_) => "QuadratureFailure",
            HillError::BranchAmbiguity(_) => "BranchAmbiguity",
            HillError::NewtonDiverged(_) => "NewtonDiverged",
            HillError::MissedRoot(_) => "MissedRoot",
            HillError::ContinuationLost(_) => "ContinuationLost",
            HillError::WindingMismatch(_) => "WindingMismatch",
            HillError::DegenerateAtBoundary(_) => "DegenerateAtBoundary",
            HillError::ZeroDenominator(_) => "ZeroDenominator",
            HillError::FitUnstable(_) => "FitUnstable",
            HillError::InconsistentCriteria(_) => "InconsistentCriteria",
            HillError::AlphaZero(_) => "AlphaZero",
            HillError::PVDiverges(_) => "PVDiverges",
            HillError::ResolventPole(_) => "ResolventPole",
        }
    }
}

pub type Result<T> = std::result::Result<T, HillError>;
