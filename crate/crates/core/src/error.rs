use thiserror::Error;

/// Errors produced by model construction and the numerical machinery.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature distributions share no effective support")]
    EmptyCommonSupport,

    #[error("monotone likelihood ratio violated at x = {at}")]
    MlrViolation { at: f64 },

    #[error("x = {0} outside the support of both class densities")]
    OutsideSupport(f64),

    #[error("no constraint distribution for the unconstrained policy")]
    NoConstraintDistribution,

    #[error("threshold solve failed: {0}")]
    ThresholdSolve(String),

    #[error("uniqueness check inapplicable: condition classes {0:?} and {1:?}")]
    UniquenessInapplicable(crate::model::TransitionClass, crate::model::TransitionClass),

    #[error("multiple equilibria: {0:?}")]
    MultipleEquilibria(Vec<(f64, f64)>),

    #[error("no equilibrium located (numeric failure; one must exist)")]
    NoEquilibrium,

    #[error("intervention not applicable: {0}")]
    InvalidIntervention(String),

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
