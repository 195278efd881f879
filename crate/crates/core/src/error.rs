//! Error taxonomy shared across the library and surfaced by the CLI as stable codes.

/// Library-wide error type.
///
/// Every variant maps to one of the stable machine-readable codes returned by
/// [`Error::code`]; front ends rely on those codes, not on message text.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An iterative fit hit its iteration cap before reaching tolerance.
    #[error("{context}: no convergence within {max_iter} iterations")]
    NonConvergence { context: &'static str, max_iter: usize },

    /// A logistic fit drifted past the separation bound, so the likelihood has
    /// no finite maximizer on this data.
    #[error("{context}: separated fit, |coefficient| exceeded {bound}")]
    Separation { context: &'static str, bound: f64 },

    /// A design or information matrix is numerically rank-deficient.
    #[error("{context}: degenerate design (reciprocal condition {rcond:.3e})")]
    DegenerateDesign { context: &'static str, rcond: f64 },

    /// A Hájek denominator is not strictly positive, e.g. when truncation
    /// removes every unit of one arm.
    #[error("empty arm weight: {context}")]
    EmptyArmWeight { context: &'static str },

    /// The stacked-equation bread matrix is numerically singular.
    #[error("singular bread matrix in sandwich assembly (reciprocal condition {rcond:.3e})")]
    SingularA { rcond: f64 },

    /// A retrospective-only quantity was requested from a prospective fit.
    #[error("missing sample-level fit: {0}")]
    MissingSampleLevelFit(&'static str),

    /// A balance denominator (pooled standard deviation) is numerically zero
    /// while the arm means differ.
    #[error("zero variance: {0}")]
    ZeroVariance(String),

    /// A survey allocation cannot be drawn from the population as configured.
    #[error("infeasible allocation: {0}")]
    InfeasibleAllocation(String),

    /// Invalid input data or configuration.
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// Stable machine-readable code for front ends.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonConvergence { .. } => "E_NONCONVERGENCE",
            Error::Separation { .. } => "E_SEPARATION",
            Error::DegenerateDesign { .. } | Error::SingularA { .. } => "E_SINGULAR_A",
            Error::EmptyArmWeight { .. } => "E_EMPTY_ARM",
            Error::MissingSampleLevelFit(_)
            | Error::ZeroVariance(_)
            | Error::InfeasibleAllocation(_)
            | Error::Invalid(_) => "E_CONFIG",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
