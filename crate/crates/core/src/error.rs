use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("normalized cache size {gamma} must lie in [0, 1)")]
    GammaOutOfRange { gamma: String },

    #[error("lambda * gamma = {lambda} * {gamma} is not an integer")]
    NonIntegerLambdaGamma { lambda: usize, gamma: String },

    #[error("user count K = {users} is not a multiple of lambda = {lambda}")]
    KNotMultipleOfLambda { users: usize, lambda: usize },

    #[error("Q = {streams} exceeds the group size B = {group_size}")]
    QExceedsGroupSize { streams: usize, group_size: usize },

    #[error("Q = {streams} exceeds the antenna count L = {antennas}")]
    QExceedsAntennas { streams: usize, antennas: usize },

    #[error("no cache-state count fits a subpacketization budget of {budget}")]
    NoFeasibleLambda { budget: u128 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("channel matrix is rank deficient")]
    RankDeficient,

    #[error("{singular} of {draws} channel draws were numerically singular")]
    SingularDraws { singular: usize, draws: usize },

    #[error("no finite-L closed form exists for this power factor")]
    ExactUnavailable,

    #[error("stream ratio c = {0} is outside (0, 1)")]
    COutOfRange(f64),

    #[error("deterministic equivalent b = {0} is not positive")]
    NonPositiveB(f64),

    #[error("CSI overhead c * zeta = {0} exceeds the coherence block")]
    CsiOverheadExceedsBlock(f64),

    #[error("cacheless reference rate is zero")]
    ZeroDenominator,

    #[error("Lambert W0 is undefined for x = {0} < -1/e")]
    DomainError(f64),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("objective is unbounded without CSI cost")]
    UnboundedObjective,

    #[error("no sign change of the optimality condition in ({lo}, {hi})")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("no feasible stream count")]
    EmptyFeasibleSet,
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::GammaOutOfRange { .. } => "GammaOutOfRange",
            Error::NonIntegerLambdaGamma { .. } => "NonIntegerLambdaGamma",
            Error::KNotMultipleOfLambda { .. } => "KNotMultipleOfLambda",
            Error::QExceedsGroupSize { .. } => "QExceedsGroupSize",
            Error::QExceedsAntennas { .. } => "QExceedsAntennas",
            Error::NoFeasibleLambda { .. } => "NoFeasibleLambda",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::RankDeficient => "RankDeficient",
            Error::SingularDraws { .. } => "SingularDraws",
            Error::ExactUnavailable => "ExactUnavailable",
            Error::COutOfRange(_) => "COutOfRange",
            Error::NonPositiveB(_) => "NonPositiveB",
            Error::CsiOverheadExceedsBlock(_) => "CsiOverheadExceedsBlock",
            Error::ZeroDenominator => "ZeroDenominator",
            Error::DomainError(_) => "DomainError",
            Error::NoConvergence(_) => "NoConvergence",
            Error::UnboundedObjective => "UnboundedObjective",
            Error::NoRootInBracket { .. } => "NoRootInBracket",
            Error::EmptyFeasibleSet => "EmptyFeasibleSet",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
