use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure names the module it came from so command-line diagnostics
/// stay one line long.
#[derive(Debug, Error)]
pub enum Error {
    #[error("incidence: {0}")]
    Incidence(String),

    #[error("incidence: q={0} is not a prime power")]
    NotPrimePower(u32),

    #[error(
        "incidence: rank may drop for grassmannian (l+1={l_plus_one} is not < n/2 with n={n})"
    )]
    GrassmannianRankMayDrop { l_plus_one: usize, n: usize },

    #[error("spectral: ambient dimension {dim} exceeds the configured maximum {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("spectral: decomposition failed (residual {residual:.3e})")]
    Decomposition { residual: f64 },

    #[error("dpp: {0}")]
    Dpp(String),

    #[error("dpp: conditional probability {0} left the admissible band")]
    ProbabilityOutOfRange(f64),

    #[error("dpp: infeasible conditioning (probability {0:.3e})")]
    InfeasibleConditioning(f64),

    #[error("dpp: enumeration of {0} subsets exceeds the guard")]
    EnumerationGuard(u128),

    #[error("rootedtrees: {0}")]
    Tree(String),

    #[error("rootedtrees: integer overflow in {0}")]
    Overflow(&'static str),

    #[error("limit: {0}")]
    Limit(String),

    #[error("experiments: {0}")]
    Experiment(String),
}
