use thiserror::Error;

/// Errors shared across the solver, analysis, and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("incomparable fields: kinds or frequency sets differ")]
    IncomparableFields,

    #[error("blow-up detected at t = {t:.6e} (sup norm {norm:.3e} exceeds threshold {threshold:.3e})")]
    BlowUp { t: f64, norm: f64, threshold: f64 },

    #[error("numerically zero function: sup norm {norm:.3e} is below tolerance {tol:.3e}")]
    NumericallyZero { norm: f64, tol: f64 },

    #[error("no stable radius: the function has a non-simple zero")]
    NoStableRadius,

    #[error("insufficient horizon: {cycles} reorthonormalization cycles, need at least {required}")]
    InsufficientHorizon { cycles: usize, required: usize },

    #[error("tangent frame collapse: vector norm underflow during evolution")]
    FrameCollapse,

    #[error("inhomogeneous trajectory: max |u_x| = {max_slope:.3e} exceeds {tol:.3e}")]
    InhomogeneousTrajectory { max_slope: f64, tol: f64 },

    #[error("insufficient recurrence sampling: best fiber has {members} returns, need {required}")]
    InsufficientRecurrence { members: usize, required: usize },

    #[error("no bounded omega-limit: C1 norm reached {norm:.3e}")]
    UnboundedOmega { norm: f64 },

    #[error("lambda = {lambda} is not an admissible eigenvalue; expected 0 or -1 (an eigenvalue -k^2)")]
    InvalidEigenvalue { lambda: f64 },

    #[error("mismatched trajectories: {0}")]
    MismatchedTrajectories(String),

    #[error("trajectories are not distinct: max C1 distance {0:.3e}")]
    IndistinctTrajectories(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
