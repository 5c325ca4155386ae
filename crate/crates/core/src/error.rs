use thiserror::Error;

/// Errors surfaced by the simulation library.
#[derive(Debug, Error)]
pub enum RuinError {
    /// A target direction does not point away from the drift (Assumption 2 fails).
    #[error("degenerate target direction {index}: eta'v = {eta_dot} >= 0")]
    DegenerateDirection { index: usize, eta_dot: f64 },

    /// A conditional jump was requested from a region of probability zero.
    #[error("conditional jump region has zero probability")]
    ZeroMassRegion,

    /// An evaluation point lies outside the domain of the limiting measure.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// A transition that the mixture kernel could not have produced.
    #[error("inconsistent transition: p_b = 1 but target state is outside the jump region")]
    InconsistentTransition,

    /// An operation was called outside its stated region of validity.
    #[error("precondition violation: {0}")]
    PreconditionViolation(String),

    /// The crude rejection oracle would need infeasibly many attempts.
    #[error("crude oracle infeasible: pilot hit frequency {pilot_freq:.3e} below floor {floor:.0e}")]
    InfeasibleOracle { pilot_freq: f64, floor: f64 },

    /// Too few conditioned paths to run a statistical comparison.
    #[error("insufficient sample: got {got}, need at least {need}")]
    InsufficientSample { got: usize, need: usize },

    /// The horizon cap truncated more than the tolerated fraction of paths.
    #[error("aborting: horizon overflow fraction {frac:.3e} exceeds 1e-3")]
    AbortOverflow { frac: f64 },

    /// Structural problem in a config document (unknown/duplicate key, bad type).
    #[error("schema error: {0}")]
    Schema(String),

    /// A config value violates a model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RuinError>;
