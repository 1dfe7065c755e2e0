use thiserror::Error;

use crate::model::ValidationReport;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// `p[index] > 0` while `q[index] = 0`: KL(p||q) is undefined.
    #[error("absolute continuity violated: p[{index}] = {p_mass} > 0 but q[{index}] = 0")]
    AbsoluteContinuity { index: usize, p_mass: f64 },

    /// A distribution (or kernel row) carries no mass at all.
    #[error("empty support: all probabilities are zero")]
    EmptySupport,

    /// A propagated marginal drifted away from total mass 1 beyond tolerance.
    #[error("marginal mass drifted to {mass} at stage {stage} (|mass - 1| > 1e-9)")]
    NumericalDrift { stage: usize, mass: f64 },

    /// Scenario failed validation; the report lists every violation.
    #[error("invalid scenario:\n{0}")]
    InvalidScenario(ValidationReport),

    /// Brute-force enumeration guard tripped.
    #[error("instance too large for exhaustive search: {policies:.3e} policies exceeds limit {limit:.0e}")]
    InstanceTooLarge { policies: f64, limit: f64 },

    /// Grid route cannot be realized within the horizon.
    #[error("infeasible route: {reason}")]
    InfeasibleRoute { reason: String },

    /// Scenario file is malformed; `location` names the offending field.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// Scenario file declares a schema version this build does not read.
    #[error("unsupported scenario schema version {found} (supported: {supported})")]
    SchemaVersion { found: u64, supported: u64 },

    /// Structural size disagreement between components.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
