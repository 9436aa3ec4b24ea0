use thiserror::Error;

use crate::compensator::RegularityReport;
use crate::trajectory::TrajectoryViolation;
use crate::weights::PositivityViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid trajectory: {0}")]
    Trajectory(#[from] TrajectoryViolation),

    #[error("unknown mark or component `{0}`")]
    UnknownLabel(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("regularity violation: {0}")]
    Regularity(RegularityReport),

    #[error("intervention is not predictable: counterexample at t = {t}")]
    NotPredictable { t: f64 },

    #[error("exact tie at t = {t} between {first} and {second}")]
    Tie {
        t: f64,
        first: String,
        second: String,
    },

    #[error("explosion: more than {cap} events before the horizon (component `{component}` has {count})")]
    Explosion {
        cap: usize,
        component: String,
        count: usize,
    },

    #[error("positivity violation{}: {violation}", subject.map(|s| format!(" for subject {s}")).unwrap_or_default())]
    Positivity {
        subject: Option<usize>,
        violation: PositivityViolation,
    },

    #[error("positivity violation in the discrete scenario at variable {variable} (cell {cell})")]
    DiscretePositivity { variable: usize, cell: String },

    #[error("estimated positivity failure at variable {variable}: cell {cell} {reason}")]
    EstimatedPositivity {
        variable: usize,
        cell: String,
        reason: String,
    },

    #[error("regime unreachable: P(treatment history = regime) = 0")]
    RegimeUnreachable,

    #[error("enumeration too large: {needed} binary variables exceed the cap of {cap}")]
    EnumerationTooLarge { needed: usize, cap: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
