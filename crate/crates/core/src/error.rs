use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The target sits on the reference point's Y-axis line, so the
    /// elevation angle is undefined.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    /// A caller broke a documented precondition (dimension mismatch,
    /// non-unit-modulus phase vector, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Configuration failed validation; the list holds one message per
    /// offending field, prefixed with its dotted path.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    /// A scripted scene event referenced a target that is not alive.
    #[error("scene event at period {period}: {reason}")]
    SceneEvent { period: usize, reason: String },

    /// Sub-beam gains cancelled to an all-zero beam.
    #[error("sub-beam combination cancelled to zero")]
    CancellingBeams,

    #[error("no sub-beams to combine")]
    NoSubBeams,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
