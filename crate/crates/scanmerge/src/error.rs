use thiserror::Error;

/// Crate-wide error type.
///
/// Variants split into two classes: bad input (rejected before any work
/// starts) and processing failures (work started but could not finish).
/// [`Error::is_invalid_input`] distinguishes them for exit-code mapping.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mesh failed validation (degenerate facet, out-of-range index, ...).
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// A configuration or problem description failed validation.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// A file had the right extension but the wrong contents.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    /// Point sets too degenerate to determine a similarity transform.
    #[error("rank-deficient point configuration: {0}")]
    RankDeficient(String),

    /// Robust registration could not find an acceptable model.
    #[error("registration failed: {0}")]
    RegistrationFailed(String),

    /// A point to project lies at or behind the camera plane.
    #[error("point behind camera (z = {z})")]
    BehindCamera { z: f64 },

    /// No input point projects into the requested view.
    #[error("disjoint view: no point projects into the image")]
    DisjointView,

    /// The queried pixel has no filled depth.
    #[error("no depth at pixel ({u}, {v})")]
    NoDepth { u: u32, v: u32 },

    /// The queried pixel carries depth flagged unreliable by the edge mask.
    #[error("unreliable depth at pixel ({u}, {v})")]
    UnreliableDepth { u: u32, v: u32 },

    /// A pipeline stage failed.
    #[error("stage {stage} failed: {reason}")]
    Stage { stage: String, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    /// True when the error means the caller's input was unusable, as opposed
    /// to a failure while processing acceptable input.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::InvalidMesh(_)
                | Error::InvalidProblem(_)
                | Error::Format { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
