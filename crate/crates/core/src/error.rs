use thiserror::Error;

/// Errors produced by taxonomy construction, the loss engine, evaluation and
/// the toy trainer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid class: {0}")]
    InvalidClass(String),

    /// A structural invariant of a collection, taxonomy or mapping does not hold.
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("ambiguous declaration at line {line}: {detail}")]
    AmbiguousDeclaration { line: usize, detail: String },

    #[error("inconsistent declaration at line {line}: {detail}")]
    InconsistentDeclaration { line: usize, detail: String },

    #[error("non-finite logit at index {0}")]
    InvalidLogit(usize),

    #[error("label maps to no universal class")]
    UnmappedLabel,

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("no class of dataset `{0}` intersects the ground-truth class")]
    OrthogonalDataset(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("invalid toy problem: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invariant(invariant: &'static str, detail: impl Into<String>) -> Error {
    Error::Invariant {
        invariant,
        detail: detail.into(),
    }
}
