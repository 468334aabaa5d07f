use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Syntax error while parsing a formula; `pos` is a byte offset.
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// A point id that is not part of the space at hand.
    #[error("unknown point {0}")]
    UnknownPoint(u32),

    /// A nominal mentioned by a formula that the model does not interpret.
    #[error("unknown nominal '{0}")]
    UnknownNominal(String),

    /// Space construction or validation failed.
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    /// Relation handed in where a preorder was required.
    #[error("relation is not a preorder: {0}")]
    NotPreorder(String),

    /// Model invariant violated.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Quasi-model or Hintikka-set invariant violated.
    #[error("invalid quasi-model: {0}")]
    InvalidQuasiModel(String),

    /// A map between spaces is missing entries or hits unknown points.
    #[error("invalid map: {0}")]
    InvalidMap(String),

    /// Operation precondition violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The engine's fixed capacity (64 points, 128 closure formulas) was hit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Malformed JSON input.
    #[error("bad input: {0}")]
    BadInput(String),

    /// The requested space class cannot be used for this formula.
    #[error("class mismatch: {0}")]
    ClassMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
