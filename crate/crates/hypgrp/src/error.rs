use thiserror::Error;

/// Crate-wide error type. Domain errors are deliberately descriptive: the CLI
/// surfaces them verbatim.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("alphabet mismatch: operands use different alphabets")]
    AlphabetMismatch,
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("malformed word token `{0}`")]
    MalformedToken(String),
    #[error("malformed exponent in token `{0}`")]
    MalformedExponent(String),
    #[error("invalid generator name `{0}` (expected [a-z][a-z0-9_]*)")]
    InvalidGeneratorName(String),
    #[error("duplicate generator name `{0}`")]
    DuplicateGeneratorName(String),
    #[error("generator name collision: `{0}` already present")]
    NameCollision(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("presentation is not C'({0}): piece `{1}` of length {2} in relator of length {3}")]
    NotSmallCancellation(String, String, usize, usize),
    #[error("endomorphism is not injective (image rank {rank} < alphabet size {expected})")]
    NotInjective { rank: usize, expected: usize },
    #[error("generators are not independent; no basis expression exists")]
    NotIndependent,
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("rejected: {0}")]
    Rejected(String),
}

pub type Result<T> = std::result::Result<T, Error>;
