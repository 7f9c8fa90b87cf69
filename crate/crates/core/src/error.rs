use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownName { pos: usize, name: String },
    #[error("zero m-vector has no degree")]
    ZeroMVector,
    #[error("rank-deficient input: {0}")]
    RankDeficient(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("not strongly regular at the requested point (rank {rank}, l = {ell})")]
    NotStronglyRegular { rank: usize, ell: usize },
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),
    #[error("spec error in field `{field}`: {msg}")]
    Spec { field: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
