use thiserror::Error;

/// Errors surfaced by the library.
///
/// `Defect` is reserved for situations the underlying theory rules out: if it
/// ever fires on a valid input, the construction code is wrong, not the input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain size mismatch: {0} vs {1}")]
    DomainMismatch(usize, usize),
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("digraph is not smooth: vertex {0} is a source or sink")]
    NotSmooth(usize),
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("generator {index} is not a bijection")]
    NotABijection { index: usize },
    #[error("generator {index} is not an automorphism: edge ({u},{v}) maps outside the edge set")]
    NotAnAutomorphism { index: usize, u: usize, v: usize },
    #[error("set is not proper (must be nonempty and not the full domain)")]
    NotProper,
    #[error("set is not reductionistic")]
    NotReductionistic,
    #[error("group closure exceeds cap of {0} elements")]
    ClosureCapExceeded(usize),
    #[error("guard violated: {0}")]
    Guard(String),
    #[error("unknown relation name: {0}")]
    UnknownRelation(String),
    #[error("precondition rejected: {0}")]
    Precondition(String),
    #[error("internal defect (should be impossible on valid input): {0}")]
    Defect(String),
}

pub type Result<T> = std::result::Result<T, Error>;
