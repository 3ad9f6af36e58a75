use thiserror::Error;

/// Errors raised across the workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dispersion vanishes at k = ({0}, {1}); the band basis is undefined there")]
    DegenerateFermiPoint(f64, f64),
    #[error("scale {h} outside the window [{lo}, {hi}]")]
    ScaleOutOfRange { h: i32, lo: i32, hi: i32 },
    #[error("polynomials live on different generator universes")]
    UniverseMismatch,
    #[error("universe of {size} generators exceeds the exact limit {limit}")]
    UniverseTooLarge { size: usize, limit: usize },
    #[error("momentum is not on the lattice grid")]
    MomentumNotOnGrid,
    #[error("lattice L = {l} exceeds the exact-diagonalization cap {cap}")]
    LatticeTooLarge { l: usize, cap: usize },
    #[error("finite-difference scan found no stable plateau")]
    DifferentiationUnstable,
    #[error("subset chain is incompatible with the anchored tree")]
    IncompatibleChain,
    #[error("matrix has no Gram factorization")]
    NotGramFactored,
    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
}

pub type Result<T> = std::result::Result<T, CrgError>;
