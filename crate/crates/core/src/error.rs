use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The second interval runs past the end of the stream.
    #[error("geometry overflow: t3 = {t3} is not below n = {n} (ell = {ell}, t = {t})")]
    GeometryOverflow {
        n: u128,
        ell: u128,
        t: u128,
        t3: u128,
    },

    #[error("brute-force oracle refused length {len} (limit {limit})")]
    OracleScaleExceeded { len: usize, limit: usize },

    #[error("no valid permutation: the strings have different numbers of ones")]
    NoValidPermutation,

    #[error("construction infeasible: {0}")]
    ConstructionInfeasible(String),

    #[error("corrupt instance at offset {k}: {detail}")]
    CorruptInstance { k: usize, detail: String },

    #[error("decode failure at offset {k}, block {j}: {detail}")]
    DecodeFailure { k: usize, j: usize, detail: String },

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("exhaustive enumeration refused: width {width} exceeds cap {cap}")]
    WidthOverCap { width: usize, cap: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
