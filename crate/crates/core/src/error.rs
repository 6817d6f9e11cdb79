use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidPmf(String),

    #[error("alphabet size mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("symbol {symbol} out of range for alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("sample contains symbols impossible under both hypotheses (log-likelihood ratio is both +inf and -inf)")]
    ConflictingInfinities,

    #[error("tilted family undefined: the two distributions have disjoint supports")]
    DisjointSupport,

    #[error("divergence between the hypotheses is infinite; exponent geometry requires a full shared support")]
    InfiniteDivergence,

    #[error("the two hypotheses are identical: {0}")]
    DegeneratePair(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample stream exhausted after {got} of {needed} required samples")]
    StreamExhausted { needed: usize, got: usize },

    #[error("{what}: {count} exceeds the enumeration guard of {limit}")]
    GuardExceeded { what: &'static str, count: f64, limit: f64 },

    #[error("zero probability at n = {n}: empirical exponent is +inf")]
    ZeroProbability { n: f64 },

    #[error("exponent unresolvable: {0}")]
    Unresolvable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
