use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed step function: {0}")]
    MalformedStepFunction(String),
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("overlapping intervals on ray {ray}: [{a}, {b}) and [{c}, {d})")]
    Overlap {
        ray: usize,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    #[error("negative level {0} for a maximal-function level set")]
    NegativeLevel(f64),
    #[error("function vanishes almost everywhere")]
    ZeroFunction,
    #[error("malformed partition: {0}")]
    MalformedPartition(String),
    #[error("instance too large: {0}")]
    SizeGuard(String),
    #[error("ball {outer} contains ball {inner}; filter the family first")]
    Containment { outer: usize, inner: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
