use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by cascade construction, moment computation and the
/// verification instruments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid base b = {b}, need an integer b >= 2")]
    InvalidBase { b: u32 },

    #[error("invalid exponent H = {h}, need H in [-inf, 1]")]
    InvalidExponent { h: f64 },

    #[error("{what} needs {requested} cells, above the guard of {limit}")]
    Capacity {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("H = {h} is outside the {expected} regime")]
    WrongRegime { h: f64, expected: &'static str },

    #[error("refinement level mismatch: path level {path_level}, child signs level {signs_level}")]
    Refinement { path_level: u32, signs_level: u32 },

    #[error("base mismatch: path base {path_b}, signs base {signs_b}")]
    BaseMismatch { path_b: u32, signs_b: u32 },

    #[error("path is undefined at H = -inf; use the walk reformulation instead")]
    UndefinedPath,

    #[error("t = {t} is outside [0, 1]")]
    OutOfDomain { t: f64 },

    #[error("sample of size {len} is below the minimum {min}")]
    UndersizedSample { len: usize, min: usize },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("degenerate regression window jmin = {jmin}, jmax = {jmax} at level {level}")]
    DegenerateWindow { jmin: u32, jmax: u32, level: u32 },

    #[error("moment order q = {q} above the cap {cap}")]
    MomentOrder { q: u32, cap: u32 },

    #[error("gridpoint t = {t} is not on the generation-{level} grid")]
    OffGrid { t: f64, level: u32 },
}
