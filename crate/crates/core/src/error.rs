use thiserror::Error;

use crate::space::ValidationReport;

/// Errors raised by the library. Validation problems on raw input are
/// reported through [`ValidationReport`] rather than panicking.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(ValidationReport),

    #[error("resolution unavailable: block {block} cannot be split into {resolution} groups of equal conditional mass")]
    ResolutionUnavailable { resolution: usize, block: usize },

    #[error("dimension mismatch: expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("variable is not measurable with respect to the given partition (block {block})")]
    NotMeasurable { block: usize },

    #[error("value {value} at index {index} lies outside [{lo}, {hi}]")]
    OutOfRange {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid distortion: {0}")]
    InvalidDistortion(String),

    #[error("invalid scenario set: {0}")]
    InvalidScenarioSet(String),

    #[error("space too large: {outcomes} outcomes exceeds cap {cap}")]
    SpaceTooLarge { outcomes: usize, cap: usize },

    #[error("example defined for ξ ≥ 0: negative entry {value} at index {index}")]
    NegativePayoff { index: usize, value: f64 },

    #[error("not acceptable: u(x) = {value} < 0")]
    NotAcceptable { value: f64 },

    #[error("non-distortion base: operation requires a distortion utility")]
    NonDistortionBase,

    #[error("unsupported base utility for conditional evaluation: {0}")]
    UnsupportedBase(&'static str),

    #[error("pair is not commonotone: outcomes {0} and {1} are ordered oppositely")]
    NotCommonotone(usize, usize),

    #[error("point ({x}, {y}) lies outside W for m = {m}")]
    OutsideW { x: f64, y: f64, m: f64 },

    #[error("invalid filtration chain: {0}")]
    InvalidChain(String),

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
