use std::fmt;

use crate::fields::{Expr, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Pole,
    LogZero,
    NonFinite,
    Transcendental,
    UnboundParam,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::Pole => "division by zero",
            DomainKind::LogZero => "log of zero",
            DomainKind::NonFinite => "non-finite value",
            DomainKind::Transcendental => "transcendental node in exact mode",
            DomainKind::UnboundParam => "unbound parameter",
        })
    }
}

/// Evaluation left the domain of a field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} in `{expr}` at ({x}, {y})")]
pub struct DomainError {
    pub kind: DomainKind,
    /// Offending subexpression, truncated for display.
    pub expr: String,
    pub x: f64,
    pub y: f64,
}

impl DomainError {
    pub fn new(kind: DomainKind, e: &Expr, x: f64, y: f64) -> Self {
        let mut s = e.to_string();
        if s.len() > 160 {
            let mut cut = 157;
            while !s.is_char_boundary(cut) {
                cut -= 1;
            }
            s.truncate(cut);
            s.push_str("...");
        }
        DomainError { kind, expr: s, x, y }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("field `{0}` must be real-valued")]
    NotReal(String),
    #[error("system is not proper: max |tau| = {max_tau:e}")]
    NotProper { max_tau: f64 },
    #[error("chart is not in flat gauge")]
    NotFlatGauge,
    #[error("{excluded} of {total} grid points are singular")]
    TooManyExclusions { excluded: usize, total: usize },
    #[error("integrator step failure at sigma = {sigma}")]
    StepFailure { sigma: f64 },
    #[error("path left the domain at ({x}, {y})")]
    DomainExit { x: f64, y: f64 },
    #[error("seed violates the algebraic conditions: remn = {remn:e}, dremn = {dremn:e}")]
    SeedObstruction { remn: f64, dremn: f64 },
    #[error("chart undefined at the north pole")]
    NorthPole,
    #[error("singular denominator p(1,-1) = 0")]
    SingularDenominator,
}

pub type Result<T> = std::result::Result<T, Error>;
