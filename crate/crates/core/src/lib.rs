//! Verification and reconstruction of second-order (conformally) superintegrable
//! systems on 2D surfaces in isothermal coordinates.

pub mod catalog;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod flatspace;
pub mod integrability;
pub mod reconstruct;
pub mod sphere;
pub mod structure;
pub mod surface;

pub use error::{DomainError, Error, Result};
pub use fields::{ChartPoint, Expr, Var};
