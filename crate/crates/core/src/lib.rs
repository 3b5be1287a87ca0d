//! Perturbed Bessel operators with complex order.

pub mod error;
pub mod model;
pub mod specfun;
pub mod unperturbed;
pub mod solutions;
pub mod volterra;
pub mod jost;
pub mod boundary;

pub use error::{Error, ErrorCategory, Result};
pub use specfun::C64;
