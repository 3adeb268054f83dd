//! Sparse polynomial chaos surrogates with sequential optimal experimental designs.

pub mod benchmarks;
pub mod design;
pub mod error;
pub mod input;
pub mod metrics;
pub mod pce;
pub mod quadrature;
pub mod sampling;

pub use error::{Error, Result};
