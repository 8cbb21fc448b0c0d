//! One-shot entropies, approximate ground state projectors and certified
//! smoothed max-information bounds for small gapped spin chains.

pub mod agsp;
pub mod constructions;
pub mod entropy;
pub mod error;
pub mod linalg;
pub mod models;
pub mod pipeline;

pub use error::{Error, Result};
