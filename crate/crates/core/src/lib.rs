//! Mixed-precision iterative refinement with GMRES and recycling GCRO-DR
//! correction solvers, over simulated half/single/double/quad arithmetic.

pub mod densela;
pub mod error;
pub mod gcrodr;
pub mod gmres;
pub mod harness;
pub mod matgen;
pub mod precision;
pub mod refine;
mod serde_nan;

pub use error::{Error, Result};
