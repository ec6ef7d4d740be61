//! Sparse linear regression with the LASSO, the Dantzig Selector and their
//! transductive generalizations for an arbitrary target matrix `A`.
pub mod assumptions;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
