//! A laboratory for the Clauser–Horne inequality.
//!
//! - [`model`]: hidden-variable spaces, response models, ensemble predictions.
//! - [`inequality`]: the quantity U, factorability defects, the CH statistic.
//! - [`determinize`]: auxiliary-variable embedding of stochastic models into
//!   deterministic ones.
//! - [`montecarlo`]: seeded, worker-count-independent estimation.
//! - [`cli`] and [`suite`]: the `bellch` command line.

pub mod cli;
pub mod determinize;
pub mod error;
pub mod inequality;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;
pub mod scan;
pub mod suite;

pub use error::{Error, Result};
