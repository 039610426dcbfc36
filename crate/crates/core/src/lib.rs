//! Numerical homogenization of linear elasticity systems with periodic
//! coefficients and soft inclusions.

mod assembly;
pub mod cell;
pub mod config;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod field;
pub mod fit;
pub mod geometry;
pub mod grid;
pub mod homogenize;
pub mod plot;
pub mod regularity;
pub mod report;
pub mod sparse;
pub mod tensor;
pub mod twoscale;

pub use error::{Error, Result};
