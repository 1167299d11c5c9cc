//! Stabilized primal-dual space-time finite elements for unique continuation of the
//! one-dimensional wave equation.

pub mod error;
pub mod experiments;
pub mod forms;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};
