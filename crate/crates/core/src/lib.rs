//! Adaptive P1 finite elements for elliptic problems forced by a line
//! Dirac measure on an immersed curve, approximated by mollification.

pub mod afem;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod fem;
pub mod forcing;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod vtk;

pub use error::{Error, Result};
