//! Isogeometric Galerkin assembly with interpolated stencil surrogates.
//!
//! The crate assembles stiffness, mass, biharmonic and Stokes matrices on
//! tensor-product B-spline and NURBS spaces, and replaces most of the
//! quadrature work by interpolating the translation-invariant stencil
//! functions of the interior rows.

pub mod assembly;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod problems;
pub mod sparse;
pub mod solvers;
pub mod spline;
pub mod surrogate;

pub use error::{Error, Result};
