//! Numerical toolkit for Sobolev extension and trace problems on closed
//! subsets of R^n: Whitney decompositions, maximal functions and A1 weights,
//! pre-metrics generated by weights and their geodesic regularizations,
//! McShane and Whitney extension operators, and trace-norm functionals.

pub mod error;
pub mod extension;
pub mod functions;
pub mod geometry;
pub mod grid;
pub mod maximal;
pub mod metrics;
pub mod poly;
pub mod sobolev;
pub mod trace;
pub mod window;

pub use error::{Error, Result};
pub use geometry::{Cube, PointSet, WhitneyDecomposition};
pub use grid::{Grid, ScalarField, WeightField};
