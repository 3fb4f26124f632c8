//! Numerical laboratory for one-sided harmonic analysis on the real line.
//!
//! Functions are piecewise constant on uniform grids ([`grid`]). On top of
//! that sit the one-sided maximal operators ([`maximal`]), Orlicz averages
//! ([`orlicz`]), one-sided singular and fractional integrals ([`operators`]),
//! square functions ([`squarefn`]), weight conditions ([`weights`]) and the
//! inequality harness that checks the pointwise and weighted estimates
//! empirically ([`verify`]).

pub mod error;
pub mod grid;
pub mod maximal;
pub mod operators;
pub mod orlicz;
pub mod squarefn;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use maximal::{Direction, WindowPolicy};
pub use grid::{
    geometric_partition, level_components, sample_function, CellSet, FunctionSpec, Grid,
    IntervalSpec, SampledFunction,
};

