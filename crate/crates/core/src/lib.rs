//! Numerical toolkit for weighted norm inequalities on a one-dimensional
//! dyadic grid: Young functions and Luxemburg averages, generalized
//! maximal operators, weight-class constants, a truncated Hilbert transform
//! with its commutators, and weighted Calderón–Zygmund decompositions.

pub mod czdecomp;
pub mod czo;
pub mod error;
pub mod families;
pub mod harness;
pub mod lattice;
pub mod orlicz;
pub mod weights;
pub mod young;

pub use error::{Error, Result};
pub use families::Family;
pub use harness::{ExperimentConfig, InequalityReport, TheoremId};
pub use lattice::{DyadicCube, Grid, SampledFunction};
pub use young::YoungSpec;
