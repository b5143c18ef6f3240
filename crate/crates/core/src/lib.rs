//! Finite coarse geometry: metric spaces, property-A witnesses, kernel
//! calculus, spectral expansion, finite groups and Følner-type optimization.

pub mod amenability;
pub mod error;
pub mod group;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod lp;
pub mod metric;
pub mod spectral;
pub mod witness;

pub use error::{Error, Result};
pub use metric::FiniteMetricSpace;

/// Version tag carried by every JSON document.
pub const SCHEMA: &str = "coarselab/1";
