//! Optimal stopping under smooth ambiguity about a finite set of scenarios.

pub mod ambiguity;
pub mod error;
pub mod experiments;
pub mod fd;
pub mod learning;
pub mod lsmc;
pub mod minimax;
pub mod scenario;

pub use ambiguity::{AmbiguityFunction, ExtendedValue};
pub use error::{Error, Result};
pub use scenario::SimplexPoint;
