//! openqdyn: reduced-state dynamics toolkit for small system-environment
//! models. Provides forward evolution of a system state under a joint
//! unitary, structural classification of two-qubit gates, feasibility
//! solvers over initial-state classes, and correlation witnesses built
//! from system-only data.

pub mod error;
pub mod gates;
pub mod genmodel;
pub mod linalg;
pub mod magic;
pub mod optim;
pub mod scenario;
pub mod states;
pub mod witness;

pub use error::{QdynError, Result};
pub use gates::UnitaryGate;
pub use states::DensityMatrix;

/// Crate version baked into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
