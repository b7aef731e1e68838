//! Open-system simulator for N incoherently pumped two-level emitters in a
//! lossy single-mode cavity.

pub mod cli;
pub mod cooperativity;
pub mod error;
pub mod model;
pub mod observables;
pub mod operator_algebra;
pub mod propagator;
pub mod steady_state;

pub use error::{Error, Result};
pub use model::{build_liouvillian, DensityMatrix, Liouvillian, SystemParams};
pub use operator_algebra::{HilbertLayout, LinearOperator, Site, SparseOperator, C64};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
