//! Periodic spring lattices in the plane with an orientation penalty on
//! triangles: energies on scaled lattices, the homogenized cell problem,
//! zero-energy mechanisms and constructive energy bounds.

pub mod error;
pub mod geometry;
pub mod lattice;
pub mod fit;
pub mod linearize;
pub mod energy;
pub mod optim;
pub mod cellproblem;
pub mod analysis;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
