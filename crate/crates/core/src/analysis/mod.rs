//! Energy bounds, growth and convexity checks for density estimates, and
//! recovery-sequence and soft-mode experiments.

mod bounds;
mod checks;
mod recovery;

pub use bounds::*;
pub use checks::*;
pub use recovery::*;
