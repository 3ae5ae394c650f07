//! The chapters of the guide in `book/`, compiled so that `cargo test` runs
//! their examples.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/lattices.md")]
pub mod lattices {}
#[doc = include_str!("../../../book/src/energies.md")]
pub mod energies {}
#[doc = include_str!("../../../book/src/cell-problems.md")]
pub mod cell_problems {}
#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
