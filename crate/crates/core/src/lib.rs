//! Structure recovery for discrete latent bipartite graphical models.
//!
//! A model links `J` categorical observed variables (`V` levels each) to `K`
//! categorical latent variables (`H` levels each) through a binary loading
//! matrix `G`. The crate builds such models (directed CPT families and
//! general RBMs), computes the exact joint probability tensor of the
//! observed layer, and recovers `K` and `G` from that tensor by unfolding it
//! into matrices and thresholding their ranks.
//!
//! Everything here is `no_std` + `alloc`; file formats, threading and the
//! command-line tool live in the `tui-cli` crate.
//!
//! Index convention used throughout: a configuration `(x_1, ..., x_m)` over
//! base `B` has code `sum_i x_i * B^(m-i)` (first coordinate most
//! significant), and variable groups are always sorted ascending before
//! encoding. Variable indices are 0-based.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod empirical;
mod error;
pub mod exec;
pub mod index;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod recover;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::{Executor, Serial};
pub use matrix::Matrix;
