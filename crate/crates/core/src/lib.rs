//! Graph-to-MLP knowledge distillation with structural propagation.
//!
//! The crate is organised bottom-up: [`graph`] and [`propagation`] hold the
//! sparse operators, [`nn`] the dense network machinery, [`teacher`] and
//! [`distill`] the two training stages, [`datasets`] the loaders and
//! generators, [`theory`] the brute-force checks of the correction bound,
//! and [`harness`] the experiment runner behind the `pnd` binary.

pub mod datasets;
pub mod distill;
pub mod error;
pub mod graph;
pub mod harness;
pub mod matrix;
pub mod nn;
pub mod propagation;
pub mod rng;
pub mod teacher;
pub mod theory;

pub use error::{Error, Result};
pub use graph::{NormalizedAdjacency, SparseGraph};
pub use matrix::DenseMatrix;
pub use propagation::{ProbMatrix, PropagationConfig};
pub use rng::RngStream;
