//! Attention-based graph neural networks for wind-farm power prediction.
//!
//! The crate bundles everything needed to run desk-scale experiments end to
//! end: a Jensen-type wake simulator that generates labelled datasets, a
//! graph builder that turns farm scenarios into directed wind graphs, a
//! modular graph block where scaled dot-product attention can be switched on
//! at any of five sites, BLSTM/MLP/layout-blind baselines, and a training and
//! evaluation harness with attention-weight inspection.

pub mod baselines;
pub mod checkpoint;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod nn;
pub mod svg;
pub mod tape;
pub mod train;
pub mod tensor;
pub mod wake;

pub use error::{Error, Result};
pub use tensor::Tensor;
