//! Semi-supervised graph anomaly detection with adaptive frequency-response
//! filters.
//!
//! The pipeline: build a [`graph::Graph`], encode node features, propagate them
//! through learnable first-order spectral filters in a cross-channel and a
//! channel-wise view, train with one-class losses plus a contrastive alignment
//! between the views, then score unlabeled nodes by their distance to the
//! one-class centers.

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod seed;
pub mod spectral;
pub mod train;

pub use error::{Result, RhoError};
pub use graph::{node_homophily, Graph, HomophilyReport, SparseSymOp};
pub use model::{Activation, CwrFormula, ForwardState, ModelConfig, ModelParams};
