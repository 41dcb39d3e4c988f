//! Kernel ν-SVM with mined linear prior rules.
//!
//! The pipeline: parse and scale data ([`dataset`]), mine one linear rule
//! per class ([`prior_miner`]), train a ν-SVM whose objective penalizes
//! violations of those rules at the training points ([`ptsm`]), and
//! compare against the plain model over repeated splits
//! ([`model_selection`]).

pub mod cli;
pub mod dataset;
pub mod error;
pub mod kernel;
pub mod model_selection;
pub mod prior_miner;
pub mod ptsm;
pub mod qp;
pub mod stats;
pub mod svm;

pub use error::{PrismError, Result};
