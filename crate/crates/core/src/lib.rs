//! Cycle-consistent embeddings of multi-image correspondence graphs.
//!
//! A graph convolutional network maps a noisy correspondence graph and its
//! node descriptors to an embedding `E` whose Gram matrix `E E^T` is a soft,
//! cycle-consistent match matrix. Training is unsupervised: an L1
//! reconstruction loss against the noisy adjacency, optionally plus an
//! epipolar side loss when camera poses are known at training time. Spectral,
//! alternating-least-squares and projected-gradient synchronization
//! baselines are included for comparison.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod gradcheck;
pub mod graph;
pub mod losses;
pub mod nn;
pub mod rng;
pub mod synth;
mod textio;
pub mod train;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use graph::CorrespondenceGraph;
pub use synth::{GroundTruth, MultiViewScene, SynthGraphSpec};
