//! Benchmark for binary connectivity-graph inference with a known ground truth.
//!
//! The pipeline generates correlation (or precision) matrices whose zero
//! pattern follows a random chordal graph of prescribed density and whose
//! nonzero coefficients have a prescribed mean, simulates Gaussian samples
//! from them, estimates connectivity measures, binarizes them with a range of
//! edge-detection methods and scores the result against the known graph.

pub mod bench;
pub mod chordal;
pub mod detect;
pub mod error;
pub mod estimators;
pub mod gauss;
pub mod matrix_text;
pub mod metrics;
pub mod psdgen;
pub mod symlin;

pub use chordal::Adjacency;
pub use error::{Error, Result};
pub use gauss::{Mode, SampleSet};
pub use symlin::SymMatrix;
