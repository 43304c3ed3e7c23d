//! Real-time HD-EMG gesture decoding.
//!
//! - [`pipeline`]: channel rejection, high-pass filtering, RMS, z-score, PCA
//! - [`classifier`]: the 10-class MLP, its training loop and evaluation
//! - [`bundle`]: the persisted model (pipeline + network + history)
//! - [`decoder`]: confidence filtering, majority voting and mode switching
//! - [`ingest`]: cue schedules, recordings, synthetic EMG and TCP streaming
//! - [`analysis`]: SNR, heatmaps, distance matrices, statistics, real-time harness

pub mod analysis;
pub mod bundle;
pub mod classifier;
pub mod decoder;
pub mod error;
pub mod gesture;
pub mod ingest;
pub mod pipeline;

pub use error::{Error, Result};
pub use gesture::{Gesture, NUM_GESTURES};
