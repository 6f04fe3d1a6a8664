//! Over-limit early-warning pipeline for flight-recorder time series.
//!
//! The crate covers the full path from raw recorder tables to live alerts:
//!
//! * [`qar`] parses recorder CSV tables, converts text flags to numeric
//!   codes, resamples sub-second rows to 1 Hz, and can synthesize seeded
//!   flight-like tables for testing.
//! * [`labeling`] marks over-limit seconds with a three-sigma rule on the
//!   monitored channel.
//! * [`features`] ranks candidate attributes by Spearman correlation with
//!   the labels and selects the informative ones.
//! * [`dataset`] normalizes rows, builds sliding windows, and produces
//!   deterministic train/test splits and cross-validation folds.
//! * [`lstm`] is a from-scratch two-layer peephole LSTM with a sigmoid
//!   output head.
//! * [`loss`] provides plain and cost-sensitive binary cross-entropy plus
//!   the confusion-matrix metrics used throughout.
//! * [`train`] runs exact backpropagation through time over each whole
//!   window, optimized with Adam.
//! * [`gridsearch`] cross-validates over time-step, unit-count, and
//!   learning-rate grids.
//! * [`model`] saves and loads trained networks together with everything
//!   inference needs (features, scaling, threshold).
//! * [`stream`] replays a table row by row and emits alert lines.
//! * [`config`] parses the one pipeline configuration file.
//! * [`cli`] wires everything into the `overlimit` binary.
//!
//! Class convention used everywhere: label 0 is the normal (positive)
//! class and label 1 is the over-limit (negative) class. Precision and
//! recall therefore describe the normal class; `overlimit_recall` is the
//! recall of class 1.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod gridsearch;
pub mod labeling;
pub mod loss;
pub mod lstm;
pub mod model;
pub mod qar;
pub mod stream;
pub mod train;
pub mod util;

pub use error::{Error, Result};
