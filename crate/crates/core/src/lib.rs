//! Predicting the word-order directionality of dependency relations from
//! POS-tag sequences.
//!
//! This crate holds the algorithmic core and is `no_std` (it needs `alloc`).
//! File formats, the CLI and parallel experiment execution live in the
//! `typoscope` crate.
//!
//! The pipeline, bottom up:
//!
//! * [`corpus`]: treebanks, tag sequences, boundary augmentation.
//! * [`typology`]: gold directionality vectors and cross-language statistics.
//! * [`eval`]: the frequency-weighted ε-insensitive loss and binary accuracy.
//! * [`ec`]: the expected-count baseline.
//! * [`features`]: hand-engineered co-occurrence features.
//! * [`neural`]: a GRU sentence encoder with power-mean pooling.
//! * [`scorer`]: the feed-forward scoring network and its initialization.
//! * [`train`]: the training objective and optimizers.
//! * [`cv`]: cross-validation and grid search over languages.
//! * [`synth`]: synthetic languages by reordering dependents.
#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod corpus;
pub mod cv;
pub mod ec;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod neural;
pub mod params;
pub mod rng;
pub mod scorer;
pub mod synth;
pub mod train;
pub mod typology;

pub use error::{Error, Result};
