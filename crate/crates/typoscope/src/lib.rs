//! File formats, experiment configuration, parallel cross-validation and the
//! `typoscope` command line, on top of [`typoscope_core`].

pub mod cli;
pub mod config;
pub mod conllu;
pub mod doc;
mod error;
pub mod experiment;
pub mod model_file;
pub mod tsv;

pub use error::{Error, Result};
pub use typoscope_core;
