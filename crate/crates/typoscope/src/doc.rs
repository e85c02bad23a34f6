//! Versioned JSON documents. Every document carries a `format_version`
//! string `MAJOR.MINOR`; readers accept any minor version of the major
//! version they know and reject the rest.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_VERSION: &str = "1.0";

#[derive(Deserialize)]
struct VersionProbe {
    format_version: String,
    kind: String,
}

/// Parses a document after checking its version and `kind`.
pub fn from_json<T: DeserializeOwned>(text: &str, source_name: &str, kind: &str) -> Result<T> {
    let probe: VersionProbe = serde_json::from_str(text)
        .map_err(|e| Error::parse(source_name, Some(e.line()), format!("not a typoscope document: {e}")))?;
    let major = probe
        .format_version
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok());
    if major != Some(FORMAT_MAJOR) {
        return Err(Error::parse(
            source_name,
            None,
            format!("unsupported format_version {:?} (this build reads {FORMAT_MAJOR}.x)", probe.format_version),
        ));
    }
    if probe.kind != kind {
        return Err(Error::parse(source_name, None, format!("expected a {kind} document, found {}", probe.kind)));
    }
    serde_json::from_str(text).map_err(|e| Error::parse(source_name, Some(e.line()), e.to_string()))
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

/// Predicted directionality for one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDoc {
    pub format_version: String,
    pub kind: String,
    pub language: String,
    pub model: String,
    pub predictions: BTreeMap<String, f64>,
}

impl PredictionDoc {
    pub const KIND: &'static str = "prediction";

    pub fn new(language: &str, model: &str, predictions: BTreeMap<String, f64>) -> Self {
        PredictionDoc {
            format_version: FORMAT_VERSION.into(),
            kind: Self::KIND.into(),
            language: language.into(),
            model: model.into(),
            predictions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub name: String,
    pub mean_loss: f64,
}

/// Outcome of a cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummaryDoc {
    pub format_version: String,
    pub kind: String,
    pub seed: u64,
    pub eps: f64,
    pub folds: Vec<Vec<String>>,
    pub extras: Vec<String>,
    pub points: Vec<PointSummary>,
    pub best: String,
}

impl CvSummaryDoc {
    pub const KIND: &'static str = "cv-summary";
}
