//! Experiment configuration files (TOML).
//!
//! ```toml
//! seed = 7
//! scheme = "strip"        # strip | keep | pos-pair
//! eps = 0.1
//!
//! [pool]
//! treebanks = ["data/en.conllu", "data/de.conllu"]   # relative to this file
//!
//! [augment]               # optional synthetic training languages
//! all = false             # every (substrate, verb, noun) combination
//! languages = [{ substrate = "en", verb = "de" }]
//!
//! [cv]
//! folds = 5
//! jobs = 1
//!
//! [model]                 # what `train` fits
//! spec = { kind = "hand", depth = 1, hidden = 128 }
//! train = { epochs = 50, dropout = 0.4 }
//!
//! [[grid]]                # what `cv` compares
//! name = "hand"
//! method = "trained"
//! spec = { kind = "hand" }
//! train = { epochs = 50 }
//!
//! [[grid]]
//! name = "ec"
//! method = "ec"
//! window = "8"
//! scheme = "strip"
//! max_len = 40
//! ```
//!
//! Omitted model, feature and training fields take their documented
//! defaults. The experiment seed overrides every `train.seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use typoscope_core::cv::{GridPoint, Method};
use typoscope_core::synth::HeadCategories;
use typoscope_core::train::{ModelSpec, TrainConfig};
use typoscope_core::typology::RelationScheme;

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub scheme: Option<RelationScheme>,
    #[serde(default)]
    pub eps: Option<f64>,
    pub pool: PoolConfig,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub model: Option<TrainedPoint>,
    #[serde(default)]
    pub grid: Vec<GridEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    pub treebanks: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    #[serde(default)]
    pub all: bool,
    #[serde(default)]
    pub languages: Vec<AugmentEntry>,
    #[serde(default)]
    pub heads: HeadCategories,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentEntry {
    pub substrate: String,
    #[serde(default)]
    pub verb: Option<String>,
    #[serde(default)]
    pub noun: Option<String>,
}

fn default_folds() -> usize {
    5
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: default_folds(), jobs: default_jobs() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedPoint {
    pub spec: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub name: String,
    #[serde(flatten)]
    pub method: Method,
}

impl ExperimentConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            Error::parse(source_name, line, e.message().to_string())
        })
    }

    /// Reads a config file and resolves treebank paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&read_to_string(path)?, &path.display().to_string())?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in &mut cfg.pool.treebanks {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Grid points with `seed` written into every training config.
    pub fn grid_points(&self, seed: u64) -> Result<Vec<GridPoint>> {
        if self.grid.is_empty() {
            return Err(Error::Config("config has no [[grid]] entries".into()));
        }
        Ok(self
            .grid
            .iter()
            .map(|g| {
                let mut method = g.method.clone();
                if let Method::Trained { train, .. } = &mut method {
                    train.seed = seed;
                }
                GridPoint { name: g.name.clone(), method }
            })
            .collect())
    }
}

/// Global settings after applying command-line flags, the environment and
/// the config file, in that order of precedence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub scheme: RelationScheme,
    pub eps: f64,
}

pub const SEED_ENV: &str = "TYPOSCOPE_SEED";

impl Resolved {
    pub fn new(
        flag_seed: Option<u64>,
        flag_scheme: Option<RelationScheme>,
        flag_eps: Option<f64>,
        cfg: Option<&ExperimentConfig>,
    ) -> Result<Self> {
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Usage(format!("{SEED_ENV}={v:?} is not a 64-bit unsigned integer")))?,
            ),
            Err(_) => None,
        };
        let seed = flag_seed.or(env_seed).or(cfg.and_then(|c| c.seed)).unwrap_or(0);
        let scheme = flag_scheme.or(cfg.and_then(|c| c.scheme)).unwrap_or_default();
        let eps = flag_eps.or(cfg.and_then(|c| c.eps)).unwrap_or(typoscope_core::eval::DEFAULT_EPS);
        if !(eps >= 0.0) {
            return Err(Error::Usage(format!("eps must be non-negative, got {eps}")));
        }
        Ok(Resolved { seed, scheme, eps })
    }
}
