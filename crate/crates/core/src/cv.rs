//! Cross-validation over languages with grid search.
//!
//! Languages in the pool are split into folds. Optional extra languages
//! (typically synthetic ones) join a fold's training set only when every
//! language they were derived from is itself on the training side, so no
//! information about a held-out language leaks into training.
//!
//! Held-out languages are scored by predicting their directionality from
//! their own tag sequences and comparing with their gold vector.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::corpus::Treebank;
use crate::ec::{ec_predict, ec_train, Window};
use crate::error::{Error, Result};
use crate::eval::{aggregate_loss, Prediction};
use crate::rng::{stream, Stream};
use crate::scorer::with_unk_fallback;
use crate::train::{train, Language, ModelSpec, TrainConfig};
use crate::typology::RelationScheme;

/// How a grid point produces predictions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "method", rename_all = "lowercase"))]
pub enum Method {
    Trained { spec: ModelSpec, train: TrainConfig },
    /// The expected-count baseline, trained and applied on sentences of at
    /// most `max_len` tokens.
    Ec { window: Window, scheme: RelationScheme, max_len: Option<usize> },
    /// Predicts 0.5 for every relation.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub name: String,
    pub method: Method,
}

/// Where an extra language came from.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    pub id: String,
    pub substrate: String,
    pub superstrates: Vec<String>,
}

impl Provenance {
    pub fn sources(&self) -> impl Iterator<Item = &str> {
        core::iter::once(self.substrate.as_str()).chain(self.superstrates.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    folds: Vec<Vec<String>>,
    extras: Vec<Provenance>,
}

impl FoldPlan {
    /// Folds must be non-empty and pairwise disjoint; extra ids must be
    /// unique and distinct from pool ids.
    pub fn new(folds: Vec<Vec<String>>, extras: Vec<Provenance>) -> Result<Self> {
        if folds.len() < 2 {
            return Err(Error::Config("cross-validation needs at least two folds".into()));
        }
        let mut seen = BTreeSet::new();
        for (k, fold) in folds.iter().enumerate() {
            if fold.is_empty() {
                return Err(Error::Config(format!("fold {k} is empty")));
            }
            for id in fold {
                if !seen.insert(id.as_str()) {
                    return Err(Error::Config(format!("language {id} is in more than one fold")));
                }
            }
        }
        for e in &extras {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Config(format!("extra language {} duplicates another id", e.id)));
            }
        }
        Ok(FoldPlan { folds, extras })
    }

    /// Shuffles `ids` with the seed's fold stream and deals them into `k`
    /// folds.
    pub fn dealt(ids: &[String], k: usize, seed: u64, extras: Vec<Provenance>) -> Result<Self> {
        if k < 2 || k > ids.len() {
            return Err(Error::Config(format!("cannot split {} languages into {k} folds", ids.len())));
        }
        let mut order = ids.to_vec();
        order.sort();
        order.shuffle(&mut stream(seed, Stream::Folds));
        let mut folds = alloc::vec![Vec::new(); k];
        for (i, id) in order.into_iter().enumerate() {
            folds[i % k].push(id);
        }
        FoldPlan::new(folds, extras)
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    pub fn folds(&self) -> &[Vec<String>] {
        &self.folds
    }

    pub fn extras(&self) -> &[Provenance] {
        &self.extras
    }

    pub fn held_out(&self, fold: usize) -> &[String] {
        &self.folds[fold]
    }

    /// Pool languages on the training side of `fold`, in fold order.
    pub fn train_ids(&self, fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != fold)
            .flat_map(|(_, f)| f.iter().map(String::as_str))
            .collect()
    }

    /// Extra languages whose substrate and superstrates all lie on the
    /// training side of `fold`.
    pub fn admitted(&self, fold: usize) -> Vec<&Provenance> {
        let train: BTreeSet<&str> = self.train_ids(fold).into_iter().collect();
        self.extras
            .iter()
            .filter(|e| e.sources().all(|s| train.contains(s)))
            .collect()
    }

    /// Checks that the folds cover exactly the ids in `pool`.
    pub fn check_covers(&self, pool: &[Language]) -> Result<()> {
        let planned: BTreeSet<&str> = self.folds.iter().flatten().map(String::as_str).collect();
        let have: BTreeSet<&str> = pool.iter().map(Language::id).collect();
        if planned != have {
            return Err(Error::Config("folds do not cover the language pool exactly".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub point: usize,
    pub fold: usize,
    pub language: String,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub points: Vec<String>,
    /// Sorted by point, fold, language.
    pub rows: Vec<CvRow>,
    /// Mean held-out loss per grid point.
    pub mean_loss: Vec<f64>,
    /// Index of the point with the lowest mean loss (first on ties).
    pub best: usize,
}

impl CvReport {
    pub fn from_rows(points: Vec<String>, mut rows: Vec<CvRow>) -> Self {
        rows.sort_by(|a, b| (a.point, a.fold, &a.language).cmp(&(b.point, b.fold, &b.language)));
        let mut sums = alloc::vec![(0.0, 0usize); points.len()];
        for r in &rows {
            sums[r.point].0 += r.loss;
            sums[r.point].1 += 1;
        }
        let mean_loss: Vec<f64> = sums
            .iter()
            .map(|&(s, n)| if n == 0 { f64::NAN } else { s / n as f64 })
            .collect();
        let mut best = 0;
        for (i, &m) in mean_loss.iter().enumerate() {
            if m < mean_loss[best] || mean_loss[best].is_nan() {
                best = i;
            }
        }
        CvReport { points, rows, mean_loss, best }
    }
}

/// Predictions for `target`, one per gold relation.
fn predict_one(method: &Method, train_langs: &[&Language], target: &Language, trained: Option<&crate::scorer::Model>) -> Result<Prediction> {
    let gold_rels = target.gold.relations();
    Ok(match method {
        Method::Trained { .. } => {
            let model = trained.expect("trained model");
            with_unk_fallback(&model.predict(&target.corpus)?, gold_rels)
        }
        Method::Ec { window, scheme, max_len } => {
            let filter = |tb: &Treebank| match max_len {
                Some(n) => tb.length_filtered(*n),
                None => Some(tb.clone()),
            };
            let tbs: Vec<Treebank> = train_langs.iter().filter_map(|l| filter(&l.treebank)).collect();
            let model = ec_train(&tbs, *scheme, *window);
            let corpus = match max_len {
                Some(n) => target.corpus.length_filter(*n),
                None => target.corpus.clone(),
            };
            let pred = if corpus.is_empty() { Prediction::new() } else { ec_predict(&model, &corpus)? };
            gold_rels.map(|r| (r.into(), pred.get(r).copied().unwrap_or(0.5))).collect()
        }
        Method::Uniform => gold_rels.map(|r| (r.into(), 0.5)).collect(),
    })
}

/// Trains grid point `point` on the training side of `fold` and scores each
/// held-out language. Independent cells may run in parallel.
pub fn cv_cell(
    pool: &[Language],
    extras: &[Language],
    plan: &FoldPlan,
    grid: &[GridPoint],
    point: usize,
    fold: usize,
    eps: f64,
) -> Result<Vec<CvRow>> {
    let by_id: BTreeMap<&str, &Language> = pool.iter().chain(extras).map(|l| (l.id(), l)).collect();
    let lookup = |id: &str| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::Config(format!("language {id} is not loaded")))
    };
    let held: Vec<&Language> = plan.held_out(fold).iter().map(|id| lookup(id)).collect::<Result<_>>()?;
    let mut train_langs: Vec<&Language> = plan.train_ids(fold).into_iter().map(lookup).collect::<Result<_>>()?;
    let held_ids: BTreeSet<&str> = held.iter().map(|l| l.id()).collect();
    for e in plan.admitted(fold) {
        if e.sources().any(|s| held_ids.contains(s)) {
            return Err(Error::Config(format!("extra language {} leaks a held-out language", e.id)));
        }
        train_langs.push(lookup(&e.id)?);
    }
    if train_langs.is_empty() {
        return Err(Error::Config(format!("fold {fold} has no training languages")));
    }
    let method = &grid[point].method;
    let trained = match method {
        Method::Trained { spec, train: cfg } => Some(train(&train_langs, spec, cfg)?.model),
        _ => None,
    };
    held.iter()
        .map(|l| {
            let pred = predict_one(method, &train_langs, l, trained.as_ref())?;
            Ok(CvRow {
                point,
                fold,
                language: l.id().into(),
                loss: aggregate_loss(&pred, &l.gold, eps)?.aggregate_loss,
            })
        })
        .collect()
}

/// Runs every (grid point, fold) cell sequentially and reports per-point
/// mean held-out loss and the argmin point.
pub fn cross_validate(
    pool: &[Language],
    extras: &[Language],
    plan: &FoldPlan,
    grid: &[GridPoint],
    eps: f64,
) -> Result<CvReport> {
    plan.check_covers(pool)?;
    if grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    let mut rows = Vec::new();
    for point in 0..grid.len() {
        for fold in 0..plan.len() {
            rows.extend(cv_cell(pool, extras, plan, grid, point, fold, eps)?);
        }
    }
    Ok(CvReport::from_rows(grid.iter().map(|g| g.name.clone()).collect(), rows))
}
