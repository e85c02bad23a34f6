//! The ε-insensitive evaluation metric and binary direction accuracy.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::typology::{binary_label, DirectionalityVector};

pub const DEFAULT_EPS: f64 = 0.1;
pub const DEFAULT_TOP_K: usize = 20;

/// Predicted rightward probability per relation.
pub type Prediction = BTreeMap<String, f64>;

/// `max(|p̂ − p*| − ε, 0)`
pub fn eps_loss(p_hat: f64, p_star: f64, eps: f64) -> f64 {
    let d = libm::fabs(p_hat - p_star) - eps;
    if d > 0.0 {
        d
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationLoss {
    /// `rel_freq · ℓ_ε`
    pub contribution: f64,
    pub predicted: f64,
    pub gold: f64,
    pub rel_freq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub relation: String,
    pub language: String,
    pub gold: f64,
    pub predicted: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryAccuracy {
    pub accuracy: f64,
    /// Relations actually evaluated; smaller than `requested` when the gold
    /// vector has fewer relations.
    pub evaluated: usize,
    pub requested: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub language_id: String,
    pub eps: f64,
    pub aggregate_loss: f64,
    pub per_relation: BTreeMap<String, RelationLoss>,
    pub binary: BinaryAccuracy,
    pub scatter_rows: Vec<ScatterRow>,
}

/// The frequency-weighted loss `Σ_r p*(r|L) · ℓ_ε(p̂_r, p*_r)`, with the
/// per-relation breakdown and binary accuracy over the 20 most frequent
/// relations. Predictions for relations absent from `gold` are ignored.
pub fn aggregate_loss(pred: &Prediction, gold: &DirectionalityVector, eps: f64) -> Result<EvalReport> {
    evaluate(pred, gold, eps, DEFAULT_TOP_K)
}

pub fn evaluate(
    pred: &Prediction,
    gold: &DirectionalityVector,
    eps: f64,
    top_k: usize,
) -> Result<EvalReport> {
    let mut per_relation = BTreeMap::new();
    let mut scatter_rows = Vec::with_capacity(gold.entries.len());
    let mut total = 0.0;
    for (r, st) in &gold.entries {
        let p = *pred.get(r).ok_or_else(|| Error::MissingPrediction(r.clone()))?;
        let contribution = st.rel_freq * eps_loss(p, st.p_right, eps);
        total += contribution;
        per_relation.insert(
            r.clone(),
            RelationLoss {
                contribution,
                predicted: p,
                gold: st.p_right,
                rel_freq: st.rel_freq,
            },
        );
        scatter_rows.push(ScatterRow {
            relation: r.clone(),
            language: gold.language_id.clone(),
            gold: st.p_right,
            predicted: p,
            weight: st.rel_freq,
        });
    }
    let binary = binary_accuracy(pred, gold, top_k)?;
    Ok(EvalReport {
        language_id: gold.language_id.clone(),
        eps,
        aggregate_loss: total,
        per_relation,
        binary,
        scatter_rows,
    })
}

/// Fraction of the `top_k` most frequent gold relations whose predicted side
/// of 0.5 matches the gold side.
pub fn binary_accuracy(
    pred: &Prediction,
    gold: &DirectionalityVector,
    top_k: usize,
) -> Result<BinaryAccuracy> {
    let ranked = gold.by_frequency();
    let chosen = &ranked[..top_k.min(ranked.len())];
    let mut agree = 0usize;
    for (r, st) in chosen {
        let p = *pred.get(*r).ok_or_else(|| Error::MissingPrediction((*r).into()))?;
        if binary_label(p) == binary_label(st.p_right) {
            agree += 1;
        }
    }
    let accuracy = if chosen.is_empty() {
        0.0
    } else {
        agree as f64 / chosen.len() as f64
    };
    Ok(BinaryAccuracy {
        accuracy,
        evaluated: chosen.len(),
        requested: top_k,
    })
}
