//! Model files.
//!
//! A model file is a JSON document (see [`crate::doc`]) with
//! `"kind": "model"`. Its header records the architecture, the relation
//! catalog, the feature configuration and tag inventory, and the seed and
//! training settings. `blocks` then lists every parameter block in the
//! declared order:
//!
//! | model    | block order                                              |
//! |----------|----------------------------------------------------------|
//! | hand     | `hand.w1, hand.b1, …, hand.wd, hand.bd, hand.v, hand.b_v` |
//! | neural   | `gru.emb, gru.u_z, gru.u_r, gru.u_h, gru.w_z, gru.w_r, gru.w_h, gru.b_z, gru.b_r, gru.b_h`, then `neural.*` as for hand |
//! | combined | `hand.*`, then `gru.*`, then `neural.*`                   |
//!
//! Matrices are row-major: `w_i` is `hidden × fan_in`, `v` is
//! `relations × fan_in`, `emb` is `(tags + 1) × emb_size` with the
//! out-of-inventory row last, `u_*` are `rnn × emb` and `w_*` are
//! `rnn × rnn`. Each block's `data` is the base64 (standard alphabet,
//! padded) encoding of its values as consecutive little-endian IEEE-754
//! doubles, so a save/load round trip is bit-exact.
//!
//! Expected-count baseline models use `"kind": "ec-model"` and store their
//! link probabilities as `[head_tag, child_tag, relation, probability]`
//! rows, with `right` holding `t → t′` links and `left` holding `t ← t′`
//! links for tag pairs in linear order `t, t′`.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use typoscope_core::corpus::PosTag;
use typoscope_core::ec::{EcModel, TagPair, Window};
use typoscope_core::features::{FeatureCatalog, FeatureConfig, TagInventory};
use typoscope_core::neural::{GruParams, PoolingSpec};
use typoscope_core::params::ParamBlocks;
use typoscope_core::scorer::{
    Activation, CombinedModel, HandModel, Model, NeuralModel, ScorerShape, ScoringParams, UNK,
};
use typoscope_core::train::TrainConfig;
use typoscope_core::typology::RelationScheme;

use crate::doc::{from_json, to_json, FORMAT_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScorerHeader {
    input_dim: usize,
    depth: usize,
    hidden: usize,
    activation: Activation,
    relations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HandHeader {
    features: FeatureConfig,
    feature_count: usize,
    tags: Vec<String>,
    scorer: ScorerHeader,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NeuralHeader {
    tags: Vec<String>,
    emb_size: usize,
    rnn_size: usize,
    pooling: PoolingSpec,
    max_len: usize,
    scorer: ScorerHeader,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BlockRecord {
    name: String,
    len: usize,
    data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelDoc {
    format_version: String,
    kind: String,
    architecture: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    training: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    hand: Option<HandHeader>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    neural: Option<NeuralHeader>,
    blocks: Vec<BlockRecord>,
}

/// A model together with the settings it was produced with.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: Model,
    pub seed: u64,
    pub training: Option<TrainConfig>,
}

pub fn architecture(model: &Model) -> &'static str {
    match model {
        Model::Hand(_) => "hand",
        Model::Neural(_) => "neural",
        Model::Combined(_) => "combined",
    }
}

fn scorer_header(p: &ScoringParams) -> ScorerHeader {
    let shape = p.shape();
    ScorerHeader {
        input_dim: shape.input_dim,
        depth: shape.depth,
        hidden: shape.hidden,
        activation: shape.activation,
        relations: p.relations.clone(),
    }
}

fn tags(inv: &TagInventory) -> Vec<String> {
    inv.real().map(|t| t.to_string()).collect()
}

fn hand_header(m: &HandModel) -> HandHeader {
    HandHeader {
        features: m.features.clone(),
        feature_count: m.scorer.input_dim(),
        tags: tags(&m.inventory),
        scorer: scorer_header(&m.scorer),
    }
}

fn neural_header(m: &NeuralModel) -> NeuralHeader {
    NeuralHeader {
        tags: tags(&m.gru.inventory),
        emb_size: m.gru.emb_size(),
        rnn_size: m.gru.rnn_size(),
        pooling: m.pooling.clone(),
        max_len: m.max_len,
        scorer: scorer_header(&m.scorer),
    }
}

fn encode(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(data: &str, len: usize, name: &str, source: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(data)
        .map_err(|e| Error::parse(source, None, format!("block {name}: {e}")))?;
    if bytes.len() != 8 * len {
        return Err(Error::parse(source, None, format!("block {name}: {} bytes for {len} values", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn to_string(saved: &SavedModel) -> String {
    let m = &saved.model;
    let (hand, neural, alpha) = match m {
        Model::Hand(h) => (Some(hand_header(h)), None, None),
        Model::Neural(n) => (None, Some(neural_header(n)), None),
        Model::Combined(c) => (Some(hand_header(&c.hand)), Some(neural_header(&c.neural)), Some(c.alpha)),
    };
    let blocks = m
        .blocks()
        .into_iter()
        .map(|b| BlockRecord {
            name: b.name.into_owned(),
            len: b.values.len(),
            data: encode(b.values),
        })
        .collect();
    to_json(&ModelDoc {
        format_version: FORMAT_VERSION.into(),
        kind: "model".into(),
        architecture: architecture(m).into(),
        seed: saved.seed,
        alpha,
        training: saved.training.clone(),
        hand,
        neural,
        blocks,
    })
}

fn inventory(tags: &[String], source: &str) -> Result<TagInventory> {
    let tags = tags
        .iter()
        .map(|t| PosTag::new(t))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::parse(source, None, e.to_string()))?;
    Ok(TagInventory::new(tags))
}

fn zero_scorer(h: &ScorerHeader, source: &str) -> Result<ScoringParams> {
    if h.relations.last().map(String::as_str) != Some(UNK) {
        return Err(Error::parse(source, None, format!("relation catalog must end with {UNK}")));
    }
    let shape = ScorerShape { input_dim: h.input_dim, depth: h.depth, hidden: h.hidden, activation: h.activation };
    let p = ScoringParams::zeros(shape, h.relations[..h.relations.len() - 1].iter().cloned());
    if p.relations != h.relations {
        return Err(Error::parse(source, None, "relation catalog lists UNK twice"));
    }
    Ok(p)
}

fn zero_hand(h: &HandHeader, source: &str) -> Result<HandModel> {
    let inv = inventory(&h.tags, source)?;
    h.features.validate()?;
    let dim = FeatureCatalog::new(&h.features, &inv).len();
    if dim != h.feature_count || dim != h.scorer.input_dim {
        return Err(Error::parse(source, None, format!("feature count {} does not match the feature configuration ({dim})", h.feature_count)));
    }
    Ok(HandModel { features: h.features.clone(), inventory: inv, scorer: zero_scorer(&h.scorer, source)? })
}

fn zero_neural(h: &NeuralHeader, source: &str) -> Result<NeuralModel> {
    let inv = inventory(&h.tags, source)?;
    if h.scorer.input_dim != h.pooling.betas.len() * h.rnn_size {
        return Err(Error::parse(source, None, "neural scorer input does not match pooling size"));
    }
    Ok(NeuralModel {
        gru: GruParams::zeros(inv, h.emb_size, h.rnn_size),
        pooling: h.pooling.clone(),
        max_len: h.max_len,
        scorer: zero_scorer(&h.scorer, source)?,
    })
}

pub fn from_str(text: &str, source: &str) -> Result<SavedModel> {
    let doc: ModelDoc = from_json(text, source, "model")?;
    let missing = |what: &str| Error::parse(source, None, format!("{} model without a {what} header", doc.architecture));
    let mut model = match doc.architecture.as_str() {
        "hand" => Model::Hand(zero_hand(doc.hand.as_ref().ok_or_else(|| missing("hand"))?, source)?),
        "neural" => Model::Neural(zero_neural(doc.neural.as_ref().ok_or_else(|| missing("neural"))?, source)?),
        "combined" => {
            let hand = zero_hand(doc.hand.as_ref().ok_or_else(|| missing("hand"))?, source)?;
            let neural = zero_neural(doc.neural.as_ref().ok_or_else(|| missing("neural"))?, source)?;
            if !hand.scorer.same_catalog(&neural.scorer) {
                return Err(Error::parse(source, None, "hand and neural relation catalogs differ"));
            }
            let alpha = doc.alpha.ok_or_else(|| missing("alpha"))?;
            Model::Combined(CombinedModel { hand, neural, alpha })
        }
        other => return Err(Error::parse(source, None, format!("unknown architecture {other:?}"))),
    };
    let mut blocks = model.blocks_mut();
    if blocks.len() != doc.blocks.len() {
        return Err(Error::parse(source, None, format!("expected {} parameter blocks, found {}", blocks.len(), doc.blocks.len())));
    }
    for (dst, rec) in blocks.iter_mut().zip(&doc.blocks) {
        if dst.name != rec.name.as_str() || dst.values.len() != rec.len {
            return Err(Error::parse(
                source,
                None,
                format!("block {} ({} values) where {} ({} values) was expected", rec.name, rec.len, dst.name, dst.values.len()),
            ));
        }
        dst.values.copy_from_slice(&decode(&rec.data, rec.len, &rec.name, source)?);
    }
    drop(blocks);
    if !model.all_finite() {
        return Err(Error::parse(source, None, "non-finite parameter"));
    }
    Ok(SavedModel { model, seed: doc.seed, training: doc.training })
}

type LinkRow = (String, String, String, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EcDoc {
    format_version: String,
    kind: String,
    window: Window,
    scheme: RelationScheme,
    trained_languages: Vec<String>,
    right: Vec<LinkRow>,
    left: Vec<LinkRow>,
}

fn rows(m: &BTreeMap<TagPair, BTreeMap<String, f64>>) -> Vec<LinkRow> {
    m.iter()
        .flat_map(|((a, b), rels)| rels.iter().map(move |(r, p)| (a.to_string(), b.to_string(), r.clone(), *p)))
        .collect()
}

fn unrows(rows: Vec<LinkRow>, source: &str) -> Result<BTreeMap<TagPair, BTreeMap<String, f64>>> {
    let mut out: BTreeMap<TagPair, BTreeMap<String, f64>> = BTreeMap::new();
    for (a, b, r, p) in rows {
        let tag = |s: &str| PosTag::new(s).map_err(|e| Error::parse(source, None, e.to_string()));
        out.entry((tag(&a)?, tag(&b)?)).or_default().insert(r, p);
    }
    Ok(out)
}

pub fn ec_to_string(m: &EcModel) -> String {
    to_json(&EcDoc {
        format_version: FORMAT_VERSION.into(),
        kind: "ec-model".into(),
        window: m.window,
        scheme: m.scheme,
        trained_languages: m.trained_languages.clone(),
        right: rows(&m.right_prob),
        left: rows(&m.left_prob),
    })
}

pub fn ec_from_str(text: &str, source: &str) -> Result<EcModel> {
    let doc: EcDoc = from_json(text, source, "ec-model")?;
    Ok(EcModel {
        window: doc.window,
        scheme: doc.scheme,
        right_prob: unrows(doc.right, source)?,
        left_prob: unrows(doc.left, source)?,
        trained_languages: doc.trained_languages,
    })
}
