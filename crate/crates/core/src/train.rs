//! Training: the objective (mean ε-insensitive loss over training languages
//! plus L2 on weights), its gradient, and SGD / RMSProp with one step per
//! language visit.

use alloc::borrow::Cow;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{to_tagged_corpus, TaggedCorpus, Treebank};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_EPS;
use crate::features::{FeatureConfig, FeatureVector, TagInventory};
use crate::linalg::sigmoid;
use crate::neural::{forward_corpus, GruParams, PoolingSpec};
use crate::params::{Block, BlockMut, ParamBlocks};
use crate::rng::{stream, substream, Stream};
use crate::scorer::{
    combine, init_scoring_with, Activation, CombinedModel, HandModel, Model, NeuralModel,
    ScorerShape, ScoringParams,
};
use crate::typology::{directionality, init_stats, DirectionalityVector, InitStats, RelationScheme};

/// One training or evaluation language: its treebank, the tag sequences
/// derived from it, and its gold directionality.
#[derive(Debug, Clone)]
pub struct Language {
    pub treebank: Treebank,
    pub corpus: TaggedCorpus,
    pub gold: DirectionalityVector,
}

impl Language {
    pub fn new(treebank: Treebank, scheme: RelationScheme) -> Result<Self> {
        let gold = directionality(&treebank, scheme)?;
        let corpus = to_tagged_corpus(&treebank);
        Ok(Language { treebank, corpus, gold })
    }

    pub fn id(&self) -> &str {
        &self.treebank.language_id
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Optimizer {
    Sgd { lr: f64 },
    /// `a ← ρ a + (1 − ρ) g²`, `θ ← θ − lr · g / (√a + stabilizer)`, with
    /// `a` starting at 0.
    RmsProp { lr: f64, rho: f64, stabilizer: f64 },
}

impl Optimizer {
    pub fn sgd() -> Self {
        Optimizer::Sgd { lr: 0.1 }
    }

    pub fn rmsprop() -> Self {
        Optimizer::RmsProp { lr: 0.001, rho: 0.9, stabilizer: 1e-8 }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Optimizer::Sgd { lr } | Optimizer::RmsProp { lr, .. } => lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub eps: f64,
    pub l2: f64,
    pub dropout: f64,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eps: DEFAULT_EPS,
            l2: 0.0,
            dropout: 0.0,
            optimizer: Optimizer::sgd(),
            epochs: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Hand-feature preset: dropout 0.4, SGD.
    pub fn hand_default() -> Self {
        TrainConfig { dropout: 0.4, ..TrainConfig::default() }
    }

    /// Neural preset: dropout 0.2, RMSProp.
    pub fn neural_default() -> Self {
        TrainConfig {
            dropout: 0.2,
            optimizer: Optimizer::rmsprop(),
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.l2 >= 0.0) || !(self.eps >= 0.0) || !(self.optimizer.lr() >= 0.0) {
            return Err(Error::Config("eps, l2 and learning rate must be non-negative".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct HandSpec {
    pub features: FeatureConfig,
    pub depth: usize,
    pub hidden: usize,
    pub activation: Activation,
}

impl Default for HandSpec {
    fn default() -> Self {
        HandSpec {
            features: FeatureConfig::default(),
            depth: 1,
            hidden: 128,
            activation: Activation::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NeuralSpec {
    pub emb_size: usize,
    pub rnn_size: usize,
    pub pooling: PoolingSpec,
    pub max_len: usize,
    pub depth: usize,
    pub hidden: usize,
    pub activation: Activation,
}

impl Default for NeuralSpec {
    fn default() -> Self {
        NeuralSpec {
            emb_size: 128,
            rnn_size: 32,
            pooling: PoolingSpec::default(),
            max_len: 40,
            depth: 1,
            hidden: 128,
            activation: Activation::Relu,
        }
    }
}

/// Architecture of a trainable model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum ModelSpec {
    Hand(HandSpec),
    Neural(NeuralSpec),
    Combined { hand: HandSpec, neural: NeuralSpec, alpha: f64 },
}

impl ModelSpec {
    /// No features and no hidden layer: only the per-relation biases are
    /// learned.
    pub fn bias_only() -> Self {
        ModelSpec::Hand(HandSpec {
            features: FeatureConfig::empty(),
            depth: 0,
            hidden: 0,
            activation: Activation::Sigmoid,
        })
    }
}

/// A freshly initialized model for `spec`; the tag inventory is the set of
/// tags seen in `pool`.
pub fn init_model(spec: &ModelSpec, pool: &[&Language], stats: &InitStats, seed: u64) -> Result<Model> {
    let inventory = TagInventory::from_corpora(pool.iter().map(|l| &l.corpus));
    let hand = |h: &HandSpec| -> Result<HandModel> {
        h.features.validate()?;
        let dim = crate::features::FeatureCatalog::new(&h.features, &inventory).len();
        let shape = ScorerShape { input_dim: dim, depth: h.depth, hidden: h.hidden, activation: h.activation };
        Ok(HandModel {
            features: h.features.clone(),
            inventory: inventory.clone(),
            scorer: init_scoring_with(stats, shape, &mut stream(seed, Stream::Init)),
        })
    };
    let neural = |n: &NeuralSpec| -> Result<NeuralModel> {
        if n.pooling.betas.is_empty() || n.rnn_size == 0 || n.emb_size == 0 {
            return Err(Error::Config("neural model needs betas, rnn_size and emb_size".into()));
        }
        let gru = GruParams::init(inventory.clone(), n.emb_size, n.rnn_size, &mut substream(seed, Stream::Init, 1));
        let shape = ScorerShape {
            input_dim: n.pooling.betas.len() * n.rnn_size,
            depth: n.depth,
            hidden: n.hidden,
            activation: n.activation,
        };
        Ok(NeuralModel {
            gru,
            pooling: n.pooling.clone(),
            max_len: n.max_len,
            scorer: init_scoring_with(stats, shape, &mut substream(seed, Stream::Init, 2)),
        })
    };
    Ok(match spec {
        ModelSpec::Hand(h) => Model::Hand(hand(h)?),
        ModelSpec::Neural(n) => Model::Neural(neural(n)?),
        ModelSpec::Combined { hand: h, neural: n, alpha } => {
            if !(0.0..=1.0).contains(alpha) {
                return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
            }
            Model::Combined(CombinedModel { hand: hand(h)?, neural: neural(n)?, alpha: *alpha })
        }
    })
}

fn prefixed<'a>(prefix: &'static str, blocks: Vec<Block<'a>>) -> impl Iterator<Item = Block<'a>> {
    blocks.into_iter().map(move |b| Block { name: Cow::Owned(format!("{prefix}.{}", b.name)), ..b })
}

fn prefixed_mut<'a>(prefix: &'static str, blocks: Vec<BlockMut<'a>>) -> impl Iterator<Item = BlockMut<'a>> {
    blocks.into_iter().map(move |b| BlockMut { name: Cow::Owned(format!("{prefix}.{}", b.name)), ..b })
}

impl ParamBlocks for Model {
    fn blocks(&self) -> Vec<Block<'_>> {
        match self {
            Model::Hand(m) => prefixed("hand", m.scorer.blocks()).collect(),
            Model::Neural(m) => prefixed("gru", m.gru.blocks())
                .chain(prefixed("neural", m.scorer.blocks()))
                .collect(),
            Model::Combined(m) => prefixed("hand", m.hand.scorer.blocks())
                .chain(prefixed("gru", m.neural.gru.blocks()))
                .chain(prefixed("neural", m.neural.scorer.blocks()))
                .collect(),
        }
    }

    fn blocks_mut(&mut self) -> Vec<BlockMut<'_>> {
        match self {
            Model::Hand(m) => prefixed_mut("hand", m.scorer.blocks_mut()).collect(),
            Model::Neural(m) => prefixed_mut("gru", m.gru.blocks_mut())
                .chain(prefixed_mut("neural", m.scorer.blocks_mut()))
                .collect(),
            Model::Combined(m) => prefixed_mut("hand", m.hand.scorer.blocks_mut())
                .chain(prefixed_mut("gru", m.neural.gru.blocks_mut()))
                .chain(prefixed_mut("neural", m.neural.scorer.blocks_mut()))
                .collect(),
        }
    }
}

/// A model of the same architecture with every parameter zero.
pub fn zeros_like(model: &Model) -> Model {
    let mut out = model.clone();
    for b in out.blocks_mut() {
        b.values.iter_mut().for_each(|v| *v = 0.0);
    }
    out
}

/// What a model needs from one language, computed once per training run.
struct Prepared<'a> {
    gold: &'a DirectionalityVector,
    hand: Option<FeatureVector>,
    neural: Option<TaggedCorpus>,
}

fn prepare<'a>(model: &Model, lang: &'a Language) -> Result<Prepared<'a>> {
    let (hand, neural) = match model {
        Model::Hand(m) => (Some(m.featurize(&lang.corpus)?), None),
        Model::Neural(m) => (None, Some(lang.corpus.length_filter(m.max_len))),
        Model::Combined(m) => (
            Some(m.hand.featurize(&lang.corpus)?),
            Some(lang.corpus.length_filter(m.neural.max_len)),
        ),
    };
    Ok(Prepared { gold: &lang.gold, hand, neural })
}

/// Loss of one language and its gradient with respect to the scores. The
/// subgradient inside the ε ball, and at its edge, is 0.
fn loss_and_dscores(p: &ScoringParams, scores: &[f64], gold: &DirectionalityVector, eps: f64) -> (f64, Vec<f64>) {
    let mut ds = vec![0.0; scores.len()];
    let mut loss = 0.0;
    for (r, st) in &gold.entries {
        let i = p.index_of(r);
        let p_hat = sigmoid(scores[i]);
        let d = p_hat - st.p_right;
        let excess = libm::fabs(d) - eps;
        if excess > 0.0 {
            loss += st.rel_freq * excess;
            let sign = if d > 0.0 { 1.0 } else { -1.0 };
            ds[i] += st.rel_freq * sign * p_hat * (1.0 - p_hat);
        }
    }
    (loss, ds)
}

fn reborrow<'b>(d: &'b mut Option<(f64, &mut ChaCha8Rng)>) -> Option<(f64, &'b mut ChaCha8Rng)> {
    d.as_mut().map(|(r, g)| (*r, &mut **g))
}

/// Loss of one language and, if `grad` is set, its gradient (without L2).
fn language_step(
    model: &Model,
    ex: &Prepared<'_>,
    eps: f64,
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
    grad: Option<&mut Model>,
) -> Result<f64> {
    match model {
        Model::Hand(m) => {
            let tr = m.scorer.forward(&ex.hand.as_ref().unwrap().values, reborrow(&mut dropout))?;
            let (loss, ds) = loss_and_dscores(&m.scorer, &tr.scores, ex.gold, eps);
            if let Some(Model::Hand(g)) = grad {
                g.scorer = m.scorer.backward(&tr, &ds).0;
            }
            Ok(loss)
        }
        Model::Neural(m) => {
            let nf = forward_corpus(ex.neural.as_ref().unwrap(), &m.gru, &m.pooling)?;
            let tr = m.scorer.forward(&nf.features.values, reborrow(&mut dropout))?;
            let (loss, ds) = loss_and_dscores(&m.scorer, &tr.scores, ex.gold, eps);
            if let Some(Model::Neural(g)) = grad {
                let (gs, dx) = m.scorer.backward(&tr, &ds);
                g.scorer = gs;
                g.gru = nf.backward(&m.gru, &m.pooling, &dx);
            }
            Ok(loss)
        }
        Model::Combined(m) => {
            if !m.hand.scorer.same_catalog(&m.neural.scorer) {
                return Err(Error::CatalogMismatch);
            }
            let th = m.hand.scorer.forward(&ex.hand.as_ref().unwrap().values, reborrow(&mut dropout))?;
            let nf = forward_corpus(ex.neural.as_ref().unwrap(), &m.neural.gru, &m.neural.pooling)?;
            let tn = m.neural.scorer.forward(&nf.features.values, reborrow(&mut dropout))?;
            let s = combine(&th.scores, &tn.scores, m.alpha)?;
            let (loss, ds) = loss_and_dscores(&m.hand.scorer, &s, ex.gold, eps);
            if let Some(Model::Combined(g)) = grad {
                let dh: Vec<f64> = ds.iter().map(|v| m.alpha * v).collect();
                let dn: Vec<f64> = ds.iter().map(|v| (1.0 - m.alpha) * v).collect();
                g.hand.scorer = m.hand.scorer.backward(&th, &dh).0;
                let (gs, dx) = m.neural.scorer.backward(&tn, &dn);
                g.neural.scorer = gs;
                g.neural.gru = nf.backward(&m.neural.gru, &m.neural.pooling, &dx);
            }
            Ok(loss)
        }
    }
}

fn mean_objective(model: &Model, prepared: &[Prepared<'_>], cfg: &TrainConfig) -> Result<f64> {
    let mut total = 0.0;
    for ex in prepared {
        total += language_step(model, ex, cfg.eps, None, None)?;
    }
    Ok(total / prepared.len() as f64 + cfg.l2 * model.weight_sq_norm())
}

/// Mean aggregate loss over `languages` plus `l2 · Σ w²` (biases excluded).
pub fn objective(model: &Model, languages: &[&Language], cfg: &TrainConfig) -> Result<f64> {
    Batch::new(model, languages)?.objective(model, cfg)
}

/// The objective for a bare scorer over precomputed features.
pub fn scorer_objective(
    p: &ScoringParams,
    examples: &[(FeatureVector, DirectionalityVector)],
    eps: f64,
    l2: f64,
) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Config("objective over zero languages".into()));
    }
    let mut total = 0.0;
    for (x, gold) in examples {
        let scores = crate::scorer::score(x, p)?;
        total += loss_and_dscores(p, &scores, gold, eps).0;
    }
    Ok(total / examples.len() as f64 + l2 * p.weight_sq_norm())
}

/// The objective and its full gradient, without dropout.
pub fn objective_gradient(model: &Model, languages: &[&Language], cfg: &TrainConfig) -> Result<(f64, Model)> {
    Batch::new(model, languages)?.gradient(model, cfg)
}

/// Training languages with their model inputs precomputed, for evaluating
/// the objective repeatedly at different parameters of one architecture.
pub struct Batch<'a> {
    prepared: Vec<Prepared<'a>>,
}

impl<'a> Batch<'a> {
    pub fn new(model: &Model, languages: &[&'a Language]) -> Result<Self> {
        if languages.is_empty() {
            return Err(Error::Config("objective over zero languages".into()));
        }
        let prepared = languages.iter().map(|l| prepare(model, l)).collect::<Result<Vec<_>>>()?;
        Ok(Batch { prepared })
    }

    pub fn objective(&self, model: &Model, cfg: &TrainConfig) -> Result<f64> {
        mean_objective(model, &self.prepared, cfg)
    }

    pub fn gradient(&self, model: &Model, cfg: &TrainConfig) -> Result<(f64, Model)> {
        let mut total_grad = zeros_like(model);
        let mut one = zeros_like(model);
        let mut total = 0.0;
        let scale = 1.0 / self.prepared.len() as f64;
        for ex in &self.prepared {
            total += language_step(model, ex, cfg.eps, None, Some(&mut one))?;
            total_grad.add_scaled(&one, scale);
        }
        total_grad.add_l2_grad(model, cfg.l2);
        Ok((total * scale + cfg.l2 * model.weight_sq_norm(), total_grad))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Training objective after the epoch (epoch 0 is the initialization).
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    /// Parameters from the epoch with the lowest training objective.
    pub model: Model,
    pub best_epoch: usize,
    pub curve: Vec<EpochLog>,
}

struct OptState {
    acc: Vec<Vec<f64>>,
}

impl OptState {
    fn new(model: &Model) -> Self {
        OptState {
            acc: model.blocks().iter().map(|b| vec![0.0; b.values.len()]).collect(),
        }
    }

    fn step(&mut self, model: &mut Model, grad: &Model, opt: Optimizer) {
        for ((p, g), a) in model.blocks_mut().into_iter().zip(grad.blocks()).zip(&mut self.acc) {
            match opt {
                Optimizer::Sgd { lr } => {
                    for (pv, gv) in p.values.iter_mut().zip(g.values) {
                        *pv -= lr * gv;
                    }
                }
                Optimizer::RmsProp { lr, rho, stabilizer } => {
                    for ((pv, gv), av) in p.values.iter_mut().zip(g.values).zip(a.iter_mut()) {
                        *av = rho * *av + (1.0 - rho) * gv * gv;
                        *pv -= lr * gv / (libm::sqrt(*av) + stabilizer);
                    }
                }
            }
        }
    }
}

/// Trains `spec` on `languages`. Each epoch visits the languages in a
/// seeded random order and takes one step per language. Returns the
/// parameters of the best epoch by training objective.
pub fn train(languages: &[&Language], spec: &ModelSpec, cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    if languages.is_empty() {
        return Err(Error::Config("no training languages".into()));
    }
    let golds: Vec<DirectionalityVector> = languages.iter().map(|l| l.gold.clone()).collect();
    let stats = init_stats(&golds);
    let model = init_model(spec, languages, &stats, cfg.seed)?;
    train_from(model, languages, cfg)
}

/// Continues training an already initialized model.
pub fn train_from(mut model: Model, languages: &[&Language], cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    let prepared = languages.iter().map(|l| prepare(&model, l)).collect::<Result<Vec<_>>>()?;
    let mut shuffle_rng = stream(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = stream(cfg.seed, Stream::Dropout);
    let mut state = OptState::new(&model);
    let mut grad = zeros_like(&model);
    let mut order: Vec<usize> = (0..prepared.len()).collect();

    let initial = mean_objective(&model, &prepared, cfg)?;
    let mut curve = vec![EpochLog { epoch: 0, objective: initial }];
    let mut best = (0, initial, model.clone());
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for &i in &order {
            let dropout = (cfg.dropout > 0.0).then_some((cfg.dropout, &mut dropout_rng));
            language_step(&model, &prepared[i], cfg.eps, dropout, Some(&mut grad))?;
            grad.add_l2_grad(&model, cfg.l2);
            state.step(&mut model, &grad, cfg.optimizer);
        }
        let value = mean_objective(&model, &prepared, cfg)?;
        if !value.is_finite() || !model.all_finite() {
            return Err(Error::Diverged { epoch, value });
        }
        curve.push(EpochLog { epoch, objective: value });
        if value < best.1 {
            best = (epoch, value, model.clone());
        }
    }
    Ok(Trained { model: best.2, best_epoch: best.0, curve })
}

/// Draws a uniform value in `[lo, hi)`; exposed for experiment fixtures.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
