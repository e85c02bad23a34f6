//! The feed-forward scorer `s = V ψ(W π + b_W) + b_V` (with any number of
//! hidden layers), its logistic read-out, initialization, and the
//! product-of-experts combination of a hand-feature and a neural scorer.

use alloc::borrow::Cow;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::corpus::TaggedCorpus;
use crate::error::{Error, Result};
use crate::eval::Prediction;
use crate::features::{featurize_hand, FeatureConfig, FeatureVector, TagInventory};
use crate::linalg::{logit, sigmoid, Matrix};
use crate::neural::{forward_corpus, GruParams, NeuralForward, PoolingSpec};
use crate::params::{Block, BlockMut, ParamBlocks};
use crate::rng::{stream, Stream};
use crate::typology::InitStats;

/// Catalog entry used for relations never seen in training.
pub const UNK: &str = "UNK";

/// Initial output biases are clipped to `±BIAS_CLIP`.
pub const BIAS_CLIP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    #[default]
    Sigmoid,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sigmoid" => Some(Activation::Sigmoid),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }

    /// Returns `(ψ(x), ψ'(x))`.
    fn apply(self, x: f64) -> (f64, f64) {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(x);
                (s, s * (1.0 - s))
            }
            Activation::Relu if x > 0.0 => (x, 1.0),
            Activation::Relu => (0.0, 0.0),
        }
    }
}

/// Shape of a scorer: input dimension, number of hidden layers, and the
/// width shared by every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScorerShape {
    pub input_dim: usize,
    pub depth: usize,
    pub hidden: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringParams {
    pub activation: Activation,
    /// Ordered relation names; the last entry is [`UNK`].
    pub relations: Vec<String>,
    pub layers: Vec<Layer>,
    pub v: Matrix,
    pub b_v: Vec<f64>,
    index: BTreeMap<String, usize>,
}

impl ScoringParams {
    /// All-zero parameters. `relations` must not contain [`UNK`]; it is
    /// appended.
    pub fn zeros(shape: ScorerShape, relations: impl IntoIterator<Item = String>) -> Self {
        let mut relations: Vec<String> = relations.into_iter().filter(|r| r != UNK).collect();
        relations.push(UNK.to_string());
        let mut layers = Vec::with_capacity(shape.depth);
        let mut fan_in = shape.input_dim;
        for _ in 0..shape.depth {
            layers.push(Layer {
                w: Matrix::zeros(shape.hidden, fan_in),
                b: vec![0.0; shape.hidden],
            });
            fan_in = shape.hidden;
        }
        let n = relations.len();
        let index = relations.iter().cloned().enumerate().map(|(i, r)| (r, i)).collect();
        ScoringParams {
            activation: shape.activation,
            v: Matrix::zeros(n, fan_in),
            b_v: vec![0.0; n],
            relations,
            layers,
            index,
        }
    }

    pub fn zeros_like(&self) -> Self {
        ScoringParams::zeros(self.shape(), self.relations[..self.relations.len() - 1].iter().cloned())
    }

    pub fn shape(&self) -> ScorerShape {
        ScorerShape {
            input_dim: self.input_dim(),
            depth: self.layers.len(),
            hidden: self.layers.first().map_or(0, |l| l.w.rows()),
            activation: self.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(self.v.cols(), |l| l.w.cols())
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Catalog position of `relation`, or of [`UNK`] when it is unknown.
    pub fn index_of(&self, relation: &str) -> usize {
        self.index
            .get(relation)
            .copied()
            .unwrap_or(self.relations.len() - 1)
    }

    pub fn same_catalog(&self, other: &ScoringParams) -> bool {
        self.relations == other.relations
    }

    /// Forward pass keeping what the backward pass needs. With `dropout`
    /// set to `(rate, rng)`, each hidden unit is zeroed with probability
    /// `rate` and survivors are scaled by `1 / (1 − rate)`, so inference
    /// needs no rescaling.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        mut dropout: Option<(f64, &mut R)>,
    ) -> Result<ScoreTrace> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "scorer input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut slopes = Vec::with_capacity(self.layers.len());
        acts.push(input.to_vec());
        for layer in &self.layers {
            let pre = layer.w.mul_vec(acts.last().unwrap());
            let mut out = Vec::with_capacity(pre.len());
            let mut slope = Vec::with_capacity(pre.len());
            for (x, b) in pre.iter().zip(&layer.b) {
                let (y, dy) = self.activation.apply(x + b);
                let keep = match dropout.as_mut() {
                    Some((rate, rng)) if *rate > 0.0 => {
                        if rng.random::<f64>() < *rate {
                            0.0
                        } else {
                            1.0 / (1.0 - *rate)
                        }
                    }
                    _ => 1.0,
                };
                out.push(y * keep);
                slope.push(dy * keep);
            }
            acts.push(out);
            slopes.push(slope);
        }
        let mut scores = self.v.mul_vec(acts.last().unwrap());
        for (s, b) in scores.iter_mut().zip(&self.b_v) {
            *s += b;
        }
        Ok(ScoreTrace { acts, slopes, scores })
    }

    /// Gradient of a scalar with respect to the parameters and the input,
    /// given its gradient `d_scores` with respect to the scores.
    pub fn backward(&self, trace: &ScoreTrace, d_scores: &[f64]) -> (ScoringParams, Vec<f64>) {
        let mut grad = self.zeros_like();
        let top = trace.acts.last().unwrap();
        grad.v.add_outer(d_scores, top);
        grad.b_v.copy_from_slice(d_scores);
        let mut d_act = vec![0.0; top.len()];
        self.v.add_mul_vec_transposed(d_scores, &mut d_act);
        for l in (0..self.layers.len()).rev() {
            let d_pre: Vec<f64> = d_act.iter().zip(&trace.slopes[l]).map(|(a, s)| a * s).collect();
            grad.layers[l].w.add_outer(&d_pre, &trace.acts[l]);
            grad.layers[l].b.copy_from_slice(&d_pre);
            d_act = vec![0.0; trace.acts[l].len()];
            self.layers[l].w.add_mul_vec_transposed(&d_pre, &mut d_act);
        }
        (grad, d_act)
    }

    /// `p̂_r = logistic(s_r)` for every catalog relation, [`UNK`] included.
    pub fn to_directionality(&self, scores: &[f64]) -> Prediction {
        to_directionality(&self.relations, scores)
    }
}

impl ParamBlocks for ScoringParams {
    fn blocks(&self) -> Vec<Block<'_>> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 2);
        for (i, l) in self.layers.iter().enumerate() {
            out.push(Block { name: Cow::Owned(format!("w{}", i + 1)), values: l.w.as_slice(), is_bias: false });
            out.push(Block { name: Cow::Owned(format!("b{}", i + 1)), values: &l.b, is_bias: true });
        }
        out.push(Block { name: "v".into(), values: self.v.as_slice(), is_bias: false });
        out.push(Block { name: "b_v".into(), values: &self.b_v, is_bias: true });
        out
    }

    fn blocks_mut(&mut self) -> Vec<BlockMut<'_>> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 2);
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push(BlockMut { name: Cow::Owned(format!("w{}", i + 1)), values: l.w.as_mut_slice(), is_bias: false });
            out.push(BlockMut { name: Cow::Owned(format!("b{}", i + 1)), values: &mut l.b, is_bias: true });
        }
        out.push(BlockMut { name: "v".into(), values: self.v.as_mut_slice(), is_bias: false });
        out.push(BlockMut { name: "b_v".into(), values: &mut self.b_v, is_bias: true });
        out
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ScoreTrace {
    /// Input followed by each hidden layer's output (after dropout).
    acts: Vec<Vec<f64>>,
    /// `ψ'(pre-activation)` times the dropout scale, per hidden layer.
    slopes: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

/// Scores for every catalog relation, without dropout.
pub fn score(feat: &FeatureVector, p: &ScoringParams) -> Result<Vec<f64>> {
    Ok(p.forward::<rand_chacha::ChaCha8Rng>(&feat.values, None)?.scores)
}

pub fn to_directionality(relations: &[String], scores: &[f64]) -> Prediction {
    relations
        .iter()
        .cloned()
        .zip(scores.iter().map(|&s| sigmoid(s)))
        .collect()
}

/// `p̄` for every training relation plus [`UNK`], whose prior is the
/// unweighted mean of the others (0.5 if there are none).
pub fn catalog_priors(stats: &InitStats) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = stats
        .pbar
        .iter()
        .filter(|(r, _)| r.as_str() != UNK)
        .map(|(r, &p)| (r.clone(), p))
        .collect();
    let unk = if out.is_empty() {
        0.5
    } else {
        out.values().sum::<f64>() / out.len() as f64
    };
    out.insert(UNK.to_string(), unk);
    out
}

/// The bias-only starting point: `b_V = clip(logit(p̄_r), ±10)`, `V = 0`,
/// hidden weights Xavier uniform, hidden biases 0.
pub fn init_scoring(stats: &InitStats, shape: ScorerShape, seed: u64) -> ScoringParams {
    init_scoring_with(stats, shape, &mut stream(seed, Stream::Init))
}

pub fn init_scoring_with<R: Rng + ?Sized>(stats: &InitStats, shape: ScorerShape, rng: &mut R) -> ScoringParams {
    let priors = catalog_priors(stats);
    let mut p = ScoringParams::zeros(shape, priors.keys().filter(|r| r.as_str() != UNK).cloned());
    for l in &mut p.layers {
        l.w = Matrix::xavier_uniform(l.w.rows(), l.w.cols(), rng);
    }
    for (i, r) in p.relations.iter().enumerate() {
        p.b_v[i] = logit(priors[r]).clamp(-BIAS_CLIP, BIAS_CLIP);
    }
    p
}

/// `α s_H + (1 − α) s_N`, applied before the logistic.
pub fn combine(hand: &[f64], neural: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if hand.len() != neural.len() {
        return Err(Error::CatalogMismatch);
    }
    Ok(hand
        .iter()
        .zip(neural)
        .map(|(h, n)| alpha * h + (1.0 - alpha) * n)
        .collect())
}

/// Copies catalog predictions onto `relations`, sending unknown relations to
/// the [`UNK`] entry.
pub fn with_unk_fallback<'a>(pred: &Prediction, relations: impl IntoIterator<Item = &'a str>) -> Prediction {
    let unk = pred.get(UNK).copied().unwrap_or(0.5);
    relations
        .into_iter()
        .map(|r| (r.to_string(), pred.get(r).copied().unwrap_or(unk)))
        .collect()
}

/// Scorer over hand-engineered features.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    pub features: FeatureConfig,
    pub inventory: TagInventory,
    pub scorer: ScoringParams,
}

impl HandModel {
    pub fn featurize(&self, c: &TaggedCorpus) -> Result<FeatureVector> {
        featurize_hand(c, &self.features, &self.inventory)
    }
}

/// Scorer over pooled GRU encodings; the corpus is length-filtered to
/// `max_len` before encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    pub gru: GruParams,
    pub pooling: PoolingSpec,
    pub max_len: usize,
    pub scorer: ScoringParams,
}

impl NeuralModel {
    pub fn forward(&self, c: &TaggedCorpus) -> Result<NeuralForward> {
        forward_corpus(&c.length_filter(self.max_len), &self.gru, &self.pooling)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedModel {
    pub hand: HandModel,
    pub neural: NeuralModel,
    pub alpha: f64,
}

/// Any trained directionality predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Hand(HandModel),
    Neural(NeuralModel),
    Combined(CombinedModel),
}

impl Model {
    pub fn relations(&self) -> &[String] {
        match self {
            Model::Hand(m) => &m.scorer.relations,
            Model::Neural(m) => &m.scorer.relations,
            Model::Combined(m) => &m.hand.scorer.relations,
        }
    }

    /// Pre-logistic scores for a corpus.
    pub fn scores(&self, c: &TaggedCorpus) -> Result<Vec<f64>> {
        match self {
            Model::Hand(m) => score(&m.featurize(c)?, &m.scorer),
            Model::Neural(m) => score(&m.forward(c)?.features, &m.scorer),
            Model::Combined(m) => {
                if !m.hand.scorer.same_catalog(&m.neural.scorer) {
                    return Err(Error::CatalogMismatch);
                }
                let h = score(&m.hand.featurize(c)?, &m.hand.scorer)?;
                let n = score(&m.neural.forward(c)?.features, &m.neural.scorer)?;
                combine(&h, &n, m.alpha)
            }
        }
    }

    /// Catalog predictions, [`UNK`] included.
    pub fn predict(&self, c: &TaggedCorpus) -> Result<Prediction> {
        Ok(to_directionality(self.relations(), &self.scores(c)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typology::{init_stats, DirectionalityVector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(input_dim: usize, depth: usize, act: Activation) -> ScorerShape {
        ScorerShape { input_dim, depth, hidden: 4, activation: act }
    }

    fn rels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn randomize(p: &mut ScoringParams, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for b in p.blocks_mut() {
            for v in b.values.iter_mut() {
                *v = rand::Rng::random_range(&mut rng, -1.0..1.0);
            }
        }
    }

    fn naive(p: &ScoringParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in &p.layers {
            a = (0..l.w.rows())
                .map(|i| {
                    let mut s = l.b[i];
                    for j in 0..l.w.cols() {
                        s += l.w[(i, j)] * a[j];
                    }
                    match p.activation {
                        Activation::Sigmoid => 1.0 / (1.0 + (-s).exp()),
                        Activation::Relu => s.max(0.0),
                    }
                })
                .collect();
        }
        (0..p.v.rows())
            .map(|i| p.b_v[i] + (0..p.v.cols()).map(|j| p.v[(i, j)] * a[j]).sum::<f64>())
            .collect()
    }

    #[test]
    fn zero_output_matrix_returns_bias() {
        let mut p = ScoringParams::zeros(shape(3, 1, Activation::Sigmoid), rels(&["a", "b"]));
        randomize(&mut p, 1);
        p.v = Matrix::zeros(3, 4);
        let s = score(&FeatureVector { values: vec![0.3, -2.0, 5.0] }, &p).unwrap();
        assert_eq!(s, p.b_v);
    }

    #[test]
    fn depth_zero_is_affine() {
        let mut p = ScoringParams::zeros(shape(3, 0, Activation::Relu), rels(&["a"]));
        randomize(&mut p, 2);
        let x = [0.5, 0.25, -1.0];
        let s = score(&FeatureVector { values: x.to_vec() }, &p).unwrap();
        for i in 0..2 {
            let want = p.b_v[i] + (0..3).map(|j| p.v[(i, j)] * x[j]).sum::<f64>();
            assert_eq!(s[i], want);
        }
    }

    #[test]
    fn matches_naive_recomputation() {
        for (seed, act, depth) in [(3, Activation::Sigmoid, 1), (4, Activation::Relu, 2), (5, Activation::Sigmoid, 3)] {
            let mut p = ScoringParams::zeros(shape(5, depth, act), rels(&["a", "b", "c"]));
            randomize(&mut p, seed);
            let x: Vec<f64> = (0..5).map(|i| (i as f64 * 0.37).sin()).collect();
            let got = score(&FeatureVector { values: x.clone() }, &p).unwrap();
            for (g, w) in got.iter().zip(naive(&p, &x)) {
                assert!((g - w).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_reports_both_sizes() {
        let p = ScoringParams::zeros(shape(3, 1, Activation::Sigmoid), rels(&["a"]));
        match score(&FeatureVector { values: vec![0.0; 2] }, &p) {
            Err(Error::Dimension { expected: 3, actual: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn logistic_examples() {
        let p = to_directionality(&rels(&["a", "b", "c"]), &[0.0, 10.0, -10.0]);
        assert_eq!(p["a"], 0.5);
        assert!((p["b"] - 0.9999546021312976).abs() < 1e-15);
        assert!((p["b"] + p["c"] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn init_biases() {
        let mut pbar = BTreeMap::new();
        pbar.insert("half".to_string(), 0.5);
        pbar.insert("one".to_string(), 1.0);
        pbar.insert("nine".to_string(), 0.9);
        let stats = InitStats { pbar, weights: BTreeMap::new() };
        let p = init_scoring(&stats, shape(6, 1, Activation::Sigmoid), 7);
        assert_eq!(p.b_v[p.index_of("half")], 0.0);
        assert_eq!(p.b_v[p.index_of("one")], 10.0);
        assert!((p.b_v[p.index_of("nine")] - 9f64.ln()).abs() < 1e-12);
        assert!((p.b_v[p.index_of(UNK)] - logit(0.8)).abs() < 1e-12);
        assert_eq!(p.index_of("never-seen"), p.index_of(UNK));
        assert!(p.v.as_slice().iter().all(|&v| v == 0.0));
        let bound = (6.0f64 / 10.0).sqrt();
        assert!(p.layers[0].w.as_slice().iter().all(|v| v.abs() <= bound));
        assert!(p.layers[0].b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fresh_model_predicts_clipped_prior() {
        let mut counts = BTreeMap::new();
        counts.insert("nsubj".to_string(), (1u64, 4u64));
        counts.insert("obj".to_string(), (3u64, 3u64));
        let dv = DirectionalityVector::from_counts("x", &counts).unwrap();
        let stats = init_stats(&[dv]);
        let p = init_scoring(&stats, shape(2, 2, Activation::Relu), 9);
        let pred = p.to_directionality(&score(&FeatureVector { values: vec![0.7, 0.1] }, &p).unwrap());
        for (r, pb) in catalog_priors(&stats) {
            assert_eq!(pred[&r], sigmoid(logit(pb).clamp(-10.0, 10.0)));
        }
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine(&[1.0], &[-1.0], 1.0).unwrap(), vec![1.0]);
        assert_eq!(combine(&[1.0], &[-1.0], 0.0).unwrap(), vec![-1.0]);
        assert!((combine(&[1.0], &[-1.0], 0.7).unwrap()[0] - 0.4).abs() < 1e-15);
        assert!(matches!(combine(&[1.0], &[1.0, 2.0], 0.5), Err(Error::CatalogMismatch)));
    }

    #[test]
    fn unk_fallback() {
        let pred = to_directionality(&rels(&["a", UNK]), &[1.0, -1.0]);
        let out = with_unk_fallback(&pred, ["a", "zzz"]);
        assert_eq!(out["a"], pred["a"]);
        assert_eq!(out["zzz"], pred[UNK]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        for (seed, act, depth) in [(11, Activation::Sigmoid, 0), (12, Activation::Sigmoid, 2), (13, Activation::Relu, 1)] {
            let mut p = ScoringParams::zeros(shape(3, depth, act), rels(&["a", "b"]));
            randomize(&mut p, seed);
            let x = vec![0.4, -0.3, 0.8];
            let w = [0.3, -1.1, 0.6];
            let f = |q: &ScoringParams, x: &[f64]| -> f64 {
                score(&FeatureVector { values: x.to_vec() }, q).unwrap().iter().zip(&w).map(|(a, b)| a * b).sum()
            };
            let trace = p.forward::<ChaCha8Rng>(&x, None).unwrap();
            let (g, dx) = p.backward(&trace, &w);
            let h = 1e-6;
            let n_blocks = p.blocks().len();
            for bi in 0..n_blocks {
                for i in 0..p.blocks()[bi].values.len() {
                    let orig = p.blocks()[bi].values[i];
                    p.blocks_mut()[bi].values[i] = orig + h;
                    let up = f(&p, &x);
                    p.blocks_mut()[bi].values[i] = orig - h;
                    let down = f(&p, &x);
                    p.blocks_mut()[bi].values[i] = orig;
                    assert!(((up - down) / (2.0 * h) - g.blocks()[bi].values[i]).abs() < 1e-6);
                }
            }
            for i in 0..3 {
                let mut a = x.clone();
                a[i] += h;
                let mut b = x.clone();
                b[i] -= h;
                assert!(((f(&p, &a) - f(&p, &b)) / (2.0 * h) - dx[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dropout_zero_matches_plain_forward_and_is_unbiased_in_scale() {
        let mut p = ScoringParams::zeros(shape(3, 1, Activation::Sigmoid), rels(&["a"]));
        randomize(&mut p, 21);
        let x = [0.1, 0.2, 0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = p.forward(&x, Some((0.0, &mut rng))).unwrap().scores;
        assert_eq!(a, score(&FeatureVector { values: x.to_vec() }, &p).unwrap());
        let b = p.forward(&x, Some((0.5, &mut rng))).unwrap();
        assert!(b.acts[1].iter().all(|&v| v == 0.0 || v > 0.0));
    }

    proptest! {
        #[test]
        fn logistic_range_and_sign(s in -30.0f64..30.0) {
            // below ~1e-16 in magnitude the logistic rounds to exactly 0.5
            prop_assume!(s == 0.0 || s.abs() > 1e-12);
            let p = to_directionality(&rels(&["r"]), &[s])["r"];
            prop_assert!(p > 0.0 && p < 1.0);
            prop_assert_eq!(p > 0.5, s > 0.0);
        }

        #[test]
        fn combine_is_linear(a in prop::collection::vec(-5.0f64..5.0, 4), b in prop::collection::vec(-5.0f64..5.0, 4),
                             c in prop::collection::vec(-5.0f64..5.0, 4), d in prop::collection::vec(-5.0f64..5.0, 4),
                             alpha in 0.0f64..1.0) {
            let lhs: Vec<f64> = combine(&a, &b, alpha).unwrap().iter().zip(combine(&c, &d, alpha).unwrap()).map(|(x, y)| x + y).collect();
            let ac: Vec<f64> = a.iter().zip(&c).map(|(x, y)| x + y).collect();
            let bd: Vec<f64> = b.iter().zip(&d).map(|(x, y)| x + y).collect();
            for (l, r) in lhs.iter().zip(combine(&ac, &bd, alpha).unwrap()) {
                prop_assert!((l - r).abs() < 1e-12);
            }
        }
    }
}
