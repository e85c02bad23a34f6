//! Neural features: a GRU reads each boundary-augmented tag sequence and
//! its final hidden state `f_i ∈ (−1, 1)^H` summarizes the sentence. The
//! per-sentence vectors are mapped to `f′ = (f + 1) / 2` and pooled across
//! sentences with power means of several inverse temperatures `β`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::corpus::{PosTag, TaggedCorpus};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, TagInventory};
use crate::linalg::{sigmoid, Matrix};
use crate::params::{Block, BlockMut, ParamBlocks};

/// Only the first this-many sentences enter the pooled means.
pub const MAX_POOLED_SENTENCES: usize = 10_000;

/// Lower clamp on `f′` before pooling; keeps negative powers and logs
/// finite if a `tanh` saturates to exactly −1 in floating point.
const MIN_POOL_INPUT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PoolingSpec {
    pub betas: Vec<f64>,
}

impl Default for PoolingSpec {
    fn default() -> Self {
        PoolingSpec {
            betas: vec![-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0],
        }
    }
}

/// GRU weights. Each gate has an input block `U` (`H × E`), a recurrent
/// block `W` (`H × H`) and a bias; together `[U W]` is the usual
/// `H × (E + H)` gate matrix. The embedding has one row per inventory tag
/// plus a final row for tags outside the inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub inventory: TagInventory,
    pub emb: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_h: Matrix,
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_h: Matrix,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
}

impl GruParams {
    pub fn zeros(inventory: TagInventory, emb_size: usize, rnn_size: usize) -> Self {
        let vocab = inventory.all().len() + 1;
        GruParams {
            inventory,
            emb: Matrix::zeros(vocab, emb_size),
            u_z: Matrix::zeros(rnn_size, emb_size),
            u_r: Matrix::zeros(rnn_size, emb_size),
            u_h: Matrix::zeros(rnn_size, emb_size),
            w_z: Matrix::zeros(rnn_size, rnn_size),
            w_r: Matrix::zeros(rnn_size, rnn_size),
            w_h: Matrix::zeros(rnn_size, rnn_size),
            b_z: vec![0.0; rnn_size],
            b_r: vec![0.0; rnn_size],
            b_h: vec![0.0; rnn_size],
        }
    }

    /// Recurrent blocks random orthogonal, input blocks and embedding Xavier
    /// uniform, biases zero.
    pub fn init<R: Rng + ?Sized>(
        inventory: TagInventory,
        emb_size: usize,
        rnn_size: usize,
        rng: &mut R,
    ) -> Self {
        let vocab = inventory.all().len() + 1;
        GruParams {
            inventory,
            emb: Matrix::xavier_uniform(vocab, emb_size, rng),
            u_z: Matrix::xavier_uniform(rnn_size, emb_size, rng),
            u_r: Matrix::xavier_uniform(rnn_size, emb_size, rng),
            u_h: Matrix::xavier_uniform(rnn_size, emb_size, rng),
            w_z: Matrix::random_orthogonal(rnn_size, rng),
            w_r: Matrix::random_orthogonal(rnn_size, rng),
            w_h: Matrix::random_orthogonal(rnn_size, rng),
            b_z: vec![0.0; rnn_size],
            b_r: vec![0.0; rnn_size],
            b_h: vec![0.0; rnn_size],
        }
    }

    pub fn zeros_like(&self) -> Self {
        GruParams::zeros(self.inventory.clone(), self.emb_size(), self.rnn_size())
    }

    pub fn emb_size(&self) -> usize {
        self.emb.cols()
    }

    pub fn rnn_size(&self) -> usize {
        self.w_z.rows()
    }

    /// Embedding row of `tag`; tags outside the inventory share the last row.
    pub fn row_of(&self, tag: &PosTag) -> usize {
        self.inventory
            .index_of(tag)
            .unwrap_or(self.inventory.all().len())
    }

    /// Input projections `(U_z e, U_r e, U_h e)` for every embedding row.
    fn projections(&self) -> Vec<[Vec<f64>; 3]> {
        (0..self.emb.rows())
            .map(|i| {
                let e = self.emb.row(i);
                [self.u_z.mul_vec(e), self.u_r.mul_vec(e), self.u_h.mul_vec(e)]
            })
            .collect()
    }
}

impl ParamBlocks for GruParams {
    fn blocks(&self) -> Vec<Block<'_>> {
        vec![
            Block { name: "emb".into(), values: self.emb.as_slice(), is_bias: false },
            Block { name: "u_z".into(), values: self.u_z.as_slice(), is_bias: false },
            Block { name: "u_r".into(), values: self.u_r.as_slice(), is_bias: false },
            Block { name: "u_h".into(), values: self.u_h.as_slice(), is_bias: false },
            Block { name: "w_z".into(), values: self.w_z.as_slice(), is_bias: false },
            Block { name: "w_r".into(), values: self.w_r.as_slice(), is_bias: false },
            Block { name: "w_h".into(), values: self.w_h.as_slice(), is_bias: false },
            Block { name: "b_z".into(), values: &self.b_z, is_bias: true },
            Block { name: "b_r".into(), values: &self.b_r, is_bias: true },
            Block { name: "b_h".into(), values: &self.b_h, is_bias: true },
        ]
    }

    fn blocks_mut(&mut self) -> Vec<BlockMut<'_>> {
        vec![
            BlockMut { name: "emb".into(), values: self.emb.as_mut_slice(), is_bias: false },
            BlockMut { name: "u_z".into(), values: self.u_z.as_mut_slice(), is_bias: false },
            BlockMut { name: "u_r".into(), values: self.u_r.as_mut_slice(), is_bias: false },
            BlockMut { name: "u_h".into(), values: self.u_h.as_mut_slice(), is_bias: false },
            BlockMut { name: "w_z".into(), values: self.w_z.as_mut_slice(), is_bias: false },
            BlockMut { name: "w_r".into(), values: self.w_r.as_mut_slice(), is_bias: false },
            BlockMut { name: "w_h".into(), values: self.w_h.as_mut_slice(), is_bias: false },
            BlockMut { name: "b_z".into(), values: &mut self.b_z, is_bias: true },
            BlockMut { name: "b_r".into(), values: &mut self.b_r, is_bias: true },
            BlockMut { name: "b_h".into(), values: &mut self.b_h, is_bias: true },
        ]
    }
}

struct Step {
    row: usize,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    cand: Vec<f64>,
}

/// Runs the recurrence over `rows`, optionally recording every step.
fn run(
    p: &GruParams,
    proj: &[[Vec<f64>; 3]],
    rows: &[usize],
    mut trace: Option<&mut Vec<Step>>,
) -> Vec<f64> {
    let n = p.rnn_size();
    let mut h = vec![0.0; n];
    let mut rh = vec![0.0; n];
    for &row in rows {
        let [pz, pr, ph] = &proj[row];
        let rec_z = p.w_z.mul_vec(&h);
        let rec_r = p.w_r.mul_vec(&h);
        let z: Vec<f64> = (0..n).map(|k| sigmoid(pz[k] + rec_z[k] + p.b_z[k])).collect();
        let r: Vec<f64> = (0..n).map(|k| sigmoid(pr[k] + rec_r[k] + p.b_r[k])).collect();
        for k in 0..n {
            rh[k] = r[k] * h[k];
        }
        let rec_h = p.w_h.mul_vec(&rh);
        let cand: Vec<f64> = (0..n)
            .map(|k| libm::tanh(ph[k] + rec_h[k] + p.b_h[k]))
            .collect();
        let next: Vec<f64> = (0..n)
            .map(|k| z[k] * h[k] + (1.0 - z[k]) * cand[k])
            .collect();
        if let Some(t) = trace.as_deref_mut() {
            t.push(Step {
                row,
                h_prev: core::mem::replace(&mut h, next),
                z,
                r,
                cand,
            });
        } else {
            h = next;
        }
    }
    h
}

/// Final hidden state of the GRU over `seq` (which should include the
/// boundary tags). Tags outside the inventory use the reserved OOV row.
pub fn gru_encode(seq: &[PosTag], p: &GruParams) -> Vec<f64> {
    let rows: Vec<usize> = seq.iter().map(|t| p.row_of(t)).collect();
    run(p, &p.projections(), &rows, None)
}

/// Power mean of `values` with exponent `beta`; `beta = 0` is the geometric
/// mean.
pub fn power_mean(values: &[f64], beta: f64) -> f64 {
    let n = values.len() as f64;
    if beta == 0.0 {
        libm::exp(values.iter().map(|&v| libm::log(v)).sum::<f64>() / n)
    } else {
        let m = values.iter().map(|&v| libm::pow(v, beta)).sum::<f64>() / n;
        libm::pow(m, 1.0 / beta)
    }
}

/// Pools per-sentence vectors `f_i` (rows of `f`) into one vector:
/// `π_k = (mean_i f′_ik^β)^(1/β)` with `f′ = (f + 1) / 2`.
pub fn soft_pool(f: &[Vec<f64>], beta: f64) -> Vec<f64> {
    let dim = f.first().map_or(0, Vec::len);
    let mut column = Vec::with_capacity(f.len());
    (0..dim)
        .map(|k| {
            column.clear();
            column.extend(f.iter().map(|row| to_unit(row[k])));
            power_mean(&column, beta)
        })
        .collect()
}

fn to_unit(f: f64) -> f64 {
    let v = (f + 1.0) / 2.0;
    if v < MIN_POOL_INPUT {
        MIN_POOL_INPUT
    } else {
        v
    }
}

/// Sentence encodings of a corpus and their pooled features.
#[derive(Debug, Clone)]
pub struct NeuralForward {
    rows: Vec<Vec<usize>>,
    encodings: Vec<Vec<f64>>,
    pub features: FeatureVector,
}

/// Encodes the first [`MAX_POOLED_SENTENCES`] sentences of `c` and pools
/// them for every `β` in `spec`, concatenated in order. The corpus should
/// already be length-filtered.
pub fn forward_corpus(c: &TaggedCorpus, p: &GruParams, spec: &PoolingSpec) -> Result<NeuralForward> {
    if c.is_empty() {
        return Err(Error::NoSentences(c.language_id.clone()));
    }
    let proj = p.projections();
    let rows: Vec<Vec<usize>> = c
        .sequences()
        .iter()
        .take(MAX_POOLED_SENTENCES)
        .map(|s| s.iter().map(|t| p.row_of(t)).collect())
        .collect();
    let encodings: Vec<Vec<f64>> = rows.iter().map(|r| run(p, &proj, r, None)).collect();
    let mut values = Vec::with_capacity(spec.betas.len() * p.rnn_size());
    for &beta in &spec.betas {
        values.extend(soft_pool(&encodings, beta));
    }
    Ok(NeuralForward {
        rows,
        encodings,
        features: FeatureVector { values },
    })
}

pub fn featurize_neural(c: &TaggedCorpus, p: &GruParams, spec: &PoolingSpec) -> Result<FeatureVector> {
    Ok(forward_corpus(c, p, spec)?.features)
}

impl NeuralForward {
    pub fn sentence_count(&self) -> usize {
        self.encodings.len()
    }

    /// Gradient of a scalar with respect to the GRU parameters, given its
    /// gradient `d_features` with respect to the pooled features.
    pub fn backward(&self, p: &GruParams, spec: &PoolingSpec, d_features: &[f64]) -> GruParams {
        let h = p.rnn_size();
        let n = self.encodings.len() as f64;
        debug_assert_eq!(d_features.len(), spec.betas.len() * h);

        // d/d f_ik through every pooled coordinate.
        let mut d_enc = vec![vec![0.0; h]; self.encodings.len()];
        for (bi, &beta) in spec.betas.iter().enumerate() {
            for k in 0..h {
                let g = d_features[bi * h + k];
                if g == 0.0 {
                    continue;
                }
                let pooled = self.features.values[bi * h + k];
                let mean_pow = if beta == 0.0 {
                    1.0
                } else {
                    self.encodings
                        .iter()
                        .map(|f| libm::pow(to_unit(f[k]), beta))
                        .sum::<f64>()
                        / n
                };
                for (i, f) in self.encodings.iter().enumerate() {
                    let raw = (f[k] + 1.0) / 2.0;
                    if raw < MIN_POOL_INPUT {
                        continue;
                    }
                    let d_unit = pooled * libm::pow(raw, beta - 1.0) / (n * mean_pow);
                    d_enc[i][k] += g * d_unit * 0.5;
                }
            }
        }

        let proj = p.projections();
        let vocab = p.emb.rows();
        let mut grad = p.zeros_like();
        let mut dsum_z = Matrix::zeros(vocab, h);
        let mut dsum_r = Matrix::zeros(vocab, h);
        let mut dsum_h = Matrix::zeros(vocab, h);
        let mut steps = Vec::new();
        let mut d_rh = vec![0.0; h];
        for (rows, dh_final) in self.rows.iter().zip(&d_enc) {
            if dh_final.iter().all(|&v| v == 0.0) {
                continue;
            }
            steps.clear();
            run(p, &proj, rows, Some(&mut steps));
            let mut dh = dh_final.clone();
            for st in steps.iter().rev() {
                let mut dh_prev: Vec<f64> = (0..h).map(|k| dh[k] * st.z[k]).collect();
                let dpre_h: Vec<f64> = (0..h)
                    .map(|k| dh[k] * (1.0 - st.z[k]) * (1.0 - st.cand[k] * st.cand[k]))
                    .collect();
                let dpre_z: Vec<f64> = (0..h)
                    .map(|k| dh[k] * (st.h_prev[k] - st.cand[k]) * st.z[k] * (1.0 - st.z[k]))
                    .collect();
                let rh: Vec<f64> = (0..h).map(|k| st.r[k] * st.h_prev[k]).collect();
                grad.w_h.add_outer(&dpre_h, &rh);
                d_rh.iter_mut().for_each(|v| *v = 0.0);
                p.w_h.add_mul_vec_transposed(&dpre_h, &mut d_rh);
                let dpre_r: Vec<f64> = (0..h)
                    .map(|k| d_rh[k] * st.h_prev[k] * st.r[k] * (1.0 - st.r[k]))
                    .collect();
                for k in 0..h {
                    dh_prev[k] += d_rh[k] * st.r[k];
                }
                grad.w_r.add_outer(&dpre_r, &st.h_prev);
                grad.w_z.add_outer(&dpre_z, &st.h_prev);
                p.w_r.add_mul_vec_transposed(&dpre_r, &mut dh_prev);
                p.w_z.add_mul_vec_transposed(&dpre_z, &mut dh_prev);
                for k in 0..h {
                    grad.b_z[k] += dpre_z[k];
                    grad.b_r[k] += dpre_r[k];
                    grad.b_h[k] += dpre_h[k];
                }
                for (acc, d) in [
                    (&mut dsum_z, &dpre_z),
                    (&mut dsum_r, &dpre_r),
                    (&mut dsum_h, &dpre_h),
                ] {
                    for (a, v) in acc.row_mut(st.row).iter_mut().zip(d.iter()) {
                        *a += v;
                    }
                }
                dh = dh_prev;
            }
        }
        for row in 0..vocab {
            let e = p.emb.row(row);
            let mut d_emb = vec![0.0; p.emb_size()];
            for (u, gu, ds) in [
                (&p.u_z, &mut grad.u_z, &dsum_z),
                (&p.u_r, &mut grad.u_r, &dsum_r),
                (&p.u_h, &mut grad.u_h, &dsum_h),
            ] {
                let d = ds.row(row);
                gu.add_outer(d, e);
                u.add_mul_vec_transposed(d, &mut d_emb);
            }
            for (g, v) in grad.emb.row_mut(row).iter_mut().zip(&d_emb) {
                *g += v;
            }
        }
        grad
    }
}
