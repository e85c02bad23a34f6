//! The expected-count baseline.
//!
//! Training estimates, for every ordered tag pair `(t, t′)` seen within a
//! window, how often the pair is linked rightward (`t` heads `t′`) or
//! leftward (`t′` heads `t`) by each relation, micro-averaged over languages
//! with each language weighted by the inverse of its pair count. Prediction
//! sums these link probabilities over nearby tag pairs of an unparsed corpus
//! as soft votes for each direction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{PosTag, TaggedCorpus, Treebank};
use crate::error::{Error, Result};
use crate::eval::Prediction;
use crate::typology::RelationScheme;

/// Maximum distance (exclusive) between paired positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub enum Window {
    Finite(usize),
    Unbounded,
}

impl Window {
    pub const DEFAULT: Window = Window::Finite(8);
    pub const GRID: [Window; 5] = [
        Window::Finite(2),
        Window::Finite(4),
        Window::Finite(8),
        Window::Finite(16),
        Window::Unbounded,
    ];

    /// A pair `i < j` qualifies iff `j − i < w`.
    pub fn admits(self, distance: usize) -> bool {
        match self {
            Window::Finite(w) => distance < w,
            Window::Unbounded => true,
        }
    }

    /// Accepts a positive integer or `inf`.
    pub fn parse(s: &str) -> Option<Window> {
        match s {
            "inf" | "∞" | "unbounded" => Some(Window::Unbounded),
            _ => s.parse().ok().filter(|&w| w > 0).map(Window::Finite),
        }
    }
}

impl TryFrom<String> for Window {
    type Error = String;

    fn try_from(s: String) -> core::result::Result<Self, String> {
        Window::parse(&s).ok_or_else(|| alloc::format!("invalid window {s:?}"))
    }
}

impl From<Window> for String {
    fn from(w: Window) -> String {
        alloc::format!("{w}")
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Finite(w) => write!(f, "{w}"),
            Window::Unbounded => f.write_str("inf"),
        }
    }
}

pub type TagPair = (PosTag, PosTag);

#[derive(Debug, Clone, PartialEq)]
pub struct EcModel {
    pub window: Window,
    pub scheme: RelationScheme,
    /// `p(t →r t′ | t, t′)`: `t` (first) is the head.
    pub right_prob: BTreeMap<TagPair, BTreeMap<String, f64>>,
    /// `p(t ←r t′ | t, t′)`: `t′` (second) is the head.
    pub left_prob: BTreeMap<TagPair, BTreeMap<String, f64>>,
    pub trained_languages: Vec<String>,
}

#[derive(Default)]
struct LanguageCounts {
    pairs: BTreeMap<TagPair, u64>,
    right: BTreeMap<TagPair, BTreeMap<String, u64>>,
    left: BTreeMap<TagPair, BTreeMap<String, u64>>,
    total: u64,
}

fn count_language(tb: &Treebank, scheme: RelationScheme, window: Window) -> LanguageCounts {
    let mut c = LanguageCounts::default();
    for s in tb.sentences() {
        let toks = s.tokens();
        for (a, ti) in toks.iter().enumerate() {
            for tj in &toks[a + 1..] {
                if !window.admits(tj.index - ti.index) {
                    break;
                }
                let key = (ti.tag.clone(), tj.tag.clone());
                if tj.head == ti.index {
                    let r = scheme.relation(&tj.deprel, &ti.tag, &tj.tag);
                    *c.right.entry(key.clone()).or_default().entry(r).or_insert(0) += 1;
                } else if ti.head == tj.index {
                    let r = scheme.relation(&ti.deprel, &tj.tag, &ti.tag);
                    *c.left.entry(key.clone()).or_default().entry(r).or_insert(0) += 1;
                }
                *c.pairs.entry(key).or_insert(0) += 1;
                c.total += 1;
            }
        }
    }
    c
}

/// Estimates link probabilities from `treebanks`. Languages without any
/// qualifying pair (e.g. all sentences shorter than two tokens, or `w = 1`)
/// contribute nothing.
pub fn ec_train(treebanks: &[Treebank], scheme: RelationScheme, window: Window) -> EcModel {
    let mut den: BTreeMap<TagPair, f64> = BTreeMap::new();
    let mut right: BTreeMap<TagPair, BTreeMap<String, f64>> = BTreeMap::new();
    let mut left: BTreeMap<TagPair, BTreeMap<String, f64>> = BTreeMap::new();
    for tb in treebanks {
        let c = count_language(tb, scheme, window);
        if c.total == 0 {
            continue;
        }
        let s_l = 1.0 / c.total as f64;
        for (k, n) in &c.pairs {
            *den.entry(k.clone()).or_insert(0.0) += s_l * *n as f64;
        }
        for (src, dst) in [(&c.right, &mut right), (&c.left, &mut left)] {
            for (k, rels) in src {
                let slot = dst.entry(k.clone()).or_default();
                for (r, n) in rels {
                    *slot.entry(r.clone()).or_insert(0.0) += s_l * *n as f64;
                }
            }
        }
    }
    for probs in [&mut right, &mut left] {
        for (k, rels) in probs.iter_mut() {
            let d = den[k];
            rels.values_mut().for_each(|v| *v /= d);
        }
    }
    EcModel {
        window,
        scheme,
        right_prob: right,
        left_prob: left,
        trained_languages: treebanks.iter().map(|t| t.language_id.clone()).collect(),
    }
}

impl EcModel {
    pub fn relations(&self) -> BTreeSet<&str> {
        self.right_prob
            .values()
            .chain(self.left_prob.values())
            .flat_map(|m| m.keys().map(String::as_str))
            .collect()
    }

    /// Expected `(rightward, leftward)` counts per relation in `c`.
    pub fn expected_counts(&self, c: &TaggedCorpus) -> BTreeMap<String, (f64, f64)> {
        let mut ecnt: BTreeMap<String, (f64, f64)> = self
            .relations()
            .into_iter()
            .map(|r| (r.into(), (0.0, 0.0)))
            .collect();
        for seq in c.sequences() {
            let real = &seq[1..seq.len() - 1];
            for (i, ti) in real.iter().enumerate() {
                for (d, tj) in real[i + 1..].iter().enumerate() {
                    if !self.window.admits(d + 1) {
                        break;
                    }
                    let key = (ti.clone(), tj.clone());
                    if let Some(rels) = self.right_prob.get(&key) {
                        for (r, p) in rels {
                            ecnt.get_mut(r).unwrap().0 += p;
                        }
                    }
                    if let Some(rels) = self.left_prob.get(&key) {
                        for (r, p) in rels {
                            ecnt.get_mut(r).unwrap().1 += p;
                        }
                    }
                }
            }
        }
        ecnt
    }
}

/// `p̂(→|r) = ecnt(r→) / (ecnt(r→) + ecnt(r←))`, or 0.5 when both are zero.
pub fn ec_predict(m: &EcModel, c: &TaggedCorpus) -> Result<Prediction> {
    if c.is_empty() {
        return Err(Error::NoSentences(c.language_id.clone()));
    }
    Ok(m
        .expected_counts(c)
        .into_iter()
        .map(|(r, (right, left))| {
            let total = right + left;
            (r, if total > 0.0 { right / total } else { 0.5 })
        })
        .collect())
}
