//! Gold directionality vectors and cross-language aggregates.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{PosTag, Treebank};
use crate::error::{Error, Result};

/// How raw dependency labels become relation types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RelationScheme {
    /// `nmod:poss` counts as `nmod`.
    #[default]
    #[cfg_attr(feature = "serde", serde(rename = "strip"))]
    StripSubtypes,
    #[cfg_attr(feature = "serde", serde(rename = "keep"))]
    KeepSubtypes,
    /// The label is replaced by the ordered pair `(head tag,child tag)`.
    PosPair,
}

impl RelationScheme {
    pub fn relation(self, deprel: &str, head_tag: &PosTag, child_tag: &PosTag) -> String {
        match self {
            RelationScheme::StripSubtypes => deprel.split(':').next().unwrap_or(deprel).to_string(),
            RelationScheme::KeepSubtypes => deprel.to_string(),
            RelationScheme::PosPair => format!("({head_tag},{child_tag})"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RelationScheme::StripSubtypes => "strip",
            RelationScheme::KeepSubtypes => "keep",
            RelationScheme::PosPair => "pos-pair",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "strip" | "strip-subtypes" => Some(RelationScheme::StripSubtypes),
            "keep" | "keep-subtypes" => Some(RelationScheme::KeepSubtypes),
            "pos-pair" => Some(RelationScheme::PosPair),
            _ => None,
        }
    }
}

/// Statistics of one relation type in one language.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationStat {
    /// Fraction of the relation's edges whose child follows its head.
    pub p_right: f64,
    /// Share of this relation among all counted edges.
    pub rel_freq: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalityVector {
    pub language_id: String,
    pub entries: BTreeMap<String, RelationStat>,
}

impl DirectionalityVector {
    /// Builds a vector from `(rightward, total)` counts per relation.
    /// Relations with a zero total are dropped.
    pub fn from_counts(
        language_id: impl Into<String>,
        counts: &BTreeMap<String, (u64, u64)>,
    ) -> Result<Self> {
        let language_id = language_id.into();
        let total: u64 = counts.values().map(|&(_, n)| n).sum();
        if total == 0 {
            return Err(Error::NoEdges(language_id));
        }
        let entries = counts
            .iter()
            .filter(|(_, &(_, n))| n > 0)
            .map(|(r, &(right, n))| {
                (
                    r.clone(),
                    RelationStat {
                        p_right: right as f64 / n as f64,
                        rel_freq: n as f64 / total as f64,
                        count: n,
                    },
                )
            })
            .collect();
        Ok(DirectionalityVector {
            language_id,
            entries,
        })
    }

    pub fn get(&self, relation: &str) -> Option<&RelationStat> {
        self.entries.get(relation)
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Relations ordered by decreasing frequency, ties broken by name.
    pub fn by_frequency(&self) -> Vec<(&str, &RelationStat)> {
        let mut v: Vec<_> = self.entries.iter().map(|(r, s)| (r.as_str(), s)).collect();
        v.sort_by(|a, b| b.1.rel_freq.total_cmp(&a.1.rel_freq).then(a.0.cmp(b.0)));
        v
    }
}

/// Edge counts of `tb` per normalized relation: `(rightward, total)`.
pub fn edge_counts(
    tb: &Treebank,
    scheme: RelationScheme,
    include_root: bool,
) -> BTreeMap<String, (u64, u64)> {
    let root_tag = PosTag::boundary();
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for s in tb.sentences() {
        for t in s.tokens() {
            if t.head == 0 && !include_root {
                continue;
            }
            let head_tag = if t.head == 0 { &root_tag } else { s.tag(t.head) };
            let rel = scheme.relation(&t.deprel, head_tag, &t.tag);
            let e = counts.entry(rel).or_insert((0, 0));
            if t.index > t.head {
                e.0 += 1;
            }
            e.1 += 1;
        }
    }
    counts
}

/// Gold directionality of every relation in `tb`. Root attachments are
/// excluded.
pub fn directionality(tb: &Treebank, scheme: RelationScheme) -> Result<DirectionalityVector> {
    directionality_with_root(tb, scheme, false)
}

/// Like [`directionality`], optionally counting root attachments as a
/// relation (always rightward of the virtual root at position 0).
pub fn directionality_with_root(
    tb: &Treebank,
    scheme: RelationScheme,
    include_root: bool,
) -> Result<DirectionalityVector> {
    DirectionalityVector::from_counts(tb.language_id.clone(), &edge_counts(tb, scheme, include_root))
}

/// Cross-language initialization statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitStats {
    /// Frequency-weighted mean directionality per relation.
    pub pbar: BTreeMap<String, f64>,
    /// `(relation, language) → w_L(r)`.
    pub weights: BTreeMap<(String, String), f64>,
}

/// `w_L(r) = p*(r|L) / Σ_L' p*(r|L')` and `p̄_r = Σ_L w_L(r) p*(→|r,L)`.
pub fn init_stats(train: &[DirectionalityVector]) -> InitStats {
    let mut mass: BTreeMap<&str, f64> = BTreeMap::new();
    for dv in train {
        for (r, st) in &dv.entries {
            *mass.entry(r.as_str()).or_insert(0.0) += st.rel_freq;
        }
    }
    let mut stats = InitStats::default();
    for dv in train {
        for (r, st) in &dv.entries {
            let w = st.rel_freq / mass[r.as_str()];
            stats
                .weights
                .insert((r.clone(), dv.language_id.clone()), w);
            *stats.pbar.entry(r.clone()).or_insert(0.0) += w * st.p_right;
        }
    }
    stats
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Leftward,
    Rightward,
}

/// Rightward iff `p > 0.5`.
pub fn binary_label(p: f64) -> Direction {
    if p > 0.5 {
        Direction::Rightward
    } else {
        Direction::Leftward
    }
}
