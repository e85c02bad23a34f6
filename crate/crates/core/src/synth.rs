//! Synthetic languages: the dependents of noun and verb heads in a
//! substrate treebank are reordered toward the directionalities of other
//! languages (superstrates).
//!
//! This is a deliberately simple stand-in for full dependent-order
//! permutation. Each dependent of a permuted head independently goes right
//! of its head with probability `p_right` of its relation in the relevant
//! superstrate, so the synthetic directionality targets are exact by
//! construction. Dependents that end up on the same side keep their
//! substrate order and every subtree stays contiguous, so output trees are
//! projective. Non-projective substrate sentences are copied unchanged.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Sentence, Token, Treebank};
use crate::error::Result;
use crate::rng::{substream, Stream};
use crate::typology::{directionality, DirectionalityVector, RelationScheme};

/// Tags whose dependents are reordered toward the verb and noun
/// superstrates.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct HeadCategories {
    pub verb: BTreeSet<String>,
    pub noun: BTreeSet<String>,
}

impl Default for HeadCategories {
    fn default() -> Self {
        HeadCategories {
            verb: ["VERB".to_string()].into_iter().collect(),
            noun: ["NOUN".to_string()].into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSpec<'a> {
    pub substrate: &'a Treebank,
    pub superstrate_verb: Option<&'a DirectionalityVector>,
    pub superstrate_noun: Option<&'a DirectionalityVector>,
    pub seed: u64,
    pub heads: HeadCategories,
    /// How edges are mapped to the relations the superstrates are keyed by.
    pub scheme: RelationScheme,
}

impl<'a> SynthSpec<'a> {
    pub fn new(
        substrate: &'a Treebank,
        superstrate_verb: Option<&'a DirectionalityVector>,
        superstrate_noun: Option<&'a DirectionalityVector>,
        seed: u64,
    ) -> Self {
        SynthSpec {
            substrate,
            superstrate_verb,
            superstrate_noun,
            seed,
            heads: HeadCategories::default(),
            scheme: RelationScheme::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthProvenance {
    pub substrate: String,
    pub verb: Option<String>,
    pub noun: Option<String>,
    pub seed: u64,
}

impl SynthProvenance {
    /// Language id of the synthetic treebank, e.g. `en~de~none`.
    pub fn language_id(&self) -> String {
        format!(
            "{}~{}~{}",
            self.substrate,
            self.verb.as_deref().unwrap_or("none"),
            self.noun.as_deref().unwrap_or("none")
        )
    }
}

#[derive(Debug, Clone)]
pub struct SynthTreebank {
    pub treebank: Treebank,
    pub provenance: SynthProvenance,
    /// Tags whose dependents were reordered.
    pub permuted_tags: BTreeSet<String>,
    /// Non-projective substrate sentences, copied unchanged.
    pub nonprojective_copied: usize,
}

/// Which superstrate, if any, governs the dependents of a head tag.
struct Plan<'a> {
    verb_tags: &'a BTreeSet<String>,
    noun_tags: &'a BTreeSet<String>,
    verb: Option<&'a DirectionalityVector>,
    noun: Option<&'a DirectionalityVector>,
    fallback: Option<DirectionalityVector>,
    scheme: RelationScheme,
}

impl Plan<'_> {
    fn superstrate(&self, head_tag: &str) -> Option<&DirectionalityVector> {
        if self.verb_tags.contains(head_tag) {
            if let Some(v) = self.verb {
                return Some(v);
            }
        }
        if self.noun_tags.contains(head_tag) {
            return self.noun;
        }
        None
    }

    fn p_right(&self, sup: &DirectionalityVector, rel: &str) -> f64 {
        sup.get(rel)
            .or_else(|| self.fallback.as_ref().and_then(|f| f.get(rel)))
            .map_or(0.5, |st| st.p_right)
    }
}

/// Linear order of the subtree of `node`, as original positions. `side`
/// returns `Some(goes_right)` for dependents of permuted heads and `None`
/// to keep the substrate side.
fn linearize<F>(s: &Sentence, children: &[Vec<usize>], node: usize, side: &mut F, out: &mut Vec<usize>)
where
    F: FnMut(usize, usize) -> Option<bool>,
{
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &c in &children[node] {
        let goes_right = side(node, c).unwrap_or(c > node);
        if goes_right {
            right.push(c);
        } else {
            left.push(c);
        }
    }
    for c in left {
        linearize(s, children, c, side, out);
    }
    if node != 0 {
        out.push(node);
    }
    for c in right {
        linearize(s, children, c, side, out);
    }
}

/// Rebuilds `s` with tokens in `order` (original positions).
fn reorder(s: &Sentence, order: &[usize]) -> Sentence {
    let mut new_pos = vec![0usize; s.len() + 1];
    for (i, &old) in order.iter().enumerate() {
        new_pos[old] = i + 1;
    }
    let tokens = order
        .iter()
        .map(|&old| {
            let t = &s.tokens()[old - 1];
            Token {
                index: new_pos[old],
                form: t.form.clone(),
                tag: t.tag.clone(),
                head: new_pos[t.head],
                deprel: t.deprel.clone(),
            }
        })
        .collect();
    Sentence::new(tokens, s.sent_id().map(String::from)).expect("reordering preserves the tree")
}

fn permute_sentence(s: &Sentence, plan: &Plan<'_>, rng: &mut ChaCha8Rng) -> Sentence {
    let children = s.children();
    let mut order = Vec::with_capacity(s.len());
    let mut side = |head: usize, child: usize| -> Option<bool> {
        if head == 0 {
            return None;
        }
        let ht = s.tag(head);
        let sup = plan.superstrate(ht.as_str())?;
        let ct = s.tag(child);
        let rel = plan.scheme.relation(&s.tokens()[child - 1].deprel, ht, ct);
        Some(rng.random::<f64>() < plan.p_right(sup, &rel))
    };
    linearize(s, &children, 0, &mut side, &mut order);
    reorder(s, &order)
}

/// Reorders dependents of verb-set and noun-set heads. Sentence `i` draws
/// from its own random stream, so the output does not depend on the order
/// sentences are processed in.
pub fn permute(spec: &SynthSpec<'_>) -> Result<SynthTreebank> {
    let fallback = directionality(spec.substrate, spec.scheme).ok();
    let plan = Plan {
        verb_tags: &spec.heads.verb,
        noun_tags: &spec.heads.noun,
        verb: spec.superstrate_verb,
        noun: spec.superstrate_noun,
        fallback,
        scheme: spec.scheme,
    };
    let mut permuted_tags = BTreeSet::new();
    if spec.superstrate_verb.is_some() {
        permuted_tags.extend(spec.heads.verb.iter().cloned());
    }
    if spec.superstrate_noun.is_some() {
        permuted_tags.extend(spec.heads.noun.iter().cloned());
    }
    let mut copied = 0;
    let sentences = spec
        .substrate
        .sentences()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if !s.is_projective() {
                copied += 1;
                return s.clone();
            }
            let mut rng = substream(spec.seed, Stream::Synth, i as u64);
            permute_sentence(s, &plan, &mut rng)
        })
        .collect();
    let provenance = SynthProvenance {
        substrate: spec.substrate.language_id.clone(),
        verb: spec.superstrate_verb.map(|d| d.language_id.clone()),
        noun: spec.superstrate_noun.map(|d| d.language_id.clone()),
        seed: spec.seed,
    };
    Ok(SynthTreebank {
        treebank: Treebank::new(provenance.language_id(), sentences)?,
        provenance,
        permuted_tags,
        nonprojective_copied: copied,
    })
}

/// A projective sentence with the same tree as `s`: every subtree is made
/// contiguous while keeping each head's dependents on their original side
/// and in their original order.
pub fn projectivize(s: &Sentence) -> Sentence {
    let mut order = Vec::with_capacity(s.len());
    linearize(s, &s.children(), 0, &mut |_, _| None, &mut order);
    reorder(s, &order)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SentenceCount { expected: usize, actual: usize },
    /// Different tree (labels, tags or attachments) from the substrate.
    EdgeMultiset { sentence: usize },
    NonProjective { sentence: usize },
    /// A head that should not have been permuted has its dependents in a
    /// different order.
    SiblingOrder { sentence: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynthReport {
    pub sentences_checked: usize,
    pub violations: Vec<Violation>,
}

impl SynthReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Canonical form of the subtree at `node`. Children of heads in
/// `unordered` are sorted; others are listed in linear order with their
/// side of the head. `unordered = None` sorts every node, giving an
/// order-free form of the tree.
fn canonical(s: &Sentence, children: &[Vec<usize>], node: usize, unordered: Option<&BTreeSet<String>>) -> String {
    let label = if node == 0 {
        "ROOT".to_string()
    } else {
        let t = &s.tokens()[node - 1];
        format!("{}:{}", t.tag, t.deprel)
    };
    let sort_all = unordered.is_none();
    let sort_here = sort_all || (node != 0 && unordered.unwrap().contains(s.tag(node).as_str()));
    let mut parts: Vec<String> = children[node]
        .iter()
        .map(|&c| {
            let sub = canonical(s, children, c, unordered);
            if sort_here {
                sub
            } else if c < node {
                format!("<{sub}")
            } else {
                format!(">{sub}")
            }
        })
        .collect();
    if sort_here {
        parts.sort();
    }
    format!("{label}({})", parts.join(","))
}

fn edge_triples(s: &Sentence) -> BTreeMap<(String, String, String), usize> {
    let mut out = BTreeMap::new();
    for t in s.tokens() {
        let head = if t.head == 0 { "ROOT".to_string() } else { s.tag(t.head).to_string() };
        *out.entry((head, t.tag.to_string(), t.deprel.clone())).or_insert(0) += 1;
    }
    out
}

/// Compares a synthetic treebank with its substrate sentence by sentence.
pub fn verify_synth(s: &SynthTreebank, substrate: &Treebank) -> SynthReport {
    let mut report = SynthReport::default();
    let (got, want) = (s.treebank.sentences(), substrate.sentences());
    if got.len() != want.len() {
        report.violations.push(Violation::SentenceCount { expected: want.len(), actual: got.len() });
    }
    for (i, (a, b)) in got.iter().zip(want).enumerate() {
        report.sentences_checked += 1;
        let (ca, cb) = (a.children(), b.children());
        if edge_triples(a) != edge_triples(b) || canonical(a, &ca, 0, None) != canonical(b, &cb, 0, None) {
            report.violations.push(Violation::EdgeMultiset { sentence: i });
            continue;
        }
        if b.is_projective() && !a.is_projective() {
            report.violations.push(Violation::NonProjective { sentence: i });
        }
        let semi_a = canonical(a, &ca, 0, Some(&s.permuted_tags));
        let semi_b = canonical(b, &cb, 0, Some(&s.permuted_tags));
        if semi_a != semi_b {
            report.violations.push(Violation::SiblingOrder { sentence: i });
        }
    }
    report
}
