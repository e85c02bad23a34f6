//! Hand-engineered co-occurrence features of an unparsed corpus.
//!
//! For a token at position `j` and a window of the next `w` tags (padded
//! with `#` past the sentence end), a prevalence measure `g(t|j)` says how
//! strongly tag `t` occurs in the window: the fraction of window slots
//! holding `t`, or whether `t` occurs at least `b` times. Averaging `g` over
//! all positions gives `π_t`; averaging over positions tagged `s` gives
//! `π_{t|s}`. Mirrored windows (negative `w`) are computed on the reversed
//! corpus. Truncated windows stop before the first `#` or the first repeat
//! of the anchor tag.
//!
//! Both means are backoff-smoothed with strength `λ`: `π_t` toward the
//! global mean of `g`, and `π_{t|s}` toward the smoothed `π_t`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{PosTag, TaggedCorpus, BOUNDARY};
use crate::error::{Error, Result};

/// Which feature templates to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureFamilies {
    /// `π_{t|s}`
    pub conditional: bool,
    /// `π_{t|s} · π_s`
    pub joint: bool,
    /// `π_{t|s} // π_t` and `π_t // π_{t|s}`
    pub pmi: bool,
    /// `π_{t|s}^w // π_{t|s}^{−w}`, for positive `w` only.
    pub asymmetry: bool,
    /// Adds the at-least-`b` measures next to the fraction measure.
    pub b_threshold: bool,
    /// Adds truncated variants of every window.
    pub truncated: bool,
}

impl FeatureFamilies {
    pub const NONE: FeatureFamilies = FeatureFamilies {
        conditional: false,
        joint: false,
        pmi: false,
        asymmetry: false,
        b_threshold: false,
        truncated: false,
    };

    pub const ALL: FeatureFamilies = FeatureFamilies {
        conditional: true,
        joint: true,
        pmi: true,
        asymmetry: true,
        b_threshold: true,
        truncated: true,
    };

    /// PMI and asymmetry with b-thresholds and truncated windows.
    pub const SELECTED: FeatureFamilies = FeatureFamilies {
        conditional: false,
        joint: false,
        pmi: true,
        asymmetry: true,
        b_threshold: true,
        truncated: true,
    };

    fn any_template(&self) -> bool {
        self.conditional || self.joint || self.pmi || self.asymmetry
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FeatureConfig {
    /// Signed window widths; negative widths look left.
    pub windows: Vec<i32>,
    pub families: FeatureFamilies,
    pub b_values: Vec<u8>,
    pub lambda: f64,
    /// One feature block per threshold, concatenated in this order.
    pub length_thresholds: Vec<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            windows: vec![1, 3, 8, 100, -1, -3, -8, -100],
            families: FeatureFamilies::SELECTED,
            b_values: vec![1, 2],
            lambda: 1.0,
            length_thresholds: vec![40],
        }
    }
}

impl FeatureConfig {
    /// No features at all: a scorer on top of it only has biases.
    pub fn empty() -> Self {
        FeatureConfig {
            families: FeatureFamilies::NONE,
            ..FeatureConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() || self.windows.contains(&0) {
            return Err(Error::Config("feature windows must be non-empty and non-zero".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if self.length_thresholds.is_empty() || self.length_thresholds.contains(&0) {
            return Err(Error::Config("length thresholds must be positive".into()));
        }
        if self.families.b_threshold && self.b_values.iter().any(|&b| b == 0) {
            return Err(Error::Config("b values must be positive".into()));
        }
        Ok(())
    }

    fn window_variants(&self) -> Vec<WindowVariant> {
        let mut out = Vec::new();
        for &w in &self.windows {
            out.push(WindowVariant::new(w, false));
            if self.families.truncated {
                out.push(WindowVariant::new(w, true));
            }
        }
        out
    }

    fn measures(&self) -> Vec<Measure> {
        let mut out = vec![Measure::Fraction];
        if self.families.b_threshold {
            out.extend(self.b_values.iter().map(|&b| Measure::AtLeast(b)));
        }
        out
    }
}

/// A window: width, direction and truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowVariant {
    pub width: usize,
    pub mirrored: bool,
    pub truncated: bool,
}

impl WindowVariant {
    pub fn new(signed_width: i32, truncated: bool) -> Self {
        WindowVariant {
            width: signed_width.unsigned_abs() as usize,
            mirrored: signed_width < 0,
            truncated,
        }
    }

    pub fn mirror(self) -> Self {
        WindowVariant {
            mirrored: !self.mirrored,
            ..self
        }
    }
}

impl fmt::Display for WindowVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.mirrored { '-' } else { '+' };
        let hat = if self.truncated { "^" } else { "" };
        write!(f, "{sign}{}{hat}", self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Measure {
    /// Fraction of window slots holding `t`; undefined on an empty window.
    Fraction,
    /// 1 if the window holds at least `b` copies of `t`.
    AtLeast(u8),
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Fraction => f.write_str("frac"),
            Measure::AtLeast(b) => write!(f, "b{b}"),
        }
    }
}

/// The tags features are indexed by: `#` plus the real tags, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagInventory {
    all: Vec<PosTag>,
}

impl TagInventory {
    pub fn new(real_tags: impl IntoIterator<Item = PosTag>) -> Self {
        let mut all: Vec<PosTag> = real_tags.into_iter().filter(|t| !t.is_boundary()).collect();
        all.push(PosTag::boundary());
        all.sort();
        all.dedup();
        TagInventory { all }
    }

    /// The seventeen UD universal tags.
    pub fn universal() -> Self {
        TagInventory::new(crate::corpus::UD_TAGS.iter().map(|t| PosTag::new(t).unwrap()))
    }

    /// Every real tag occurring in `corpora`.
    pub fn from_corpora<'a>(corpora: impl IntoIterator<Item = &'a TaggedCorpus>) -> Self {
        let mut tags = alloc::collections::BTreeSet::new();
        for c in corpora {
            for seq in c.sequences() {
                tags.extend(seq.iter().cloned());
            }
        }
        TagInventory::new(tags)
    }

    /// All tags including `#` (the `t` side of features).
    pub fn all(&self) -> &[PosTag] {
        &self.all
    }

    /// Real tags only (the `s` side of features).
    pub fn real(&self) -> impl Iterator<Item = &PosTag> {
        self.all.iter().filter(|t| !t.is_boundary())
    }

    pub fn index_of(&self, tag: &PosTag) -> Option<usize> {
        self.all.binary_search(tag).ok()
    }

    fn boundary_index(&self) -> usize {
        self.index_of(&PosTag::boundary()).unwrap()
    }

    /// Index of each real tag in `all`.
    fn real_indices(&self) -> Vec<usize> {
        (0..self.all.len())
            .filter(|&i| self.all[i].as_str() != BOUNDARY)
            .collect()
    }
}

/// Smoothed prevalence means for one window variant and measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Prevalence {
    /// `π_t`, indexed like [`TagInventory::all`].
    pub uncond: Vec<f64>,
    /// `π_{t|s}`, row per real tag `s`, column per tag `t`.
    pub cond: Vec<Vec<f64>>,
}

/// Prevalence means for every window variant and measure a configuration
/// needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PrevalenceTables {
    pub inventory: TagInventory,
    pub tables: BTreeMap<(WindowVariant, Measure), Prevalence>,
}

impl PrevalenceTables {
    pub fn get(&self, w: WindowVariant, m: Measure) -> &Prevalence {
        &self.tables[&(w, m)]
    }

    /// `π_t`, or `None` if `t` is not in the inventory.
    pub fn uncond(&self, w: WindowVariant, m: Measure, t: &PosTag) -> Option<f64> {
        Some(self.get(w, m).uncond[self.inventory.index_of(t)?])
    }

    /// `π_{t|s}` for a real tag `s`.
    pub fn cond(&self, w: WindowVariant, m: Measure, s: &PosTag, t: &PosTag) -> Option<f64> {
        let si = self.inventory.real().position(|x| x == s)?;
        Some(self.get(w, m).cond[si][self.inventory.index_of(t)?])
    }
}

/// Tag sequences as small integers: inventory tags keep their inventory
/// index, tags outside it get fresh codes so truncation still sees repeats.
fn encode(c: &TaggedCorpus, inv: &TagInventory) -> Vec<Vec<usize>> {
    let mut extra: BTreeMap<PosTag, usize> = BTreeMap::new();
    let n = inv.all().len();
    c.sequences()
        .iter()
        .map(|seq| {
            seq.iter()
                .map(|t| match inv.index_of(t) {
                    Some(i) => i,
                    None => {
                        let next = n + extra.len();
                        *extra.entry(t.clone()).or_insert(next)
                    }
                })
                .collect()
        })
        .collect()
}

struct Accumulator {
    sum_t: Vec<f64>,
    sum_st: Vec<Vec<f64>>,
    n_s: Vec<f64>,
    n: f64,
    g_total: f64,
}

impl Accumulator {
    fn new(n_real: usize, n_all: usize) -> Self {
        Accumulator {
            sum_t: vec![0.0; n_all],
            sum_st: vec![vec![0.0; n_all]; n_real],
            n_s: vec![0.0; n_real],
            n: 0.0,
            g_total: 0.0,
        }
    }

    fn finish(self, lambda: f64) -> Prevalence {
        let n_all = self.sum_t.len();
        let mean_g = if self.n > 0.0 {
            self.g_total / (self.n * n_all as f64)
        } else {
            0.0
        };
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        let uncond: Vec<f64> = self
            .sum_t
            .iter()
            .map(|&s| ratio(s + lambda * mean_g, self.n + lambda))
            .collect();
        let cond = self
            .sum_st
            .iter()
            .zip(&self.n_s)
            .map(|(row, &ns)| {
                row.iter()
                    .zip(&uncond)
                    .map(|(&s, &pt)| ratio(s + lambda * pt, ns + lambda))
                    .collect()
            })
            .collect();
        Prevalence { uncond, cond }
    }
}

/// Accumulates all measures of one window variant over `coded` (already
/// reversed for mirrored windows).
fn scan(
    coded: &[Vec<usize>],
    inv: &TagInventory,
    width: usize,
    truncated: bool,
    measures: &[Measure],
    lambda: f64,
) -> Vec<Prevalence> {
    let n_all = inv.all().len();
    let boundary = inv.boundary_index();
    let real_idx = inv.real_indices();
    let mut s_row = vec![usize::MAX; n_all];
    for (row, &i) in real_idx.iter().enumerate() {
        s_row[i] = row;
    }
    let mut accs: Vec<Accumulator> = measures
        .iter()
        .map(|_| Accumulator::new(real_idx.len(), n_all))
        .collect();
    let mut counts = vec![0usize; n_all];
    let mut touched: Vec<usize> = Vec::new();
    for seq in coded {
        let len = seq.len();
        for j in 1..len.saturating_sub(1) {
            let anchor = seq[j];
            let mut window_len = 0usize;
            for k in j + 1..=j + width {
                let code = if k < len { seq[k] } else { boundary };
                if truncated && (code == boundary || code == anchor) {
                    break;
                }
                window_len += 1;
                if code < n_all {
                    if counts[code] == 0 {
                        touched.push(code);
                    }
                    counts[code] += 1;
                }
            }
            let s = if anchor < n_all { s_row[anchor] } else { usize::MAX };
            for (acc, m) in accs.iter_mut().zip(measures) {
                if *m == Measure::Fraction && window_len == 0 {
                    continue;
                }
                acc.n += 1.0;
                if s != usize::MAX {
                    acc.n_s[s] += 1.0;
                }
                for &t in &touched {
                    let g = match *m {
                        Measure::Fraction => counts[t] as f64 / window_len as f64,
                        Measure::AtLeast(b) => {
                            if counts[t] >= b as usize {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    acc.sum_t[t] += g;
                    acc.g_total += g;
                    if s != usize::MAX {
                        acc.sum_st[s][t] += g;
                    }
                }
            }
            for &t in &touched {
                counts[t] = 0;
            }
            touched.clear();
        }
    }
    accs.into_iter().map(|a| a.finish(lambda)).collect()
}

/// Computes the prevalence tables for `variants × measures` on `c`.
pub fn prevalence_tables_for(
    c: &TaggedCorpus,
    inv: &TagInventory,
    variants: &[WindowVariant],
    measures: &[Measure],
    lambda: f64,
) -> Result<PrevalenceTables> {
    if c.is_empty() {
        return Err(Error::NoSentences(c.language_id.clone()));
    }
    let forward = encode(c, inv);
    let backward: Vec<Vec<usize>> = forward
        .iter()
        .map(|s| s.iter().rev().copied().collect())
        .collect();
    let mut tables = BTreeMap::new();
    for &v in variants {
        if measures.iter().all(|&m| tables.contains_key(&(v, m))) {
            continue;
        }
        let coded = if v.mirrored { &backward } else { &forward };
        let prevs = scan(coded, inv, v.width, v.truncated, measures, lambda);
        for (&m, p) in measures.iter().zip(prevs) {
            tables.insert((v, m), p);
        }
    }
    Ok(PrevalenceTables {
        inventory: inv.clone(),
        tables,
    })
}

/// Every table `cfg` needs on `c` (no length filtering applied here).
pub fn prevalence_tables(
    c: &TaggedCorpus,
    cfg: &FeatureConfig,
    inv: &TagInventory,
) -> Result<PrevalenceTables> {
    let mut variants = cfg.window_variants();
    if cfg.families.asymmetry {
        let mirrors: Vec<WindowVariant> = variants
            .iter()
            .filter(|v| !v.mirrored)
            .map(|v| v.mirror())
            .collect();
        variants.extend(mirrors);
    }
    variants.sort();
    variants.dedup();
    prevalence_tables_for(c, inv, &variants, &cfg.measures(), cfg.lambda)
}

/// `min(x / y, 1)`, with `x // 0 = 1`.
pub fn clipped_ratio(x: f64, y: f64) -> f64 {
    if y <= 0.0 {
        1.0
    } else {
        let r = x / y;
        if r > 1.0 {
            1.0
        } else {
            r
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Template {
    Prevalence,
    Conditional,
    Joint,
    Pmi,
    InversePmi,
    Asymmetry,
}

impl Template {
    fn name(self) -> &'static str {
        match self {
            Template::Prevalence => "prev",
            Template::Conditional => "cond",
            Template::Joint => "joint",
            Template::Pmi => "pmi",
            Template::InversePmi => "ipmi",
            Template::Asymmetry => "asym",
        }
    }

    fn enabled(self, f: &FeatureFamilies) -> bool {
        match self {
            Template::Prevalence => f.any_template(),
            Template::Conditional => f.conditional,
            Template::Joint => f.joint,
            Template::Pmi | Template::InversePmi => f.pmi,
            Template::Asymmetry => f.asymmetry,
        }
    }

    const ORDER: [Template; 6] = [
        Template::Prevalence,
        Template::Conditional,
        Template::Joint,
        Template::Pmi,
        Template::InversePmi,
        Template::Asymmetry,
    ];
}

/// Stable name ↔ index mapping of a feature vector's coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureCatalog {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl FeatureCatalog {
    pub fn new(cfg: &FeatureConfig, inv: &TagInventory) -> Self {
        let mut names = Vec::new();
        walk(cfg, inv, |thr, tpl, v, m, s, t| {
            names.push(match s {
                Some(s) => format!("len{thr}/{}/{v}/{m}/{s}/{t}", tpl.name()),
                None => format!("len{thr}/{}/{v}/{m}/{t}", tpl.name()),
            });
        });
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        FeatureCatalog { names, index }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Visits every feature coordinate in catalog order:
/// (threshold, template, window, measure, s, t).
fn walk<F>(cfg: &FeatureConfig, inv: &TagInventory, mut visit: F)
where
    F: FnMut(usize, Template, WindowVariant, Measure, Option<&PosTag>, &PosTag),
{
    let variants = cfg.window_variants();
    let measures = cfg.measures();
    for &thr in &cfg.length_thresholds {
        for tpl in Template::ORDER {
            if !tpl.enabled(&cfg.families) {
                continue;
            }
            for &v in &variants {
                if tpl == Template::Asymmetry && v.mirrored {
                    continue;
                }
                for &m in &measures {
                    if tpl == Template::Prevalence {
                        for t in inv.all() {
                            visit(thr, tpl, v, m, None, t);
                        }
                    } else {
                        for s in inv.real() {
                            for t in inv.all() {
                                visit(thr, tpl, v, m, Some(s), t);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `π(u⃗)`: dense values aligned with a [`FeatureCatalog`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Featurizes `c` under `cfg`. Each length threshold filters the corpus
/// independently; a threshold that leaves no sentences is an error.
pub fn featurize_hand(c: &TaggedCorpus, cfg: &FeatureConfig, inv: &TagInventory) -> Result<FeatureVector> {
    cfg.validate()?;
    let mut per_threshold = BTreeMap::new();
    if cfg.families.any_template() {
        for &thr in &cfg.length_thresholds {
            if !per_threshold.contains_key(&thr) {
                let filtered = c.length_filter(thr);
                per_threshold.insert(thr, prevalence_tables(&filtered, cfg, inv)?);
            }
        }
    }
    let n_all = inv.all().len();
    let real_rows: BTreeMap<&PosTag, usize> = inv.real().enumerate().map(|(i, t)| (t, i)).collect();
    let all_cols: BTreeMap<&PosTag, usize> = inv.all().iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut values = Vec::new();
    walk(cfg, inv, |thr, tpl, v, m, s, t| {
        let tables = &per_threshold[&thr];
        let p = tables.get(v, m);
        let ti = all_cols[t];
        let value = match (tpl, s) {
            (Template::Prevalence, _) => p.uncond[ti],
            (_, Some(s)) => {
                let cond = p.cond[real_rows[s]][ti];
                match tpl {
                    Template::Conditional => cond,
                    Template::Joint => cond * p.uncond[all_cols[s]],
                    Template::Pmi => clipped_ratio(cond, p.uncond[ti]),
                    Template::InversePmi => clipped_ratio(p.uncond[ti], cond),
                    Template::Asymmetry => {
                        clipped_ratio(cond, tables.get(v.mirror(), m).cond[real_rows[s]][ti])
                    }
                    Template::Prevalence => unreachable!(),
                }
            }
            (_, None) => unreachable!(),
        };
        values.push(value);
    });
    debug_assert!(n_all == 0 || values.iter().all(|v| (0.0..=1.0).contains(v)));
    Ok(FeatureVector { values })
}
