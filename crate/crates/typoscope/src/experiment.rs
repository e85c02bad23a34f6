//! Loading a language pool, building augmentation languages and running
//! cross-validation across threads.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Mutex;

use typoscope_core::cv::{cv_cell, CvReport, FoldPlan, GridPoint, Provenance};
use typoscope_core::rng::{substream, Stream};
use typoscope_core::synth::{permute, SynthSpec};
use typoscope_core::train::Language;
use typoscope_core::typology::RelationScheme;

use rand::RngCore;

use crate::config::AugmentConfig;
use crate::conllu;
use crate::error::{Error, Result};

/// Reads one language per treebank file; ids are file stems and must be
/// unique.
pub fn load_pool(paths: &[PathBuf], scheme: RelationScheme) -> Result<Vec<Language>> {
    let mut seen = BTreeSet::new();
    let mut pool = Vec::with_capacity(paths.len());
    for p in paths {
        let tb = conllu::read(p)?;
        if !seen.insert(tb.language_id.clone()) {
            return Err(Error::Config(format!("duplicate language id {:?} ({})", tb.language_id, p.display())));
        }
        pool.push(Language::new(tb, scheme)?);
    }
    Ok(pool)
}

/// Synthetic languages requested by `cfg`, with the provenance the fold plan
/// uses to keep them away from folds holding out any of their sources.
pub fn augment(
    pool: &[Language],
    cfg: &AugmentConfig,
    scheme: RelationScheme,
    seed: u64,
) -> Result<(Vec<Language>, Vec<Provenance>)> {
    let find = |id: &str| {
        pool.iter()
            .find(|l| l.id() == id)
            .ok_or_else(|| Error::Config(format!("augment refers to unknown language {id:?}")))
    };
    let mut requests: Vec<(String, Option<String>, Option<String>)> = Vec::new();
    if cfg.all {
        for s in pool {
            for v in pool {
                for n in pool {
                    if s.id() != v.id() || s.id() != n.id() {
                        requests.push((s.id().into(), Some(v.id().into()), Some(n.id().into())));
                    }
                }
            }
        }
    }
    for e in &cfg.languages {
        requests.push((e.substrate.clone(), e.verb.clone(), e.noun.clone()));
    }

    let mut langs = Vec::with_capacity(requests.len());
    let mut provenance = Vec::with_capacity(requests.len());
    let mut seen = BTreeSet::new();
    for (k, (s, v, n)) in requests.into_iter().enumerate() {
        let sub = find(&s)?;
        let verb = v.as_deref().map(find).transpose()?;
        let noun = n.as_deref().map(find).transpose()?;
        let spec = SynthSpec {
            substrate: &sub.treebank,
            superstrate_verb: verb.map(|l| &l.gold),
            superstrate_noun: noun.map(|l| &l.gold),
            seed: substream(seed, Stream::Synth, k as u64).next_u64(),
            heads: cfg.heads.clone(),
            scheme,
        };
        let synth = permute(&spec)?;
        let id = synth.treebank.language_id.clone();
        if !seen.insert(id.clone()) {
            continue;
        }
        let superstrates: BTreeSet<String> = [v, n].into_iter().flatten().filter(|x| *x != s).collect();
        provenance.push(Provenance { id, substrate: s, superstrates: superstrates.into_iter().collect() });
        langs.push(Language::new(synth.treebank, scheme)?);
    }
    Ok((langs, provenance))
}

/// Every (point, fold) cell on up to `jobs` threads. The report does not
/// depend on `jobs`.
pub fn run_cv(
    pool: &[Language],
    extras: &[Language],
    plan: &FoldPlan,
    grid: &[GridPoint],
    eps: f64,
    jobs: usize,
) -> Result<CvReport> {
    plan.check_covers(pool)?;
    if grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    let cells: Vec<(usize, usize)> =
        (0..grid.len()).flat_map(|p| (0..plan.len()).map(move |f| (p, f))).collect();
    let next = Mutex::new(0usize);
    let results = Mutex::new(Vec::with_capacity(cells.len()));
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cells.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().unwrap();
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(&(point, fold)) = cells.get(i) else { break };
                let r = cv_cell(pool, extras, plan, grid, point, fold, eps);
                results.lock().unwrap().push((i, r));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    let mut rows = Vec::new();
    for (_, r) in results {
        rows.extend(r?);
    }
    Ok(CvReport::from_rows(grid.iter().map(|g| g.name.clone()).collect(), rows))
}
