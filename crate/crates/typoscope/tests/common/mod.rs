#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use typoscope::conllu;
use typoscope_core::corpus::Treebank;
use typoscope_core::synth::{permute, HeadCategories, SynthSpec};
use typoscope_core::typology::{directionality, RelationScheme};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn fixture() -> Treebank {
    conllu::read(&data("fixture.conllu")).unwrap()
}

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_typoscope"));
    c.env_remove("TYPOSCOPE_SEED");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Verb heads, and every nominal head, so all fixture relations follow the
/// superstrates.
pub fn heads() -> HeadCategories {
    let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
    HeadCategories { verb: set(&["VERB"]), noun: set(&["NOUN", "PROPN", "PRON"]) }
}

/// `n` languages made by permuting `base` toward random targets near 0 or 1.
pub fn synthetic_languages(base: &Treebank, n: usize, seed: u64) -> Vec<Treebank> {
    let scheme = RelationScheme::StripSubtypes;
    let base_dv = directionality(base, scheme).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut target = base_dv.clone();
            target.language_id = format!("target{i}");
            for st in target.entries.values_mut() {
                let near: f64 = rng.random_range(0.0..0.15);
                st.p_right = if rng.random_bool(0.5) { near } else { 1.0 - near };
            }
            let mut spec = SynthSpec::new(base, Some(&target), Some(&target), seed.wrapping_add(i as u64));
            spec.heads = heads();
            let mut tb = permute(&spec).unwrap().treebank;
            tb.language_id = format!("syn{i:02}");
            tb
        })
        .collect()
}

/// Writes each treebank to `<dir>/<language_id>.conllu`.
pub fn write_pool(dir: &Path, tbs: &[Treebank]) -> Vec<PathBuf> {
    tbs.iter()
        .map(|tb| {
            let p = dir.join(format!("{}.conllu", tb.language_id));
            conllu::write_file(&p, tb, &[]).unwrap();
            p
        })
        .collect()
}

pub fn small_fixture(n: usize) -> Treebank {
    let tb = fixture();
    Treebank::new("small", tb.sentences()[..n].to_vec()).unwrap()
}
