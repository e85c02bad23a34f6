//! The `typoscope` command line.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use typoscope_core::corpus::{to_tagged_corpus, TaggedCorpus};
use typoscope_core::cv::FoldPlan;
use typoscope_core::ec::{ec_predict, ec_train, Window};
use typoscope_core::eval::{evaluate, DEFAULT_TOP_K};
use typoscope_core::features::{featurize_hand, FeatureCatalog, FeatureConfig, TagInventory};
use typoscope_core::scorer::{with_unk_fallback, Model};
use typoscope_core::synth::{permute, HeadCategories, SynthSpec};
use typoscope_core::train::{init_model, train, Language};
use typoscope_core::typology::{directionality, directionality_with_root, init_stats, DirectionalityVector, RelationScheme};

use crate::config::{ExperimentConfig, Resolved};
use crate::doc::{from_json, to_json, CvSummaryDoc, PointSummary, PredictionDoc, FORMAT_VERSION};
use crate::error::{read_to_string, write_string, Error, Result};
use crate::experiment::{augment, load_pool, run_cv};
use crate::model_file::{self, SavedModel};
use crate::{conllu, tsv};

#[derive(Debug, Parser)]
#[command(name = "typoscope", version, about = "Predict dependency directionality from POS-tag sequences")]
struct Cli {
    /// Experiment seed; overrides TYPOSCOPE_SEED and config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// How relation labels are formed: strip, keep or pos-pair.
    #[arg(long, global = true, value_parser = parse_scheme)]
    scheme: Option<RelationScheme>,
    /// Loss tolerance.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Do not print the resolved settings to stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Directionality table of a CoNLL-U treebank.
    Stats {
        treebank: PathBuf,
        /// Count the root attachment as an edge.
        #[arg(long)]
        include_root: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train the expected-count baseline on treebanks.
    EcTrain {
        #[arg(required = true)]
        treebanks: Vec<PathBuf>,
        /// Maximum head-child distance, or "inf".
        #[arg(long, default_value = "8")]
        window: String,
        /// Train only on sentences of at most this many tokens.
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Predict directionality with an expected-count model.
    EcPredict {
        #[arg(long)]
        model: PathBuf,
        corpus: PathBuf,
        /// Use only sentences of at most this many tokens.
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Feature vector of a corpus, from a model or the default hand features.
    Featurize {
        corpus: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Signed window widths for the default hand features.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        windows: Option<Vec<i32>>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train the configured model on the whole pool.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Write the initialized model without training.
        #[arg(long)]
        init_only: bool,
    },
    /// Predict directionality for a corpus with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        corpus: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score predictions against gold directionality (CoNLL-U or table).
    Evaluate {
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        #[arg(long, required = true)]
        gold: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        /// Also write summary, per-relation and scatter tables here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Cross-validate the configured grid.
    Cv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Reorder a treebank toward the word order of other languages.
    Synth {
        substrate: PathBuf,
        /// Superstrate for dependents of verbal heads (CoNLL-U or table).
        #[arg(long)]
        verb: Option<PathBuf>,
        /// Superstrate for dependents of nominal heads (CoNLL-U or table).
        #[arg(long)]
        noun: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "VERB")]
        verb_tags: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "NOUN")]
        noun_tags: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_scheme(s: &str) -> std::result::Result<RelationScheme, String> {
    RelationScheme::from_name(s).ok_or_else(|| format!("unknown scheme {s:?} (expected strip, keep or pos-pair)"))
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("typoscope: {e}");
            e.exit_code()
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => write_string(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                // A closed pipe (e.g. `| head`) is not an error.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(|source| Error::Io { path: "<stdout>".into(), source }),
            }
        }
    }
}

fn announce(cli: &Cli, r: &Resolved, extra: Option<&str>) {
    if cli.quiet {
        return;
    }
    eprintln!("seed={} scheme={} eps={}", r.seed, r.scheme.name(), r.eps);
    if let Some(x) = extra {
        eprint!("{x}");
    }
}

fn corpus_of(path: &Path) -> Result<TaggedCorpus> {
    Ok(to_tagged_corpus(&conllu::read(path)?))
}

fn is_table(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "tsv")
}

/// Gold or superstrate directionality from a table or a treebank.
fn directionality_of(path: &Path, scheme: RelationScheme) -> Result<DirectionalityVector> {
    let id = conllu::language_id_of(path);
    if is_table(path) {
        tsv::read_directionality(&read_to_string(path)?, &path.display().to_string(), &id)
    } else {
        Ok(directionality(&conllu::read(path)?, scheme)?)
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train { config, .. } | Command::Cv { config, .. } => {
            let cfg = ExperimentConfig::load(config)?;
            let r = Resolved::new(cli.seed, cli.scheme, cli.eps, Some(&cfg))?;
            match &cli.command {
                Command::Train { output, init_only, .. } => cmd_train(cli, &r, &cfg, output, *init_only),
                Command::Cv { jobs, out_dir, .. } => cmd_cv(cli, &r, &cfg, *jobs, out_dir.as_deref()),
                _ => unreachable!(),
            }
        }
        cmd => {
            let r = Resolved::new(cli.seed, cli.scheme, cli.eps, None)?;
            announce(cli, &r, None);
            match cmd {
                Command::Stats { treebank, include_root, output } => {
                    let dv = directionality_with_root(&conllu::read(treebank)?, r.scheme, *include_root)?;
                    emit(output.as_deref(), &tsv::write_directionality(&dv))
                }
                Command::EcTrain { treebanks, window, max_len, output } => {
                    let window = Window::parse(window)
                        .ok_or_else(|| Error::Usage(format!("bad window {window:?} (expected a positive integer or inf)")))?;
                    let mut tbs = Vec::with_capacity(treebanks.len());
                    for p in treebanks {
                        let tb = conllu::read(p)?;
                        match max_len {
                            Some(n) => tbs.extend(tb.length_filtered(*n)),
                            None => tbs.push(tb),
                        }
                    }
                    write_string(output, &model_file::ec_to_string(&ec_train(&tbs, r.scheme, window)))
                }
                Command::EcPredict { model, corpus, max_len, output } => {
                    let m = model_file::ec_from_str(&read_to_string(model)?, &model.display().to_string())?;
                    let mut c = corpus_of(corpus)?;
                    if let Some(n) = max_len {
                        c = c.length_filter(*n);
                    }
                    let pred = ec_predict(&m, &c)?;
                    let doc = PredictionDoc::new(&c.language_id, &conllu::language_id_of(model), pred);
                    emit(output.as_deref(), &to_json(&doc))
                }
                Command::Featurize { corpus, model, windows, output } => {
                    let c = corpus_of(corpus)?;
                    let (names, values) = match model {
                        Some(path) => model_features(&load_model(path)?.model, &c)?,
                        None => {
                            let mut fc = FeatureConfig::default();
                            if let Some(w) = windows {
                                fc.windows = w.clone();
                            }
                            fc.validate()?;
                            let inv = TagInventory::from_corpora([&c]);
                            let names = FeatureCatalog::new(&fc, &inv).names().to_vec();
                            (names, featurize_hand(&c, &fc, &inv)?.values)
                        }
                    };
                    emit(output.as_deref(), &tsv::write_features(&names, &values))
                }
                Command::Predict { model, corpus, output } => {
                    let saved = load_model(model)?;
                    let c = corpus_of(corpus)?;
                    let doc = PredictionDoc::new(
                        &c.language_id,
                        &conllu::language_id_of(model),
                        saved.model.predict(&c)?,
                    );
                    emit(output.as_deref(), &to_json(&doc))
                }
                Command::Evaluate { pred, gold, top_k, out_dir } => cmd_evaluate(&r, pred, gold, *top_k, out_dir.as_deref()),
                Command::Synth { substrate, verb, noun, verb_tags, noun_tags, output } => {
                    cmd_synth(&r, substrate, verb.as_deref(), noun.as_deref(), verb_tags, noun_tags, output.as_deref())
                }
                Command::Train { .. } | Command::Cv { .. } => unreachable!(),
            }
        }
    }
}

fn load_model(path: &Path) -> Result<SavedModel> {
    model_file::from_str(&read_to_string(path)?, &path.display().to_string())
}

fn model_features(model: &Model, c: &TaggedCorpus) -> Result<(Vec<String>, Vec<f64>)> {
    let hand = |m: &typoscope_core::scorer::HandModel| -> Result<(Vec<String>, Vec<f64>)> {
        let names = FeatureCatalog::new(&m.features, &m.inventory).names().to_vec();
        Ok((names, m.featurize(c)?.values))
    };
    let neural = |m: &typoscope_core::scorer::NeuralModel| -> Result<(Vec<String>, Vec<f64>)> {
        let h = m.gru.rnn_size();
        let names = m
            .pooling
            .betas
            .iter()
            .flat_map(|b| (0..h).map(move |k| format!("pool[beta={b}][{k}]")))
            .collect();
        Ok((names, m.forward(c)?.features.values))
    };
    match model {
        Model::Hand(m) => hand(m),
        Model::Neural(m) => neural(m),
        Model::Combined(m) => {
            let (mut names, mut values) = hand(&m.hand)?;
            let (n2, v2) = neural(&m.neural)?;
            names.extend(n2);
            values.extend(v2);
            Ok((names, values))
        }
    }
}

fn cmd_train(cli: &Cli, r: &Resolved, cfg: &ExperimentConfig, output: &Path, init_only: bool) -> Result<()> {
    let point = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [model] section".into()))?;
    let mut tc = point.train.clone();
    tc.seed = r.seed;
    let settings = serde_json::json!({ "pool": cfg.pool.treebanks, "model": point.spec, "train": tc });
    announce(cli, r, Some(&format!("{}\n", serde_json::to_string(&settings).expect("settings serialize"))));

    let pool = load_pool(&cfg.pool.treebanks, r.scheme)?;
    let (extras, _) = augment(&pool, &cfg.augment, r.scheme, r.seed)?;
    let langs: Vec<&Language> = pool.iter().chain(&extras).collect();
    let model = if init_only {
        let golds: Vec<DirectionalityVector> = langs.iter().map(|l| l.gold.clone()).collect();
        init_model(&point.spec, &langs, &init_stats(&golds), r.seed)?
    } else {
        let t = train(&langs, &point.spec, &tc)?;
        if !cli.quiet {
            eprintln!("best epoch {} of {}", t.best_epoch, tc.epochs);
        }
        t.model
    };
    let saved = SavedModel { model, seed: r.seed, training: (!init_only).then_some(tc) };
    write_string(output, &model_file::to_string(&saved))
}

fn cmd_cv(cli: &Cli, r: &Resolved, cfg: &ExperimentConfig, jobs: Option<usize>, out_dir: Option<&Path>) -> Result<()> {
    let grid = cfg.grid_points(r.seed)?;
    let jobs = jobs.unwrap_or(cfg.cv.jobs);
    if jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    let mut shown = cfg.grid.clone();
    for (g, p) in shown.iter_mut().zip(&grid) {
        g.method = p.method.clone();
    }
    let settings = serde_json::json!({ "pool": cfg.pool.treebanks, "augment": cfg.augment, "cv": cfg.cv, "grid": shown });
    announce(cli, r, Some(&format!("{}\n", serde_json::to_string(&settings).expect("settings serialize"))));

    let pool = load_pool(&cfg.pool.treebanks, r.scheme)?;
    let (extras, provenance) = augment(&pool, &cfg.augment, r.scheme, r.seed)?;
    let ids: Vec<String> = pool.iter().map(|l| l.id().to_string()).collect();
    let plan = FoldPlan::dealt(&ids, cfg.cv.folds, r.seed, provenance)?;
    let report = run_cv(&pool, &extras, &plan, &grid, r.eps, jobs)?;

    let summary = CvSummaryDoc {
        format_version: FORMAT_VERSION.into(),
        kind: CvSummaryDoc::KIND.into(),
        seed: r.seed,
        eps: r.eps,
        folds: plan.folds().to_vec(),
        extras: plan.extras().iter().map(|e| e.id.clone()).collect(),
        points: report
            .points
            .iter()
            .zip(&report.mean_loss)
            .map(|(name, &mean_loss)| PointSummary { name: name.clone(), mean_loss })
            .collect(),
        best: report.points[report.best].clone(),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })?;
        write_string(&dir.join("cv_rows.tsv"), &tsv::write_cv_rows(&report))?;
        write_string(&dir.join("cv_summary.json"), &to_json(&summary))?;
    }
    let mut text = String::from("point\tmean_loss\n");
    for p in &summary.points {
        text.push_str(&format!("{}\t{:?}\n", p.name, p.mean_loss));
    }
    text.push_str(&format!("best\t{}\n", summary.best));
    emit(None, &text)
}

fn cmd_evaluate(r: &Resolved, pred: &[PathBuf], gold: &[PathBuf], top_k: usize, out_dir: Option<&Path>) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::Usage(format!("{} --pred files but {} --gold files", pred.len(), gold.len())));
    }
    let mut reports = Vec::with_capacity(pred.len());
    for (p, g) in pred.iter().zip(gold) {
        let doc: PredictionDoc = from_json(&read_to_string(p)?, &p.display().to_string(), PredictionDoc::KIND)?;
        let gold = directionality_of(g, r.scheme)?;
        let filled = with_unk_fallback(&doc.predictions, gold.relations());
        reports.push(evaluate(&filled, &gold, r.eps, top_k)?);
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })?;
        write_string(&dir.join("summary.tsv"), &tsv::write_summary(&reports))?;
        write_string(&dir.join("scatter.tsv"), &tsv::write_scatter(&reports))?;
        for rep in &reports {
            write_string(&dir.join(format!("per_relation.{}.tsv", rep.language_id)), &tsv::write_per_relation(rep))?;
        }
    }
    emit(None, &tsv::write_summary(&reports))
}

fn cmd_synth(
    r: &Resolved,
    substrate: &Path,
    verb: Option<&Path>,
    noun: Option<&Path>,
    verb_tags: &[String],
    noun_tags: &[String],
    output: Option<&Path>,
) -> Result<()> {
    let sub = conllu::read(substrate)?;
    let v = verb.map(|p| directionality_of(p, r.scheme)).transpose()?;
    let n = noun.map(|p| directionality_of(p, r.scheme)).transpose()?;
    let spec = SynthSpec {
        substrate: &sub,
        superstrate_verb: v.as_ref(),
        superstrate_noun: n.as_ref(),
        seed: r.seed,
        heads: HeadCategories {
            verb: verb_tags.iter().cloned().collect(),
            noun: noun_tags.iter().cloned().collect(),
        },
        scheme: r.scheme,
    };
    let out = permute(&spec)?;
    let p = &out.provenance;
    let header = vec![format!(
        "synth: substrate={}, rv={}, rn={}, seed={}",
        p.substrate,
        p.verb.as_deref().unwrap_or("none"),
        p.noun.as_deref().unwrap_or("none"),
        p.seed
    )];
    emit(output, &conllu::write(&out.treebank, &header))
}
