//! Tab-separated outputs. Every table starts with a header row. Reals are
//! written in Rust's shortest round-trip notation, so reading a table back
//! recovers the exact values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use typoscope_core::cv::CvReport;
use typoscope_core::eval::EvalReport;
use typoscope_core::typology::{DirectionalityVector, RelationStat};

use crate::error::{Error, Result};

pub const DIRECTIONALITY_HEADER: &str = "relation\tp_right\trel_freq\tcount";

fn num(x: f64) -> String {
    format!("{x:?}")
}

/// One row per relation, sorted by relation name.
pub fn write_directionality(dv: &DirectionalityVector) -> String {
    let mut out = String::from(DIRECTIONALITY_HEADER);
    out.push('\n');
    for (r, st) in &dv.entries {
        let _ = writeln!(out, "{r}\t{}\t{}\t{}", num(st.p_right), num(st.rel_freq), st.count);
    }
    out
}

pub fn read_directionality(text: &str, source_name: &str, language_id: &str) -> Result<DirectionalityVector> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == DIRECTIONALITY_HEADER => {}
        _ => {
            return Err(Error::parse(source_name, Some(1), format!("expected header {DIRECTIONALITY_HEADER:?}")));
        }
    }
    let mut entries = BTreeMap::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::parse(source_name, Some(i + 1), m.to_string());
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        let p_right: f64 = cols[1].parse().map_err(|_| bad("invalid p_right"))?;
        let rel_freq: f64 = cols[2].parse().map_err(|_| bad("invalid rel_freq"))?;
        let count: u64 = cols[3].parse().map_err(|_| bad("invalid count"))?;
        if !(0.0..=1.0).contains(&p_right) || !(0.0..=1.0).contains(&rel_freq) {
            return Err(bad("probabilities must lie in [0, 1]"));
        }
        if entries.insert(cols[0].to_string(), RelationStat { p_right, rel_freq, count }).is_some() {
            return Err(bad("duplicate relation"));
        }
    }
    if entries.is_empty() {
        return Err(Error::parse(source_name, None, "no relations"));
    }
    Ok(DirectionalityVector { language_id: language_id.to_string(), entries })
}

pub fn write_features(names: &[String], values: &[f64]) -> String {
    let mut out = String::from("feature\tvalue\n");
    for (n, v) in names.iter().zip(values) {
        let _ = writeln!(out, "{n}\t{}", num(*v));
    }
    out
}

pub fn write_summary(reports: &[EvalReport]) -> String {
    let mut out = String::from("language\teps\taggregate_loss\tbinary_accuracy\tbinary_evaluated\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.language_id,
            num(r.eps),
            num(r.aggregate_loss),
            num(r.binary.accuracy),
            r.binary.evaluated
        );
    }
    out
}

/// Per-relation breakdown, most frequent relation first.
pub fn write_per_relation(report: &EvalReport) -> String {
    let mut rows: Vec<_> = report.per_relation.iter().collect();
    rows.sort_by(|a, b| b.1.rel_freq.total_cmp(&a.1.rel_freq).then_with(|| a.0.cmp(b.0)));
    let mut out = String::from("language\trelation\trel_freq\tgold\tpredicted\tcontribution\n");
    for (r, l) in rows {
        let _ = writeln!(
            out,
            "{}\t{r}\t{}\t{}\t{}\t{}",
            report.language_id,
            num(l.rel_freq),
            num(l.gold),
            num(l.predicted),
            num(l.contribution)
        );
    }
    out
}

/// Gold against predicted directionality, one row per (language, relation).
pub fn write_scatter(reports: &[EvalReport]) -> String {
    let mut out = String::from("language\trelation\tgold\tpredicted\tweight\n");
    for r in reports {
        for row in &r.scatter_rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                row.language,
                row.relation,
                num(row.gold),
                num(row.predicted),
                num(row.weight)
            );
        }
    }
    out
}

/// Held-out loss per grid point, fold and language.
pub fn write_cv_rows(report: &CvReport) -> String {
    let mut out = String::from("point\tfold\tlanguage\tloss\n");
    for row in &report.rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", report.points[row.point], row.fold, row.language, num(row.loss));
    }
    out
}
