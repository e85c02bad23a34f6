//! CoNLL-U reading and writing.
//!
//! Only the columns the toolkit uses survive a round trip: ID, FORM, UPOS,
//! HEAD and DEPREL. Multiword token ranges (`1-2`) and empty nodes (`1.1`)
//! are skipped on input. The `# sent_id` comment is kept; other comments are
//! dropped.

use std::fmt::Write as _;
use std::path::Path;

use typoscope_core::corpus::{PosTag, Sentence, Token, Treebank};

use crate::error::{read_to_string, write_string, Error, Result};

/// Parses CoNLL-U text. `source_name` appears in error messages.
pub fn parse(text: &str, source_name: &str, language_id: &str) -> Result<Treebank> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sent_id = None;
    let mut start = 0;
    let mut finish = |tokens: &mut Vec<Token>, sent_id: &mut Option<String>, start: usize| -> Result<()> {
        if tokens.is_empty() {
            *sent_id = None;
            return Ok(());
        }
        let s = Sentence::new(std::mem::take(tokens), sent_id.take())
            .map_err(|e| Error::parse(source_name, Some(start), e.to_string()))?;
        sentences.push(s);
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut tokens, &mut sent_id, start)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if tokens.is_empty() {
                if let Some(v) = comment.trim().strip_prefix("sent_id") {
                    let v = v.trim_start().strip_prefix('=').unwrap_or(v).trim();
                    sent_id = Some(v.to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                source_name,
                Some(line_no),
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let bad = |what: &str, v: &str| Error::parse(source_name, Some(line_no), format!("invalid {what} {v:?}"));
        let index: usize = cols[0].parse().map_err(|_| bad("ID", cols[0]))?;
        let head: usize = cols[6].parse().map_err(|_| bad("HEAD", cols[6]))?;
        let tag = PosTag::new(cols[3]).map_err(|_| bad("UPOS", cols[3]))?;
        if cols[3] == "_" {
            return Err(bad("UPOS", cols[3]));
        }
        if cols[7].is_empty() || cols[7] == "_" {
            return Err(bad("DEPREL", cols[7]));
        }
        if tokens.is_empty() {
            start = line_no;
        }
        tokens.push(Token {
            index,
            form: cols[1].to_string(),
            tag,
            head,
            deprel: cols[7].to_string(),
        });
    }
    finish(&mut tokens, &mut sent_id, start)?;
    Treebank::new(language_id, sentences).map_err(|e| Error::parse(source_name, None, e.to_string()))
}

/// Language id for a treebank file: its file name without extension.
pub fn language_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unnamed".into())
}

pub fn read(path: &Path) -> Result<Treebank> {
    read_with_id(path, &language_id_of(path))
}

pub fn read_with_id(path: &Path, language_id: &str) -> Result<Treebank> {
    parse(&read_to_string(path)?, &path.display().to_string(), language_id)
}

/// Serializes `tb`. Each line of `header` is written as a comment before the
/// first sentence.
pub fn write(tb: &Treebank, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    for s in tb.sentences() {
        if let Some(id) = s.sent_id() {
            let _ = writeln!(out, "# sent_id = {id}");
        }
        for t in s.tokens() {
            let form = if t.form.is_empty() { "_" } else { t.form.as_str() };
            let _ = writeln!(out, "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_", t.index, form, t.tag, t.head, t.deprel);
        }
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, tb: &Treebank, header: &[String]) -> Result<()> {
    write_string(path, &write(tb, header))
}

/// The `# synth: …` provenance comment, if the text has one.
pub fn synth_provenance(text: &str) -> Option<&str> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# synth:").map(str::trim))
}
