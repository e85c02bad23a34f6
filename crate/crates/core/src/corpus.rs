//! Treebanks (parsed view) and tagged corpora (unparsed view).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// The boundary symbol added at both ends of every tag sequence.
pub const BOUNDARY: &str = "#";

/// The seventeen UD v1.2 universal POS tags, for documentation and defaults.
/// The tagset itself is open: any non-empty, whitespace-free symbol is a tag.
pub const UD_TAGS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

/// A part-of-speech tag. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PosTag(Arc<str>);

impl PosTag {
    /// A tag for a real token. Rejects empty symbols, whitespace and the
    /// boundary symbol.
    pub fn new(symbol: &str) -> Result<Self> {
        if symbol.is_empty() || symbol.chars().any(char::is_whitespace) || symbol == BOUNDARY {
            return Err(Error::InvalidTag(symbol.to_string()));
        }
        Ok(PosTag(Arc::from(symbol)))
    }

    pub fn boundary() -> Self {
        PosTag(Arc::from(BOUNDARY))
    }

    pub fn is_boundary(&self) -> bool {
        &*self.0 == BOUNDARY
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub tag: PosTag,
    /// Position of the head, 0 for the virtual root.
    pub head: usize,
    pub deprel: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<Token>,
    sent_id: Option<String>,
}

impl Sentence {
    /// Validates that tokens are numbered 1..=n, heads are in range, there
    /// are no self-loops, exactly one token attaches to the root and the head
    /// references form a tree.
    pub fn new(tokens: Vec<Token>, sent_id: Option<String>) -> Result<Self> {
        let s = Sentence { tokens, sent_id };
        s.validate()?;
        Ok(s)
    }

    /// A sentence with no tokens. Only synthetic pipelines produce these.
    pub fn empty() -> Self {
        Sentence {
            tokens: Vec::new(),
            sent_id: None,
        }
    }

    fn structure_error(&self, message: String) -> Error {
        Error::Structure {
            sentence: self.sent_id.clone().unwrap_or_else(|| "<unnamed>".to_string()),
            message,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Ok(());
        }
        let mut roots = 0;
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(self.structure_error(format!(
                    "token {} has index {}, expected {}",
                    i + 1,
                    t.index,
                    i + 1
                )));
            }
            if t.head > n {
                return Err(self.structure_error(format!(
                    "token {} has head {} beyond sentence length {}",
                    t.index, t.head, n
                )));
            }
            if t.head == t.index {
                return Err(self.structure_error(format!("token {} is its own head", t.index)));
            }
            if t.head == 0 {
                roots += 1;
            }
        }
        if roots != 1 {
            return Err(self.structure_error(format!("{roots} tokens attach to the root")));
        }
        // Every token must reach the root within n steps.
        for t in &self.tokens {
            let mut cur = t.head;
            let mut steps = 0;
            while cur != 0 {
                steps += 1;
                if steps > n {
                    return Err(self.structure_error(format!(
                        "cyclic head references through token {}",
                        t.index
                    )));
                }
                cur = self.tokens[cur - 1].head;
            }
        }
        Ok(())
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn sent_id(&self) -> Option<&str> {
        self.sent_id.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The tag of the token at 1-based `position`.
    pub fn tag(&self, position: usize) -> &PosTag {
        &self.tokens[position - 1].tag
    }

    /// Children of each position, indexed 0 (root) ..= n, in linear order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.tokens.len() + 1];
        for t in &self.tokens {
            children[t.head].push(t.index);
        }
        children
    }

    /// True iff every subtree covers a contiguous span.
    pub fn is_projective(&self) -> bool {
        let n = self.tokens.len();
        if n == 0 {
            return true;
        }
        // Edge (h, d) is projective iff every token strictly between h and d
        // is dominated by h.
        for t in &self.tokens {
            let h = t.head;
            if h == 0 {
                continue;
            }
            let (lo, hi) = if h < t.index { (h, t.index) } else { (t.index, h) };
            for k in lo + 1..hi {
                if !self.dominates(h, k) {
                    return false;
                }
            }
        }
        true
    }

    /// Whether `ancestor` dominates `node` (reflexively).
    pub fn dominates(&self, ancestor: usize, node: usize) -> bool {
        let mut cur = node;
        loop {
            if cur == ancestor {
                return true;
            }
            if cur == 0 {
                return false;
            }
            cur = self.tokens[cur - 1].head;
        }
    }

    /// The same tree with the word order reversed.
    pub fn reversed(&self) -> Sentence {
        let n = self.tokens.len();
        let flip = |i: usize| if i == 0 { 0 } else { n + 1 - i };
        let tokens = self
            .tokens
            .iter()
            .rev()
            .map(|t| Token {
                index: flip(t.index),
                form: t.form.clone(),
                tag: t.tag.clone(),
                head: flip(t.head),
                deprel: t.deprel.clone(),
            })
            .collect();
        Sentence {
            tokens,
            sent_id: self.sent_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Treebank {
    pub language_id: String,
    sentences: Vec<Sentence>,
}

impl Treebank {
    /// Fails with [`Error::EmptyTreebank`] when `sentences` is empty.
    pub fn new(language_id: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::EmptyTreebank);
        }
        Ok(Treebank {
            language_id: language_id.into(),
            sentences,
        })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn into_sentences(self) -> Vec<Sentence> {
        self.sentences
    }

    /// Sentences with at most `max_len` tokens. May leave the treebank
    /// empty, hence the `Option`.
    pub fn length_filtered(&self, max_len: usize) -> Option<Treebank> {
        let sentences: Vec<Sentence> = self
            .sentences
            .iter()
            .filter(|s| s.len() <= max_len)
            .cloned()
            .collect();
        if sentences.is_empty() {
            None
        } else {
            Some(Treebank {
                language_id: self.language_id.clone(),
                sentences,
            })
        }
    }

    pub fn reversed(&self) -> Treebank {
        Treebank {
            language_id: self.language_id.clone(),
            sentences: self.sentences.iter().map(Sentence::reversed).collect(),
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// The unparsed view of a language: boundary-augmented tag sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedCorpus {
    pub language_id: String,
    tag_sequences: Vec<Vec<PosTag>>,
}

impl TaggedCorpus {
    /// Builds a corpus from raw (unaugmented) tag sequences. Boundary tags
    /// inside `sequences` are rejected.
    pub fn from_raw(language_id: impl Into<String>, sequences: Vec<Vec<PosTag>>) -> Result<Self> {
        let boundary = PosTag::boundary();
        let mut tag_sequences = Vec::with_capacity(sequences.len());
        for seq in sequences {
            if let Some(t) = seq.iter().find(|t| t.is_boundary()) {
                return Err(Error::InvalidTag(t.to_string()));
            }
            let mut aug = Vec::with_capacity(seq.len() + 2);
            aug.push(boundary.clone());
            aug.extend(seq);
            aug.push(boundary.clone());
            tag_sequences.push(aug);
        }
        Ok(TaggedCorpus {
            language_id: language_id.into(),
            tag_sequences,
        })
    }

    /// Augmented sequences, each `[#, t1, ..., tn, #]`.
    pub fn sequences(&self) -> &[Vec<PosTag>] {
        &self.tag_sequences
    }

    pub fn len(&self) -> usize {
        self.tag_sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tag_sequences.is_empty()
    }

    /// Keeps sequences with at most `max_len` real tokens.
    pub fn length_filter(&self, max_len: usize) -> TaggedCorpus {
        TaggedCorpus {
            language_id: self.language_id.clone(),
            tag_sequences: self
                .tag_sequences
                .iter()
                .filter(|s| s.len() - 2 <= max_len)
                .cloned()
                .collect(),
        }
    }

    /// The first `n` sequences.
    pub fn truncated(&self, n: usize) -> TaggedCorpus {
        TaggedCorpus {
            language_id: self.language_id.clone(),
            tag_sequences: self.tag_sequences.iter().take(n).cloned().collect(),
        }
    }

    /// Every sequence reversed (still boundary-augmented).
    pub fn reversed(&self) -> TaggedCorpus {
        TaggedCorpus {
            language_id: self.language_id.clone(),
            tag_sequences: self
                .tag_sequences
                .iter()
                .map(|s| s.iter().rev().cloned().collect())
                .collect(),
        }
    }
}

/// Drops the trees and augments every sentence with boundary tags.
pub fn to_tagged_corpus(tb: &Treebank) -> TaggedCorpus {
    let boundary = PosTag::boundary();
    let tag_sequences = tb
        .sentences
        .iter()
        .map(|s| {
            let mut seq = Vec::with_capacity(s.len() + 2);
            seq.push(boundary.clone());
            seq.extend(s.tokens.iter().map(|t| t.tag.clone()));
            seq.push(boundary.clone());
            seq
        })
        .collect();
    TaggedCorpus {
        language_id: tb.language_id.clone(),
        tag_sequences,
    }
}

pub fn length_filter(c: &TaggedCorpus, max_len: usize) -> TaggedCorpus {
    c.length_filter(max_len)
}
