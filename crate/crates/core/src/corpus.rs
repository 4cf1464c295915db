//! Labeled review corpora: loading, tokenization and train/dev/test splits.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_for;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("requested split sizes {requested} exceed corpus size {available}")]
    SplitTooLarge { requested: usize, available: usize },
    #[error("split manifest references unknown document {0:?}")]
    UnknownId(String),
    #[error("invalid split manifest: {0}")]
    Manifest(String),
}

/// Two-class sentiment label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn from_prob(prob_positive: f64) -> Label {
        if prob_positive >= 0.5 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn opposite(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "pos" | "positive" | "1" => Ok(Label::Positive),
            "neg" | "negative" | "0" => Ok(Label::Negative),
            other => Err(format!("unparsable label {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Label,
}

/// One word occurrence. `span` is in characters, `bytes` in UTF-8 bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub word: String,
    pub span: (usize, usize),
    pub bytes: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenizedReview {
    pub doc: Document,
    pub tokens: Vec<Token>,
}

impl TokenizedReview {
    pub fn new(doc: Document) -> Self {
        let tokens = tokenize(&doc.text);
        TokenizedReview { doc, tokens }
    }

    pub fn id(&self) -> &str {
        &self.doc.id
    }

    /// Unique words in order of first occurrence.
    pub fn unique_words(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.tokens
            .iter()
            .filter(|t| seen.insert(t.word.as_str()))
            .map(|t| t.word.as_str())
            .collect()
    }

    /// Text with every occurrence of the dropped words removed.
    ///
    /// Only token spans are cut; punctuation and whitespace around them stay,
    /// so an empty drop set returns the original text unchanged.
    pub fn text_without<F>(&self, mut dropped: F) -> String
    where
        F: FnMut(&str) -> bool,
    {
        let text = &self.doc.text;
        let mut out = String::with_capacity(text.len());
        let mut cursor = 0;
        for tok in &self.tokens {
            if dropped(&tok.word) {
                out.push_str(&text[cursor..tok.bytes.0]);
                cursor = tok.bytes.1;
            }
        }
        out.push_str(&text[cursor..]);
        out
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_apostrophe(c)
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Split text into case-folded word occurrences.
///
/// A token is a maximal run of alphanumeric characters and apostrophes with
/// leading/trailing apostrophes trimmed, so `don't` stays whole while quoted
/// words lose their quote marks. Runs made only of apostrophes are dropped.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    // (byte_start, char_start) of the current run
    let mut run: Option<(usize, usize)> = None;
    let mut char_idx = 0;

    let mut flush = |run: (usize, usize), byte_end: usize, char_end: usize| {
        let raw = &text[run.0..byte_end];
        let lead: Vec<(usize, char)> = raw.char_indices().take_while(|&(_, c)| is_apostrophe(c)).collect();
        let lead_chars = lead.len();
        let lead_bytes = lead.last().map(|&(i, c)| i + c.len_utf8()).unwrap_or(0);
        let trimmed = &raw[lead_bytes..];
        let core = trimmed.trim_end_matches(is_apostrophe);
        if core.is_empty() {
            return;
        }
        let trail_chars = trimmed[core.len()..].chars().count();
        let b0 = run.0 + lead_bytes;
        tokens.push(Token {
            surface: core.to_string(),
            word: core.to_lowercase(),
            span: (run.1 + lead_chars, char_end - trail_chars),
            bytes: (b0, b0 + core.len()),
        });
    };

    for (byte_idx, c) in text.char_indices() {
        if is_word_char(c) {
            if run.is_none() {
                run = Some((byte_idx, char_idx));
            }
        } else if let Some(r) = run.take() {
            flush(r, byte_idx, char_idx);
        }
        char_idx += 1;
    }
    if let Some(r) = run {
        flush(r, text.len(), char_idx);
    }
    tokens
}

/// Collapse whitespace runs to single spaces and trim.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
    label: Option<serde_json::Value>,
}

fn json_scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(if *b { "1".into() } else { "0".into() }),
        _ => None,
    }
}

fn build_document(line: usize, id: Option<String>, text: Option<String>, label: Option<String>) -> Result<Document, CorpusError> {
    let missing = |field: &str| CorpusError::Record {
        line,
        message: format!("missing field {field:?}"),
    };
    let id = id.filter(|s| !s.is_empty()).ok_or_else(|| missing("id"))?;
    let text = normalize_whitespace(&text.ok_or_else(|| missing("text"))?);
    if text.is_empty() {
        return Err(CorpusError::Record {
            line,
            message: format!("document {id:?} has empty text"),
        });
    }
    let label = label
        .ok_or_else(|| missing("label"))?
        .parse::<Label>()
        .map_err(|message| CorpusError::Record { line, message })?;
    Ok(Document { id, text, label })
}

/// Load a corpus file. Records come back in file order; line numbers in
/// errors are 1-based.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut docs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut push = |line: usize, doc: Document, docs: &mut Vec<Document>| {
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId { line, id: doc.id });
        }
        docs.push(doc);
        Ok(())
    };

    match format {
        CorpusFormat::Jsonl => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line_no = i + 1;
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Record {
                    line: line_no,
                    message: e.to_string(),
                })?;
                let doc = build_document(
                    line_no,
                    raw.id.as_ref().and_then(json_scalar),
                    raw.text,
                    raw.label.as_ref().and_then(json_scalar),
                )?;
                push(line_no, doc, &mut docs)?;
            }
        }
        CorpusFormat::Csv => {
            let mut reader = csv::Reader::from_reader(file);
            let headers = reader
                .headers()
                .map_err(|e| CorpusError::Record { line: 1, message: e.to_string() })?
                .clone();
            let col = |name: &str| headers.iter().position(|h| h.trim() == name);
            let (id_col, text_col, label_col) = (col("id"), col("text"), col("label"));
            for record in reader.records() {
                let record = record.map_err(|e| CorpusError::Record {
                    line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                    message: e.to_string(),
                })?;
                let line_no = record.position().map(|p| p.line() as usize).unwrap_or(0);
                let field = |c: Option<usize>| c.and_then(|c| record.get(c)).map(str::to_string);
                let doc = build_document(line_no, field(id_col), field(text_col), field(label_col))?;
                push(line_no, doc, &mut docs)?;
            }
        }
    }
    Ok(docs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes { train: 200, dev: 500, test: 500 }
    }
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
}

/// Persisted form of [`Splits`]: the three id lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl Splits {
    pub fn manifest(&self, seed: u64) -> SplitManifest {
        let ids = |docs: &[Document]| docs.iter().map(|d| d.id.clone()).collect();
        SplitManifest {
            seed,
            train: ids(&self.train),
            dev: ids(&self.dev),
            test: ids(&self.test),
        }
    }

    pub fn from_manifest(corpus: &[Document], manifest: &SplitManifest) -> Result<Splits, CorpusError> {
        let by_id: HashMap<&str, &Document> = corpus.iter().map(|d| (d.id.as_str(), d)).collect();
        let resolve = |ids: &[String]| -> Result<Vec<Document>, CorpusError> {
            ids.iter()
                .map(|id| by_id.get(id.as_str()).map(|d| (*d).clone()).ok_or_else(|| CorpusError::UnknownId(id.clone())))
                .collect()
        };
        let splits = Splits {
            train: resolve(&manifest.train)?,
            dev: resolve(&manifest.dev)?,
            test: resolve(&manifest.test)?,
        };
        let mut seen = HashSet::new();
        for d in splits.train.iter().chain(&splits.dev).chain(&splits.test) {
            if !seen.insert(d.id.as_str()) {
                return Err(CorpusError::Manifest(format!("document {:?} appears in more than one split", d.id)));
            }
        }
        Ok(splits)
    }
}

/// Sample disjoint, class-balanced train/dev/test splits without replacement.
///
/// Each split gets `size / 2` documents of one class and the remainder of the
/// other (the odd document alternates between classes across splits). If one
/// class runs out, the other fills the gap.
pub fn make_splits(corpus: &[Document], sizes: SplitSizes, seed: u64) -> Result<Splits, CorpusError> {
    if sizes.total() > corpus.len() {
        return Err(CorpusError::SplitTooLarge {
            requested: sizes.total(),
            available: corpus.len(),
        });
    }
    let mut rng = rng_for(seed, "splits");
    let mut pos: Vec<&Document> = corpus.iter().filter(|d| d.label == Label::Positive).collect();
    let mut neg: Vec<&Document> = corpus.iter().filter(|d| d.label == Label::Negative).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let mut take = |n: usize, extra_to_pos: bool, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Document> {
        let half = n / 2;
        let (mut want_pos, mut want_neg) = if extra_to_pos { (n - half, half) } else { (half, n - half) };
        if want_pos > pos.len() {
            want_neg += want_pos - pos.len();
            want_pos = pos.len();
        }
        if want_neg > neg.len() {
            want_pos += want_neg - neg.len();
            want_neg = neg.len();
        }
        let mut out: Vec<Document> = pos.drain(..want_pos).chain(neg.drain(..want_neg)).cloned().collect();
        out.shuffle(rng);
        out
    };

    let train = take(sizes.train, true, &mut rng);
    let dev = take(sizes.dev, false, &mut rng);
    let test = take(sizes.test, true, &mut rng);
    Ok(Splits { train, dev, test })
}
