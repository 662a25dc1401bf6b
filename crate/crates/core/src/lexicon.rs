//! NRC-style word/emotion lexicon, tokenizer and sentiment feature extraction.
//!
//! A review is reduced to ten scores: the eight basic emotions of the NRC
//! lexicon plus the two valences. Scores are occurrence counts, optionally
//! divided by the document's token count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: expected 3 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: unknown sentiment label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: flag must be 0 or 1, found {flag:?}")]
    BadFlag { line: usize, flag: String },
    #[error("line {line}: word must be non-empty and contain no whitespace")]
    BadWord { line: usize },
    #[error("line {line}: invalid UTF-8 or read failure: {source}")]
    Io {
        line: usize,
        #[source]
        source: std::io::Error,
    },
}

/// One of the ten NRC sentiment categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Anger,
    Anticipation,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
    Trust,
    Negative,
    Positive,
}

impl SentimentLabel {
    /// All labels in feature-column order.
    pub const ALL: [SentimentLabel; 10] = [
        SentimentLabel::Anger,
        SentimentLabel::Anticipation,
        SentimentLabel::Disgust,
        SentimentLabel::Fear,
        SentimentLabel::Joy,
        SentimentLabel::Sadness,
        SentimentLabel::Surprise,
        SentimentLabel::Trust,
        SentimentLabel::Negative,
        SentimentLabel::Positive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Anger => "anger",
            SentimentLabel::Anticipation => "anticipation",
            SentimentLabel::Disgust => "disgust",
            SentimentLabel::Fear => "fear",
            SentimentLabel::Joy => "joy",
            SentimentLabel::Sadness => "sadness",
            SentimentLabel::Surprise => "surprise",
            SentimentLabel::Trust => "trust",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Positive => "positive",
        }
    }

    /// Column position of this label in extracted feature tables.
    pub fn index(self) -> usize {
        self as usize
    }

    /// `true` for the eight basic emotions, `false` for the two valences.
    pub fn is_basic_emotion(self) -> bool {
        !matches!(self, SentimentLabel::Negative | SentimentLabel::Positive)
    }

    /// Feature column names, in `ALL` order.
    pub fn column_names() -> Vec<String> {
        Self::ALL.iter().map(|l| l.as_str().to_string()).collect()
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SentimentLabel::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Word to sentiment-label associations. Only flagged (`1`) pairs are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    associations: BTreeMap<String, BTreeSet<SentimentLabel>>,
}

impl Lexicon {
    /// Parses the `word<TAB>label<TAB>flag` format. Blank lines are skipped;
    /// CRLF line endings are accepted.
    pub fn parse<R: Read>(source: R) -> Result<Self, LexiconError> {
        let mut lexicon = Lexicon::default();
        for (i, line) in BufReader::new(source).lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|source| LexiconError::Io {
                line: line_no,
                source,
            })?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(LexiconError::FieldCount {
                    line: line_no,
                    found: fields.len(),
                });
            }
            let word = fields[0].trim().to_lowercase();
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(LexiconError::BadWord { line: line_no });
            }
            let label_text = fields[1].trim();
            let label = label_text.parse::<SentimentLabel>().map_err(|label| {
                LexiconError::UnknownLabel {
                    line: line_no,
                    label,
                }
            })?;
            match fields[2].trim() {
                "1" => lexicon.insert(word, label),
                "0" => {}
                other => {
                    return Err(LexiconError::BadFlag {
                        line: line_no,
                        flag: other.to_string(),
                    })
                }
            }
        }
        Ok(lexicon)
    }

    pub fn from_tsv_str(text: &str) -> Result<Self, LexiconError> {
        Self::parse(text.as_bytes())
    }

    /// Adds one association. The word is lowercased.
    pub fn insert(&mut self, word: impl AsRef<str>, label: SentimentLabel) {
        self.associations
            .entry(word.as_ref().to_lowercase())
            .or_default()
            .insert(label);
    }

    pub fn labels(&self, word: &str) -> Option<&BTreeSet<SentimentLabel>> {
        self.associations.get(word)
    }

    pub fn word_count(&self) -> usize {
        self.associations.len()
    }

    /// Total number of word→label pairs.
    pub fn association_count(&self) -> usize {
        self.associations.values().map(BTreeSet::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<SentimentLabel>)> {
        self.associations.iter().map(|(w, s)| (w.as_str(), s))
    }

    /// Serializes flagged pairs only, one per line, sorted by word then label.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (word, labels) in &self.associations {
            for label in labels {
                out.push_str(word);
                out.push('\t');
                out.push_str(label.as_str());
                out.push_str("\t1\n");
            }
        }
        out
    }
}

impl<W: AsRef<str>> FromIterator<(W, SentimentLabel)> for Lexicon {
    fn from_iter<I: IntoIterator<Item = (W, SentimentLabel)>>(iter: I) -> Self {
        let mut lexicon = Lexicon::default();
        for (word, label) in iter {
            lexicon.insert(word, label);
        }
        lexicon
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercased runs of alphabetic characters. An apostrophe is kept only
/// between two letters; typographic apostrophes are normalized to `'`.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphabetic() {
            current.extend(c.to_lowercase());
        } else if is_apostrophe(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphabetic())
        {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    RawCount,
    #[default]
    TokenNormalized,
}

/// Per-label occurrence counts for one document.
///
/// Counts are kept as integers so the raw vector is always recoverable;
/// [`SentimentVector::score`] applies the mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentimentVector {
    counts: [u32; 10],
    token_count: usize,
    mode: ScoreMode,
}

impl SentimentVector {
    pub fn count(&self, label: SentimentLabel) -> u32 {
        self.counts[label.index()]
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn mode(&self) -> ScoreMode {
        self.mode
    }

    pub fn score(&self, label: SentimentLabel) -> f64 {
        let raw = f64::from(self.count(label));
        match self.mode {
            ScoreMode::RawCount => raw,
            ScoreMode::TokenNormalized if self.token_count == 0 => 0.0,
            ScoreMode::TokenNormalized => raw / self.token_count as f64,
        }
    }

    /// Scores in `SentimentLabel::ALL` order.
    pub fn scores(&self) -> [f64; 10] {
        SentimentLabel::ALL.map(|l| self.score(l))
    }

    pub fn with_mode(&self, mode: ScoreMode) -> Self {
        SentimentVector {
            mode,
            ..self.clone()
        }
    }
}

/// Bag-of-words sentiment counting. Every occurrence of a lexicon word adds
/// one to each of its labels; unknown words only add to the token count.
pub fn extract_sentiments<S: AsRef<str>>(
    tokens: &[S],
    lexicon: &Lexicon,
    mode: ScoreMode,
) -> SentimentVector {
    let mut counts = [0u32; 10];
    for token in tokens {
        if let Some(labels) = lexicon.labels(token.as_ref()) {
            for label in labels {
                counts[label.index()] += 1;
            }
        }
    }
    SentimentVector {
        counts,
        token_count: tokens.len(),
        mode,
    }
}

/// Extracted sentiment rows for a corpus, in document order.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentTable {
    pub rows: Vec<SentimentVector>,
}

impl SentimentTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Indices of documents without any token.
    pub fn empty_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.token_count == 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Column-major scores: one vector per label, in `SentimentLabel::ALL` order.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        SentimentLabel::ALL
            .iter()
            .map(|&l| self.rows.iter().map(|r| r.score(l)).collect())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = SentimentLabel::column_names().join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.scores().iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Tokenizes and scores every document. Runs in parallel; output order
/// matches input order.
pub fn extract_corpus<S: AsRef<str> + Sync>(
    documents: &[S],
    lexicon: &Lexicon,
    mode: ScoreMode,
) -> SentimentTable {
    let rows = documents
        .par_iter()
        .map(|doc| extract_sentiments(&tokenize(doc.as_ref()), lexicon, mode))
        .collect();
    SentimentTable { rows }
}
