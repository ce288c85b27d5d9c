//! Review text to binary document-term matrix: lowercase, strip digits and
//! punctuation, drop stop words, Porter-stem, then keep terms present in at
//! least a given fraction of documents.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::BinaryMatrix;
use crate::porter;

/// English stop words (the Snowball list without its contracted forms,
/// which cannot survive punctuation stripping).
pub const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as",
    "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by",
    "cannot", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from",
    "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "me", "more",
    "most", "my", "myself", "no", "nor", "not", "of", "off", "on", "once", "only", "or", "other",
    "ought", "our", "ours", "ourselves", "out", "over", "own", "same", "she", "should", "so",
    "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then",
    "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
    "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why",
    "with", "would", "you", "your", "yours", "yourself", "yourselves",
];

pub const DEFAULT_SPARSITY_THRESHOLD: f64 = 0.02;

fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.binary_search(&token).is_ok()
}

/// Hex SHA-256 of the stop-word list, one word per line.
pub fn stop_word_hash() -> String {
    let mut h = Sha256::new();
    for w in STOP_WORDS {
        h.update(w.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Lowercases and deletes digits and every character that is neither
/// alphanumeric nor whitespace. Deleting (rather than spacing) punctuation
/// joins hyphenated words: "check-in" becomes "checkin".
pub fn normalize(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .filter(|c| c.is_whitespace() || (c.is_alphanumeric() && !c.is_numeric()))
        .collect()
}

/// Normalizes, splits on whitespace, drops stop words and stems.
pub fn preprocess(text: &str) -> Vec<String> {
    normalize(text)
        .split_whitespace()
        .filter(|t| !is_stop_word(t))
        .map(porter::stem)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Documents with identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub ids: Vec<String>,
    pub texts: Vec<String>,
}

impl Corpus {
    /// Identifiers are 1-based positions.
    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        let texts: Vec<String> = texts.into_iter().map(Into::into).collect();
        let ids = (1..=texts.len()).map(|i| i.to_string()).collect();
        Corpus { ids, texts }
    }

    /// One document per line; blank lines are skipped and each document's
    /// identifier is its 1-based line number.
    pub fn from_lines<R: BufRead>(reader: R) -> Result<Self> {
        let mut c = Corpus::default();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            c.ids.push((k + 1).to_string());
            c.texts.push(line);
        }
        Ok(c)
    }

    /// Two-column CSV of `(id, text)`.
    pub fn from_csv<R: Read>(reader: R, has_header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(has_header).from_reader(reader);
        let mut c = Corpus::default();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::IngestFailure(format!(
                    "expected 2 columns (id, text), found {} on record {}",
                    rec.len(),
                    c.ids.len() + 1
                )));
            }
            c.ids.push(rec[0].to_string());
            c.texts.push(rec[1].to_string());
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermMatrixArtifact {
    pub vocabulary: Vec<String>,
    pub matrix: BinaryMatrix,
    pub doc_ids: Vec<String>,
    pub sparsity_threshold: f64,
    pub min_document_frequency: usize,
    pub stop_word_sha256: String,
}

/// Smallest document count satisfying `count >= threshold * n`. The
/// product is nudged down by a relative 1e-12 so that values such as
/// 0.07 * 100 = 7.000000000000001 count as 7.
pub fn min_document_frequency(threshold: f64, n_docs: usize) -> usize {
    let raw = threshold * n_docs as f64;
    ((raw * (1.0 - 1e-12)).ceil() as usize).max(1)
}

/// Builds the binary document-term matrix. Columns follow the sorted
/// vocabulary; an entry is 1 when the stem occurs in the document at least
/// once.
pub fn build_term_matrix(corpus: &Corpus, threshold: f64, exec: Execution) -> Result<TermMatrixArtifact> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("sparsity threshold {threshold} not in [0, 1)")));
    }
    if corpus.ids.len() != corpus.texts.len() {
        return Err(Error::InvalidArgument("corpus ids and texts differ in length".into()));
    }
    if corpus.is_empty() {
        return Err(Error::IngestFailure("empty corpus".into()));
    }
    let n = corpus.len();
    let docs: Vec<BTreeSet<String>> = exec.map(n, |i| preprocess(&corpus.texts[i]).into_iter().collect());
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &docs {
        for t in d {
            *df.entry(t.as_str()).or_default() += 1;
        }
    }
    let min_df = min_document_frequency(threshold, n);
    let vocabulary: Vec<String> = df.iter().filter(|(_, &c)| c >= min_df).map(|(t, _)| t.to_string()).collect();
    if vocabulary.is_empty() {
        let max_df = df.values().copied().max().unwrap_or(0);
        return Err(Error::IngestFailure(format!(
            "empty vocabulary after filtering: {n} documents, {} distinct stems, largest document frequency {max_df}, required {min_df}",
            df.len()
        )));
    }
    let column: BTreeMap<&str, usize> = vocabulary.iter().enumerate().map(|(k, t)| (t.as_str(), k)).collect();
    let entries = docs
        .iter()
        .enumerate()
        .flat_map(|(i, d)| d.iter().filter_map(|t| column.get(t.as_str())).map(move |&k| (i, k)));
    let matrix = BinaryMatrix::from_entries(n, vocabulary.len(), entries)?;
    Ok(TermMatrixArtifact {
        vocabulary,
        matrix,
        doc_ids: corpus.ids.clone(),
        sparsity_threshold: threshold,
        min_document_frequency: min_df,
        stop_word_sha256: stop_word_hash(),
    })
}

/// `(term, document frequency)`, most frequent first, ties alphabetical.
pub fn term_frequency_report(artifact: &TermMatrixArtifact) -> Vec<(String, usize)> {
    let counts = artifact.matrix.column_counts();
    let mut report: Vec<(String, usize)> = artifact.vocabulary.iter().cloned().zip(counts).collect();
    report.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    report
}

impl TermMatrixArtifact {
    pub fn write_vocabulary<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.vocabulary {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn write_frequency_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["term", "document_frequency"])?;
        for (t, c) in term_frequency_report(self) {
            out.write_record([t, c.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}
