use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TextError;
use crate::matrix::CsrMatrix;

/// Count-filtered term list. Terms are sorted lexicographically, which fixes
/// the column order independently of document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    terms: Vec<String>,
    term_index: HashMap<String, usize>,
    total_counts: Vec<u64>,
    min_count: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    min_count: u64,
    terms: Vec<String>,
    total_counts: Vec<u64>,
}

impl From<VocabularyFile> for Vocabulary {
    fn from(f: VocabularyFile) -> Self {
        let term_index = f.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { terms: f.terms, term_index, total_counts: f.total_counts, min_count: f.min_count }
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile { min_count: v.min_count, terms: v.terms, total_counts: v.total_counts }
    }
}

impl Vocabulary {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }

    pub fn total_count(&self, term: &str) -> Option<u64> {
        self.index_of(term).map(|i| self.total_counts[i])
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }
}

/// Keep the terms whose total occurrence count over `docs` is at least `min_count`.
pub fn fit_vocabulary<D: AsRef<[String]>>(docs: &[D], min_count: u64) -> Result<Vocabulary, TextError> {
    if min_count == 0 {
        return Err(TextError::InvalidMinCount);
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in docs {
        for t in doc.as_ref() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let (terms, total_counts): (Vec<String>, Vec<u64>) = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, c)| (t.to_string(), c))
        .unzip();
    if terms.is_empty() {
        return Err(TextError::EmptyVocabulary { min_count, n_docs: docs.len() });
    }
    let term_index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary { terms, term_index, total_counts, min_count })
}

/// Weighting switches. Defaults: smoothed idf, L2 row normalization.
///
/// Term frequency is the raw within-document count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfidfOptions {
    /// `ln((1 + N) / (1 + df)) + 1` when set, else `ln(N / df) + 1`.
    pub smooth_idf: bool,
    pub l2_normalize: bool,
}

impl Default for TfidfOptions {
    fn default() -> Self {
        TfidfOptions { smooth_idf: true, l2_normalize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: Vocabulary,
    pub idf: Vec<f64>,
    pub n_docs_fit: usize,
    pub options: TfidfOptions,
}

/// Document frequencies over `docs` and the resulting idf weights.
pub fn fit_tfidf<D: AsRef<[String]>>(docs: &[D], vocab: Vocabulary, options: TfidfOptions) -> TfidfModel {
    let mut df = vec![0u64; vocab.len()];
    let mut seen = vec![usize::MAX; vocab.len()];
    for (d, doc) in docs.iter().enumerate() {
        for t in doc.as_ref() {
            if let Some(j) = vocab.index_of(t) {
                if seen[j] != d {
                    seen[j] = d;
                    df[j] += 1;
                }
            }
        }
    }
    let n = docs.len() as f64;
    let idf = df
        .iter()
        .map(|&df| {
            let df = df as f64;
            if options.smooth_idf {
                ((1.0 + n) / (1.0 + df)).ln() + 1.0
            } else {
                (n.max(1.0) / df.max(1.0)).ln() + 1.0
            }
        })
        .collect();
    TfidfModel { vocabulary: vocab, idf, n_docs_fit: docs.len(), options }
}

impl TfidfModel {
    /// Weight one document: `count * idf`, then scale to unit L2 norm.
    /// Out-of-vocabulary tokens are ignored.
    pub fn weigh(&self, doc: &[String]) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for t in doc {
            if let Some(j) = self.vocabulary.index_of(t) {
                *counts.entry(j).or_default() += 1;
            }
        }
        let mut row: Vec<(usize, f64)> = counts.into_iter().map(|(j, c)| (j, c as f64 * self.idf[j])).collect();
        if self.options.l2_normalize {
            let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|(_, w)| *w /= norm);
            }
        }
        row
    }

    pub fn transform<D: AsRef<[String]> + Sync>(
        &self,
        row_ids: Vec<String>,
        docs: &[D],
    ) -> Result<DocTermMatrix, TextError> {
        if row_ids.len() != docs.len() {
            return Err(TextError::RowCountMismatch(row_ids.len(), docs.len()));
        }
        let rows: Vec<Vec<(usize, f64)>> = docs.par_iter().map(|d| self.weigh(d.as_ref())).collect();
        Ok(DocTermMatrix {
            row_ids,
            columns: self.vocabulary.terms().to_vec(),
            matrix: CsrMatrix::from_rows(self.vocabulary.len(), rows),
        })
    }
}

/// Per-patient TF-IDF rows over a fitted vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    pub row_ids: Vec<String>,
    pub columns: Vec<String>,
    pub matrix: CsrMatrix,
}

impl DocTermMatrix {
    /// A matrix with the given rows and no columns.
    pub fn empty(row_ids: Vec<String>) -> Self {
        let n = row_ids.len();
        DocTermMatrix { row_ids, columns: Vec::new(), matrix: CsrMatrix::zeros(n, 0) }
    }
}
