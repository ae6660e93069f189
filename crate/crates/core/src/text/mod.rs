//! Provider-note text pipeline: tokenization, Porter stemming, a
//! count-filtered vocabulary and TF-IDF weighting fit on a training subset.

mod porter;
mod stopwords;
mod tfidf;

pub use porter::stem;
pub use stopwords::{is_stop_word, STOP_WORDS, STOP_WORDS_VERSION};
pub use tfidf::{fit_tfidf, fit_vocabulary, DocTermMatrix, TfidfModel, TfidfOptions, Vocabulary};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::NoteDocument;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("no term reaches min_count={min_count} in a corpus of {n_docs} documents")]
    EmptyVocabulary { min_count: u64, n_docs: usize },
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("{0} row ids for {1} documents")]
    RowCountMismatch(usize, usize),
}

/// Tokenizer settings. The defaults are the pipeline's pinned behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerOptions {
    pub min_token_len: usize,
    pub remove_stop_words: bool,
}

impl Default for TokenizerOptions {
    fn default() -> Self {
        TokenizerOptions { min_token_len: 2, remove_stop_words: true }
    }
}

/// Lowercased maximal runs of ASCII letters; everything else separates.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, TokenizerOptions::default())
}

pub fn tokenize_with(text: &str, opts: TokenizerOptions) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|t| t.len() >= opts.min_token_len)
        .map(|t| t.to_ascii_lowercase())
        .filter(|t| !(opts.remove_stop_words && is_stop_word(t)))
        .collect()
}

/// Tokenize and stem every note of one patient, concatenated in stored order.
pub fn concat_notes(notes: &[NoteDocument]) -> Vec<String> {
    concat_notes_with(notes, TokenizerOptions::default())
}

pub fn concat_notes_with(notes: &[NoteDocument], opts: TokenizerOptions) -> Vec<String> {
    notes
        .iter()
        .flat_map(|n| tokenize_with(&n.text, opts))
        .map(|t| stem(&t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::NoteType;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Pt remains hypoxic, on O2."), vec!["pt", "remains", "hypoxic"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("COVID-19 COVID"), vec!["covid", "covid"]);
    }

    #[test]
    fn non_ascii_letters_separate() {
        assert_eq!(tokenize("café au lait"), vec!["caf", "au", "lait"]);
    }

    #[test]
    fn tokenizer_options_are_honored() {
        let opts = TokenizerOptions { min_token_len: 1, remove_stop_words: false };
        assert_eq!(tokenize_with("on O2", opts), vec!["on", "o"]);
    }

    fn note(text: &str) -> NoteDocument {
        NoteDocument { patient_id: "p".into(), note_type: NoteType::Progress, text: text.into() }
    }

    #[test]
    fn concat_notes_examples() {
        assert_eq!(
            concat_notes(&[note("pt hypoxic"), note("surgical dressing")]),
            vec!["pt", "hypox", "surgic", "dress"]
        );
        assert!(concat_notes(&[]).is_empty());
        assert!(concat_notes(&[note("")]).is_empty());
    }
}
