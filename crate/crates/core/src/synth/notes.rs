use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Zipf};

use super::config::{NoteConfig, SignalTerm};
use crate::ingest::{NoteDocument, NoteType};
use crate::seed;
use crate::text::{is_stop_word, stem};

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st", "pl"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "l", "x", "m"];

const NOTE_TYPES: &[(NoteType, f64)] = &[
    (NoteType::EDAdmission, 0.2),
    (NoteType::Progress, 0.4),
    (NoteType::HistoryPhysical, 0.15),
    (NoteType::DischargeSummary, 0.15),
    (NoteType::Other, 0.1),
];

/// Background word shapes, ranked for Zipf sampling. No background word
/// stems to the same term as a signal word.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub words: Vec<String>,
}

impl Lexicon {
    pub fn new(cfg: &NoteConfig, signal: &[SignalTerm]) -> Lexicon {
        let mut rng = seed::rng(cfg.lexicon_seed);
        let mut seen_stems: HashSet<String> = signal.iter().map(|s| stem(&s.term)).collect();
        let mut words = Vec::with_capacity(cfg.background_size);
        while words.len() < cfg.background_size {
            let syllables = rng.random_range(2..=4);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
                w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
                w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
            }
            if is_stop_word(&w) || !seen_stems.insert(stem(&w)) {
                continue;
            }
            words.push(w);
        }
        Lexicon { words }
    }
}

fn note_type(rng: &mut ChaCha8Rng) -> NoteType {
    let mut u: f64 = rng.random();
    for &(t, p) in NOTE_TYPES {
        if u < p {
            return t;
        }
        u -= p;
    }
    NoteType::Other
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    }
}

/// Renders a token list as sentences of 6 to 14 words.
fn render(rng: &mut ChaCha8Rng, tokens: &[String]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < tokens.len() {
        let len = rng.random_range(6..=14).min(tokens.len() - i);
        for (k, t) in tokens[i..i + len].iter().enumerate() {
            if k == 0 {
                if !out.is_empty() {
                    out.push(' ');
                }
                let mut cs = t.chars();
                if let Some(c) = cs.next() {
                    out.push(c.to_ascii_uppercase());
                    out.push_str(cs.as_str());
                }
            } else {
                out.push(' ');
                out.push_str(t);
            }
        }
        out.push('.');
        i += len;
    }
    out
}

/// One patient's notes. Signal counts depend on the latent bit `z` only.
pub(super) fn write_notes(
    rng: &mut ChaCha8Rng,
    cfg: &NoteConfig,
    signal: &[SignalTerm],
    lexicon: &Lexicon,
    z: bool,
    patient_id: &str,
) -> Vec<NoteDocument> {
    let n_notes = 1 + poisson(rng, cfg.extra_notes_mean);
    let zipf = Zipf::new(lexicon.words.len() as f64, cfg.zipf_exponent).expect("validated lexicon");
    let mut bodies: Vec<(NoteType, Vec<String>)> = (0..n_notes)
        .map(|_| {
            let t = note_type(rng);
            let len = poisson(rng, cfg.tokens_per_note_mean).max(1);
            let words = (0..len).map(|_| lexicon.words[zipf.sample(rng) as usize - 1].clone()).collect();
            (t, words)
        })
        .collect();
    for s in signal {
        let rate = if z { s.base_rate * s.multiplier } else { s.base_rate };
        for _ in 0..poisson(rng, rate) {
            let (_, body) = &mut bodies[rng.random_range(0..n_notes)];
            let at = rng.random_range(0..=body.len());
            body.insert(at, s.term.clone());
        }
    }
    bodies
        .into_iter()
        .map(|(note_type, body)| NoteDocument { patient_id: patient_id.to_string(), note_type, text: render(rng, &body) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::GeneratorConfig;
    use crate::text::tokenize;

    #[test]
    fn lexicon_is_stable_and_disjoint_from_signal() {
        let cfg = GeneratorConfig::default();
        let a = Lexicon::new(&cfg.notes, &cfg.signal);
        let b = Lexicon::new(&cfg.notes, &cfg.signal);
        assert_eq!(a.words, b.words);
        assert_eq!(a.words.len(), 3000);
        let signal: HashSet<String> = cfg.signal.iter().map(|s| stem(&s.term)).collect();
        let stems: HashSet<String> = a.words.iter().map(|w| stem(w)).collect();
        assert_eq!(stems.len(), 3000);
        assert!(stems.is_disjoint(&signal));
    }

    #[test]
    fn rendered_text_tokenizes_back() {
        let mut rng = seed::rng(1);
        let toks: Vec<String> = ["alpha", "bravo", "kilo", "delta", "echo", "zulu", "tango", "remdesivir"]
            .iter()
            .cycle()
            .take(40)
            .map(|s| s.to_string())
            .collect();
        let text = render(&mut rng, &toks);
        assert_eq!(tokenize(&text), toks);
        assert!(text.ends_with('.'));
    }
}
