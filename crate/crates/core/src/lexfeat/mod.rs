//! Handcrafted lexical overlap features and fuzzy string ratios between a
//! reference answer and a student answer.

mod fuzzy;
mod porter;

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::nfc;

pub use fuzzy::{
    base_ratio, fuzzy_ratios, lcs_len, partial_ratio, token_set_ratio, token_sort_ratio,
    FuzzyRatios,
};
pub use porter::porter_stem;

#[derive(Debug, Error, PartialEq)]
pub enum LexError {
    #[error("{0} answer has no tokens")]
    Degenerate(&'static str),
}

const STOP_WORDS_EN: &str = include_str!("../../data/stopwords_en.txt");

/// The bundled 179-word English stop list.
pub fn stop_words() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOP_WORDS_EN
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .collect()
    })
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_ascii() && !c.is_alphanumeric() && !c.is_whitespace())
}

/// Lowercase, NFC, whitespace split, punctuation stripped from token edges.
pub fn tokenize(text: &str) -> Vec<String> {
    nfc(text)
        .to_lowercase()
        .split_whitespace()
        .map(|t| t.trim_matches(is_punct))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Handcrafted {
    pub cwc_min: f64,
    pub cwc_max: f64,
    pub csc_min: f64,
    pub csc_max: f64,
    pub ctc_min: f64,
    pub ctc_max: f64,
    pub last_word_eq: u8,
    pub first_word_eq: u8,
    pub abs_len_diff: usize,
    pub mean_len: f64,
}

impl Handcrafted {
    pub const COLUMNS: [&'static str; 10] = [
        "cwc_min",
        "cwc_max",
        "csc_min",
        "csc_max",
        "ctc_min",
        "ctc_max",
        "last_word_eq",
        "first_word_eq",
        "abs_len_diff",
        "mean_len",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.cwc_min,
            self.cwc_max,
            self.csc_min,
            self.csc_max,
            self.ctc_min,
            self.ctc_max,
            f64::from(self.last_word_eq),
            f64::from(self.first_word_eq),
            self.abs_len_diff as f64,
            self.mean_len,
        ]
    }
}

impl FuzzyRatios {
    pub const COLUMNS: [&'static str; 4] = [
        "fuzz_ratio",
        "fuzz_partial_ratio",
        "token_sort_ratio",
        "token_set_ratio",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        [
            self.fuzz_ratio,
            self.fuzz_partial_ratio,
            self.token_sort_ratio,
            self.token_set_ratio,
        ]
        .map(f64::from)
        .to_vec()
    }
}

/// All fourteen lexical components, handcrafted first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexFeatures {
    pub handcrafted: Handcrafted,
    pub fuzzy: FuzzyRatios,
}

impl LexFeatures {
    pub fn columns() -> Vec<&'static str> {
        Handcrafted::COLUMNS
            .iter()
            .chain(FuzzyRatios::COLUMNS.iter())
            .copied()
            .collect()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.handcrafted.to_vec();
        v.extend(self.fuzzy.to_vec());
        v
    }
}

pub fn lex_features(reference: &str, student: &str) -> Result<LexFeatures, LexError> {
    Ok(LexFeatures {
        handcrafted: handcrafted_features(reference, student)?,
        fuzzy: fuzzy_ratios(reference, student),
    })
}

fn overlap_ratios(a: &HashSet<String>, b: &HashSet<String>) -> (f64, f64) {
    let common = a.intersection(b).count() as f64;
    let ratio = |d: usize| if d == 0 { 0.0 } else { common / d as f64 };
    (ratio(a.len().min(b.len())), ratio(a.len().max(b.len())))
}

struct Split {
    words: HashSet<String>,
    stops: HashSet<String>,
    tokens: HashSet<String>,
}

/// Stop-word membership is decided on the surface token; overlap is then
/// counted on stems.
fn split(tokens: &[String]) -> Split {
    let stops_list = stop_words();
    let mut s = Split {
        words: HashSet::new(),
        stops: HashSet::new(),
        tokens: HashSet::new(),
    };
    for t in tokens {
        let stem = porter_stem(t);
        if stops_list.contains(t.as_str()) {
            s.stops.insert(stem.clone());
        } else {
            s.words.insert(stem.clone());
        }
        s.tokens.insert(stem);
    }
    s
}

/// Word/stop-word/token overlap ratios, boundary-word equality flags and
/// length statistics. Overlaps are over distinct stems; a ratio with a zero
/// denominator is 0.
pub fn handcrafted_features(reference: &str, student: &str) -> Result<Handcrafted, LexError> {
    let tr = tokenize(reference);
    let ts = tokenize(student);
    if tr.is_empty() {
        return Err(LexError::Degenerate("reference"));
    }
    if ts.is_empty() {
        return Err(LexError::Degenerate("student"));
    }
    let (r, s) = (split(&tr), split(&ts));
    let (cwc_min, cwc_max) = overlap_ratios(&r.words, &s.words);
    let (csc_min, csc_max) = overlap_ratios(&r.stops, &s.stops);
    let (ctc_min, ctc_max) = overlap_ratios(&r.tokens, &s.tokens);
    Ok(Handcrafted {
        cwc_min,
        cwc_max,
        csc_min,
        csc_max,
        ctc_min,
        ctc_max,
        last_word_eq: u8::from(tr.last() == ts.last()),
        first_word_eq: u8::from(tr.first() == ts.first()),
        abs_len_diff: tr.len().abs_diff(ts.len()),
        mean_len: (tr.len() + ts.len()) as f64 / 2.0,
    })
}
