//! Answer-pair corpora: the data model plus the Mohler and SciEntsBank
//! parsers and the CSV interchange used by the CLI and the service.

mod csv_io;
mod mohler;
mod seb;

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize;

pub use csv_io::{
    read_pairs_csv, read_pairs_from, write_pairs_csv, write_pairs_to, write_scored_csv,
    write_scored_to, SCORED_HEADER, TEST_HEADER, TRAIN_HEADER,
};
pub use mohler::parse_mohler;
pub use seb::{parse_seb, SebSplit};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("question {question_id}: {answers} student answers but {scores} score lines")]
    Alignment {
        question_id: String,
        answers: usize,
        scores: usize,
    },
    #[error("{path}: unknown accuracy label {label:?}")]
    Label { path: PathBuf, label: String },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: score {score} outside [0, {score_max}]")]
    ScoreRange {
        row: usize,
        score: f64,
        score_max: f64,
    },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("duplicate pair id `{0}`")]
    DuplicateId(String),
    #[error("pair `{id}`: {message}")]
    InvalidPair { id: String, message: String },
    #[error("invalid score_max {0}")]
    ScoreMax(f64),
    #[error("value {value} outside [0, {max}]")]
    OutOfRange { value: f64, max: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The five SciEntsBank accuracy labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SebLabel {
    Correct,
    PartiallyCorrectIncomplete,
    Contradictory,
    Irrelevant,
    NonDomain,
}

impl SebLabel {
    pub const ALL: [SebLabel; 5] = [
        SebLabel::Correct,
        SebLabel::PartiallyCorrectIncomplete,
        SebLabel::Contradictory,
        SebLabel::Irrelevant,
        SebLabel::NonDomain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SebLabel::Correct => "correct",
            SebLabel::PartiallyCorrectIncomplete => "partially_correct_incomplete",
            SebLabel::Contradictory => "contradictory",
            SebLabel::Irrelevant => "irrelevant",
            SebLabel::NonDomain => "non_domain",
        }
    }
}

impl fmt::Display for SebLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SebLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SebLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Three-level ordinal score for a five-way label.
pub fn map_seb_label(label: SebLabel) -> f64 {
    match label {
        SebLabel::Correct => 2.0,
        SebLabel::PartiallyCorrectIncomplete => 1.0,
        SebLabel::Contradictory | SebLabel::Irrelevant | SebLabel::NonDomain => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Mohler,
    SebTrain,
    SebUa,
    SebUq,
    SebUd,
    UserCsv,
}

/// One graded (or to-be-graded) student answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerPair {
    pub id: String,
    pub question_id: String,
    pub question_text: String,
    pub reference_answer: String,
    pub student_answer: String,
    pub gold_score: Option<f64>,
    pub raw_label: Option<SebLabel>,
}

impl AnswerPair {
    pub fn new(
        id: impl Into<String>,
        question_id: impl Into<String>,
        reference_answer: impl Into<String>,
        student_answer: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            question_id: question_id.into(),
            question_text: String::new(),
            reference_answer: reference_answer.into(),
            student_answer: student_answer.into(),
            gold_score: None,
            raw_label: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.gold_score = Some(score);
        self
    }

    pub fn with_question_text(mut self, text: impl Into<String>) -> Self {
        self.question_text = text.into();
        self
    }
}

/// An ordered, validated collection of answer pairs on one score scale.
///
/// Text fields are normalised on construction (NFC, trimmed, internal
/// whitespace collapsed), so a corpus always round-trips through CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pairs: Vec<AnswerPair>,
    score_max: f64,
    source: CorpusSource,
}

impl Corpus {
    pub fn new(
        pairs: Vec<AnswerPair>,
        score_max: f64,
        source: CorpusSource,
    ) -> Result<Self, CorpusError> {
        if !(score_max.is_finite() && score_max > 0.0) {
            return Err(CorpusError::ScoreMax(score_max));
        }
        let mut seen = HashSet::with_capacity(pairs.len());
        let mut out = Vec::with_capacity(pairs.len());
        for mut p in pairs {
            if !seen.insert(p.id.clone()) {
                return Err(CorpusError::DuplicateId(p.id));
            }
            p.question_text = normalize(&p.question_text);
            p.reference_answer = normalize(&p.reference_answer);
            p.student_answer = normalize(&p.student_answer);
            if p.reference_answer.is_empty() {
                return Err(invalid(&p.id, "empty reference answer"));
            }
            if p.student_answer.is_empty() {
                return Err(invalid(&p.id, "empty student answer"));
            }
            if let Some(s) = p.gold_score {
                if !(s.is_finite() && (0.0..=score_max).contains(&s)) {
                    return Err(invalid(
                        &p.id,
                        &format!("gold score {s} outside [0, {score_max}]"),
                    ));
                }
            }
            out.push(p);
        }
        Ok(Self {
            pairs: out,
            score_max,
            source,
        })
    }

    pub fn pairs(&self) -> &[AnswerPair] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<AnswerPair> {
        self.pairs
    }

    pub fn score_max(&self) -> f64 {
        self.score_max
    }

    pub fn source(&self) -> CorpusSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Question ids in order of first appearance.
    pub fn question_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.pairs
            .iter()
            .map(|p| p.question_id.as_str())
            .filter(|q| seen.insert(*q))
            .collect()
    }

    /// Gold scores, or an error naming the first pair without one.
    pub fn gold_scores(&self) -> Result<Vec<f64>, CorpusError> {
        self.pairs
            .iter()
            .map(|p| {
                p.gold_score
                    .ok_or_else(|| invalid(&p.id, "missing gold score"))
            })
            .collect()
    }

    /// Sub-corpus made of the given indices, in the order given.
    pub fn select(&self, indices: &[usize]) -> Corpus {
        Corpus {
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
            score_max: self.score_max,
            source: self.source,
        }
    }
}

fn invalid(id: &str, message: &str) -> CorpusError {
    CorpusError::InvalidPair {
        id: id.to_string(),
        message: message.to_string(),
    }
}

/// Map a score onto `[0, 1]`.
pub fn scale_score(score: f64, score_max: f64) -> Result<f64, CorpusError> {
    if !(score_max.is_finite() && score_max > 0.0) {
        return Err(CorpusError::ScoreMax(score_max));
    }
    if !(0.0..=score_max).contains(&score) {
        return Err(CorpusError::OutOfRange {
            value: score,
            max: score_max,
        });
    }
    Ok(score / score_max)
}

/// Inverse of [`scale_score`].
pub fn descale_score(unit: f64, score_max: f64) -> Result<f64, CorpusError> {
    if !(score_max.is_finite() && score_max > 0.0) {
        return Err(CorpusError::ScoreMax(score_max));
    }
    if !(0.0..=1.0).contains(&unit) {
        return Err(CorpusError::OutOfRange {
            value: unit,
            max: 1.0,
        });
    }
    Ok(unit * score_max)
}

fn dedupe_key(p: &AnswerPair) -> (String, String, String) {
    let fold = |s: &str| normalize(&s.to_lowercase());
    (
        p.question_id.clone(),
        fold(&p.reference_answer),
        fold(&p.student_answer),
    )
}

/// Drop repeated (question, reference, student) triples, keeping the first.
/// Answer texts are compared case-insensitively with whitespace collapsed.
pub fn dedupe(corpus: &Corpus) -> Corpus {
    let mut seen = HashSet::new();
    let pairs = corpus
        .pairs
        .iter()
        .filter(|p| seen.insert(dedupe_key(p)))
        .cloned()
        .collect();
    Corpus {
        pairs,
        score_max: corpus.score_max,
        source: corpus.source,
    }
}
