//! Named feature sets assembled into row-aligned matrices.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embed::{embed_pairs, embed_texts, EmbedError, EmbeddingProvider};
use crate::lexfeat::{fuzzy_ratios, handcrafted_features, FuzzyRatios, Handcrafted, LexError};
use crate::vecsim::{vecsim_features, VecSimError, VecSimFeatures};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("pair {id}: {source}")]
    Lexical { id: String, source: LexError },
    #[error("pair {id}: {source}")]
    Similarity { id: String, source: VecSimError },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("unknown feature set {0:?} (expected handcrafted, fuzzy, vecsim or all)")]
    UnknownSet(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Handcrafted,
    Fuzzy,
    VecSim,
    /// Handcrafted, fuzzy and vector-similarity columns in that order.
    All,
}

impl FeatureSet {
    pub fn columns(self) -> Vec<&'static str> {
        match self {
            FeatureSet::Handcrafted => Handcrafted::COLUMNS.to_vec(),
            FeatureSet::Fuzzy => FuzzyRatios::COLUMNS.to_vec(),
            FeatureSet::VecSim => VecSimFeatures::<f64>::COLUMNS.to_vec(),
            FeatureSet::All => [
                FeatureSet::Handcrafted.columns(),
                FeatureSet::Fuzzy.columns(),
                FeatureSet::VecSim.columns(),
            ]
            .concat(),
        }
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, FeatureSet::VecSim | FeatureSet::All)
    }
}

impl FromStr for FeatureSet {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "handcrafted" => Ok(FeatureSet::Handcrafted),
            "fuzzy" => Ok(FeatureSet::Fuzzy),
            "vecsim" => Ok(FeatureSet::VecSim),
            "all" => Ok(FeatureSet::All),
            _ => Err(FeatureError::UnknownSet(s.to_string())),
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Handcrafted => "handcrafted",
            FeatureSet::Fuzzy => "fuzzy",
            FeatureSet::VecSim => "vecsim",
            FeatureSet::All => "all",
        })
    }
}

/// One row per pair, columns named.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with an `id` column followed by the feature columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compute `set` for every pair. Vector-similarity columns embed the
/// reference and student answers separately with `provider`.
pub fn featurize(
    corpus: &Corpus,
    set: FeatureSet,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<FeatureMatrix, FeatureError> {
    let pairs = corpus.pairs();
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); pairs.len()];
    if matches!(set, FeatureSet::Handcrafted | FeatureSet::All) {
        for (row, p) in rows.iter_mut().zip(pairs) {
            let h =
                handcrafted_features(&p.reference_answer, &p.student_answer).map_err(|source| {
                    FeatureError::Lexical {
                        id: p.id.clone(),
                        source,
                    }
                })?;
            row.extend(h.to_vec());
        }
    }
    if matches!(set, FeatureSet::Fuzzy | FeatureSet::All) {
        for (row, p) in rows.iter_mut().zip(pairs) {
            row.extend(fuzzy_ratios(&p.reference_answer, &p.student_answer).to_vec());
        }
    }
    if set.needs_embeddings() {
        let provider = provider
            .ok_or_else(|| EmbedError::Spec("vecsim features need an embedding provider".into()))?;
        let refs: Vec<&str> = pairs.iter().map(|p| p.reference_answer.as_str()).collect();
        let stus: Vec<&str> = pairs.iter().map(|p| p.student_answer.as_str()).collect();
        let rv = embed_texts(provider, &refs)?;
        let sv = embed_texts(provider, &stus)?;
        for (((row, p), r), s) in rows.iter_mut().zip(pairs).zip(&rv).zip(&sv) {
            let f = vecsim_features(r, s).map_err(|source| FeatureError::Similarity {
                id: p.id.clone(),
                source,
            })?;
            row.extend(f.to_vec());
        }
    }
    Ok(FeatureMatrix {
        columns: set.columns().into_iter().map(String::from).collect(),
        ids: pairs.iter().map(|p| p.id.clone()).collect(),
        rows,
    })
}

/// Joint (reference, student) vectors, one per pair.
pub fn pair_embeddings(
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<Vec<f64>>, FeatureError> {
    let pairs: Vec<(&str, &str)> = corpus
        .pairs()
        .iter()
        .map(|p| (p.reference_answer.as_str(), p.student_answer.as_str()))
        .collect();
    Ok(embed_pairs(provider, &pairs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnswerPair, CorpusSource};
    use crate::embed::HashProvider;

    fn corpus() -> Corpus {
        Corpus::new(
            vec![
                AnswerPair::new("a", "q1", "the cat sat", "the cat ran").with_score(1.0),
                AnswerPair::new("b", "q1", "the cat sat", "dogs bark loudly").with_score(0.0),
            ],
            2.0,
            CorpusSource::UserCsv,
        )
        .unwrap()
    }

    #[test]
    fn column_counts() {
        assert_eq!(FeatureSet::Handcrafted.columns().len(), 10);
        assert_eq!(FeatureSet::Fuzzy.columns().len(), 4);
        assert_eq!(FeatureSet::VecSim.columns().len(), 12);
        assert_eq!(FeatureSet::All.columns().len(), 26);
        assert_eq!("all".parse::<FeatureSet>().unwrap(), FeatureSet::All);
        assert!("bogus".parse::<FeatureSet>().is_err());
    }

    #[test]
    fn all_features_row_width() {
        let p = HashProvider::new(16);
        let m = featurize(&corpus(), FeatureSet::All, Some(&p)).unwrap();
        assert_eq!(m.ids, ["a", "b"]);
        assert!(m
            .rows
            .iter()
            .all(|r| r.len() == 26 && r.iter().all(|v| v.is_finite())));
        let h = featurize(&corpus(), FeatureSet::Handcrafted, None).unwrap();
        assert_eq!(&m.rows[0][..10], &h.rows[0][..]);
    }

    #[test]
    fn vecsim_needs_provider() {
        assert!(featurize(&corpus(), FeatureSet::VecSim, None).is_err());
    }

    #[test]
    fn csv_header() {
        let m = featurize(&corpus(), FeatureSet::Fuzzy, None).unwrap();
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "id,fuzz_ratio,fuzz_partial_ratio,token_sort_ratio,token_set_ratio"
        );
        assert_eq!(text.lines().count(), 3);
    }
}
