//! Question-stratified, seeded train/validation(/test) splitting.
//!
//! Within each question the pairs are shuffled by a SplitMix64 stream
//! seeded with `seed ^ fnv1a64(question_id)` and cut into parts whose sizes
//! come from largest-remainder apportionment with a floor of one pair per
//! part. Each output part keeps the input order of its pairs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::rng::{fnv1a64, SplitMix64};

/// Seed for the Mohler train/validation/test split.
pub const DEFAULT_SPLIT_SEED: u64 = 40;
/// Alternate seed kept for the second split of the same corpus.
pub const ALTERNATE_SPLIT_SEED: u64 = 43;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("fractions must be 1 to 3 positive values summing to 1, got {0:?}")]
    Fractions(Vec<f64>),
    #[error("question {question_id} has {pairs} pairs, fewer than the {parts} parts requested")]
    TooFewPairs {
        question_id: String,
        pairs: usize,
        parts: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    fractions: Vec<f64>,
    pub seed: u64,
    pub stratify_by_question: bool,
}

impl SplitSpec {
    pub fn new(fractions: Vec<f64>, seed: u64) -> Result<Self, SplitError> {
        let sum: f64 = fractions.iter().sum();
        let valid = (1..=3).contains(&fractions.len())
            && fractions.iter().all(|f| f.is_finite() && *f > 0.0)
            && (sum - 1.0).abs() <= 1e-9;
        if !valid {
            return Err(SplitError::Fractions(fractions));
        }
        Ok(Self {
            fractions,
            seed,
            stratify_by_question: true,
        })
    }

    /// 80/10/10 train/validation/test.
    pub fn train_val_test(seed: u64) -> Self {
        Self::new(vec![0.8, 0.1, 0.1], seed).expect("valid fractions")
    }

    /// 90/10 train/validation.
    pub fn train_val(seed: u64) -> Self {
        Self::new(vec![0.9, 0.1], seed).expect("valid fractions")
    }

    pub fn unstratified(mut self) -> Self {
        self.stratify_by_question = false;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }
}

/// Part sizes for `n` items: largest remainder over `fractions[i] * n`,
/// ties to the lower part index, then every empty part takes one item from
/// the currently largest part (lowest index on ties).
pub fn apportion(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    if n >= sizes.len() {
        for i in 0..sizes.len() {
            if sizes[i] == 0 {
                let donor = (0..sizes.len())
                    .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
                    .expect("non-empty");
                sizes[donor] -= 1;
                sizes[i] = 1;
            }
        }
    }
    sizes
}

/// Split `corpus` into `spec.fractions().len()` disjoint parts.
pub fn stratified_split(corpus: &Corpus, spec: &SplitSpec) -> Result<Vec<Corpus>, SplitError> {
    let qids: Vec<&str> = corpus
        .pairs()
        .iter()
        .map(|p| p.question_id.as_str())
        .collect();
    let buckets = split_indices(&qids, spec)?;
    Ok(buckets.iter().map(|b| corpus.select(b)).collect())
}

/// Index form of [`stratified_split`]: `question_ids[i]` is the question of
/// item `i`; each returned part lists item indices in ascending order.
pub fn split_indices(
    question_ids: &[&str],
    spec: &SplitSpec,
) -> Result<Vec<Vec<usize>>, SplitError> {
    let parts = spec.fractions.len();
    let mut groups: Vec<(u64, Vec<usize>)> = Vec::new();
    if spec.stratify_by_question {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut names: Vec<&str> = Vec::new();
        for (i, &q) in question_ids.iter().enumerate() {
            let g = *index.entry(q).or_insert_with(|| {
                groups.push((spec.seed ^ fnv1a64(q), Vec::new()));
                names.push(q);
                groups.len() - 1
            });
            groups[g].1.push(i);
        }
        if let Some(g) = groups.iter().position(|(_, m)| m.len() < parts) {
            return Err(SplitError::TooFewPairs {
                question_id: names[g].to_string(),
                pairs: groups[g].1.len(),
                parts,
            });
        }
    } else {
        groups.push((spec.seed, (0..question_ids.len()).collect()));
    }

    let mut assignment = vec![0usize; question_ids.len()];
    for (seed, mut members) in groups {
        SplitMix64::new(seed).shuffle(&mut members);
        let sizes = apportion(members.len(), &spec.fractions);
        let mut it = members.into_iter();
        for (part, size) in sizes.into_iter().enumerate() {
            for i in it.by_ref().take(size) {
                assignment[i] = part;
            }
        }
    }

    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); parts];
    for (i, part) in assignment.into_iter().enumerate() {
        buckets[part].push(i);
    }
    Ok(buckets)
}
