//! Seeded synthetic corpora whose scores are a known linear function of the
//! hash embedder's pair vectors, for smoke tests and demonstrations.

use crate::corpus::{AnswerPair, Corpus, CorpusSource};
use crate::embed::{embed_pairs, HashProvider};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub questions: usize,
    pub answers_per_question: usize,
    /// Dimension of the hash pair vectors the target is built from.
    pub dim: usize,
    pub noise_sd: f64,
    pub score_max: f64,
    pub seed: u64,
    /// Permute the scores across pairs, destroying the text-score relation.
    pub shuffle_labels: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            questions: 20,
            answers_per_question: 25,
            dim: 32,
            noise_sd: 0.02,
            score_max: 5.0,
            seed: 7,
            shuffle_labels: false,
        }
    }
}

fn gaussian(rng: &mut SplitMix64) -> f64 {
    // Box-Muller; 1 - u keeps the logarithm finite.
    let u = 1.0 - rng.next_f64();
    let v = rng.next_f64();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Scaled score `clip(0.5 + 0.2·√d·(w·v) + ε, 0, 1)` with `v` the pair's
/// hash vector, `w` a seeded unit direction and `ε ~ N(0, noise_sd²)`.
pub fn synthetic_corpus(spec: &SyntheticSpec) -> Corpus {
    let mut rng = SplitMix64::new(spec.seed);
    let mut w: Vec<f64> = (0..spec.dim).map(|_| gaussian(&mut rng)).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.iter_mut().for_each(|x| *x /= norm);

    let mut texts = Vec::new();
    for q in 0..spec.questions {
        for k in 0..spec.answers_per_question {
            texts.push((
                q,
                k,
                format!("reference answer for question {q}"),
                format!(
                    "student {k} answer to question {q} variant {}",
                    rng.next_u64() % 1000
                ),
            ));
        }
    }
    let provider = HashProvider::new(spec.dim);
    let pairs: Vec<(&str, &str)> = texts
        .iter()
        .map(|(_, _, r, s)| (r.as_str(), s.as_str()))
        .collect();
    let vectors = embed_pairs(&provider, &pairs).expect("hash provider embeds pairs");
    let scale = 0.2 * (spec.dim as f64).sqrt();
    let mut scores: Vec<f64> = vectors
        .iter()
        .map(|v| {
            let z: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            (0.5 + scale * z + spec.noise_sd * gaussian(&mut rng)).clamp(0.0, 1.0) * spec.score_max
        })
        .collect();
    if spec.shuffle_labels {
        rng.shuffle(&mut scores);
    }
    let answers = texts
        .into_iter()
        .zip(scores)
        .map(|((q, k, r, s), score)| {
            AnswerPair::new(format!("q{q}-{k}"), format!("q{q}"), r, s).with_score(score)
        })
        .collect();
    Corpus::new(answers, spec.score_max, CorpusSource::UserCsv).expect("generated corpus is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = SyntheticSpec::default();
        let a = synthetic_corpus(&spec);
        assert_eq!(a.len(), 500);
        assert_eq!(a.question_ids().len(), 20);
        assert_eq!(a, synthetic_corpus(&spec));
        let s = a.gold_scores().unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 2.5).abs() < 0.2, "mean {mean}");
    }

    #[test]
    fn shuffled_labels_are_a_permutation() {
        let spec = SyntheticSpec::default();
        let mut a = synthetic_corpus(&spec).gold_scores().unwrap();
        let mut b = synthetic_corpus(&SyntheticSpec {
            shuffle_labels: true,
            ..spec
        })
        .gold_scores()
        .unwrap();
        assert_ne!(a, b);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }
}
