//! Similarity and distance measures between two embedding vectors, plus
//! distribution moments of each vector, forming the twelve-column
//! vector-similarity feature set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum VecSimError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("empty vector")]
    Empty,
    #[error("{0} is undefined for these vectors")]
    Undefined(Metric),
    #[error("moments are undefined for a zero-variance vector")]
    ZeroVariance,
    #[error("moments need at least two components")]
    TooShort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cosine,
    Euclidean,
    Manhattan,
    Canberra,
    Minkowski3,
    BrayCurtis,
    Dice,
    Jaccard,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Cosine,
        Metric::Euclidean,
        Metric::Manhattan,
        Metric::Canberra,
        Metric::Minkowski3,
        Metric::BrayCurtis,
        Metric::Dice,
        Metric::Jaccard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Canberra => "canberra",
            Metric::Minkowski3 => "minkowski3",
            Metric::BrayCurtis => "braycurtis",
            Metric::Dice => "dice",
            Metric::Jaccard => "jaccard",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn dot<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).map(|(&a, &b)| a * b).sum()
}

fn sq_norm<T: Scalar>(u: &[T]) -> T {
    u.iter().map(|&a| a * a).sum()
}

/// Evaluate one measure. Cosine, Dice and Jaccard are similarities; the
/// rest are distances (Bray–Curtis a dissimilarity).
pub fn vector_similarity<T: Scalar>(u: &[T], v: &[T], metric: Metric) -> Result<T, VecSimError> {
    if u.len() != v.len() {
        return Err(VecSimError::Dimension(u.len(), v.len()));
    }
    if u.is_empty() {
        return Err(VecSimError::Empty);
    }
    let diffs = || u.iter().zip(v).map(|(&a, &b)| (a - b).abs());
    let undefined = Err(VecSimError::Undefined(metric));
    let value = match metric {
        Metric::Cosine => {
            let denom = sq_norm(u).sqrt() * sq_norm(v).sqrt();
            if denom == T::zero() {
                return undefined;
            }
            dot(u, v) / denom
        }
        Metric::Euclidean => diffs().map(|d| d * d).sum::<T>().sqrt(),
        Metric::Manhattan => diffs().sum(),
        Metric::Canberra => u
            .iter()
            .zip(v)
            .map(|(&a, &b)| {
                let den = a.abs() + b.abs();
                if den == T::zero() {
                    T::zero()
                } else {
                    (a - b).abs() / den
                }
            })
            .sum(),
        Metric::Minkowski3 => diffs().map(|d| d * d * d).sum::<T>().cbrt(),
        Metric::BrayCurtis => {
            let den: T = u.iter().zip(v).map(|(&a, &b)| (a + b).abs()).sum();
            if den == T::zero() {
                return undefined;
            }
            diffs().sum::<T>() / den
        }
        Metric::Dice => {
            let den = sq_norm(u) + sq_norm(v);
            if den == T::zero() {
                return undefined;
            }
            (T::one() + T::one()) * dot(u, v) / den
        }
        Metric::Jaccard => {
            let uv = dot(u, v);
            let den = sq_norm(u) + sq_norm(v) - uv;
            if den == T::zero() {
                return undefined;
            }
            uv / den
        }
    };
    Ok(value)
}

/// Population skewness and excess kurtosis of the components of `v`.
pub fn moments<T: Scalar>(v: &[T]) -> Result<(T, T), VecSimError> {
    if v.len() < 2 {
        return Err(VecSimError::TooShort);
    }
    let n = T::of_usize(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &x in v {
        let d = x - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if m2 == T::zero() {
        return Err(VecSimError::ZeroVariance);
    }
    let skew = m3 / m2.powf(T::of(1.5));
    let kurt = m4 / (m2 * m2) - T::of(3.0);
    Ok((skew, kurt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VecSimFeatures<T> {
    pub cosine: T,
    pub euclidean: T,
    pub manhattan: T,
    pub canberra: T,
    pub minkowski3: T,
    pub braycurtis: T,
    pub dice: T,
    pub jaccard: T,
    pub skew_ref: T,
    pub kurt_ref: T,
    pub skew_stu: T,
    pub kurt_stu: T,
}

impl<T: Scalar> VecSimFeatures<T> {
    pub const COLUMNS: [&'static str; 12] = [
        "cosine",
        "euclidean",
        "manhattan",
        "canberra",
        "minkowski3",
        "braycurtis",
        "dice",
        "jaccard",
        "skew_ref",
        "kurt_ref",
        "skew_stu",
        "kurt_stu",
    ];

    pub fn to_vec(&self) -> Vec<T> {
        vec![
            self.cosine,
            self.euclidean,
            self.manhattan,
            self.canberra,
            self.minkowski3,
            self.braycurtis,
            self.dice,
            self.jaccard,
            self.skew_ref,
            self.kurt_ref,
            self.skew_stu,
            self.kurt_stu,
        ]
    }
}

pub fn vecsim_features<T: Scalar>(
    reference: &[T],
    student: &[T],
) -> Result<VecSimFeatures<T>, VecSimError> {
    let m = |metric| vector_similarity(reference, student, metric);
    let (skew_ref, kurt_ref) = moments(reference)?;
    let (skew_stu, kurt_stu) = moments(student)?;
    Ok(VecSimFeatures {
        cosine: m(Metric::Cosine)?,
        euclidean: m(Metric::Euclidean)?,
        manhattan: m(Metric::Manhattan)?,
        canberra: m(Metric::Canberra)?,
        minkowski3: m(Metric::Minkowski3)?,
        braycurtis: m(Metric::BrayCurtis)?,
        dice: m(Metric::Dice)?,
        jaccard: m(Metric::Jaccard)?,
        skew_ref,
        kurt_ref,
        skew_stu,
        kurt_stu,
    })
}
