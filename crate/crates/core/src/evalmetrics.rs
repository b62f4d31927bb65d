//! Regression metrics: Pearson correlation, RMSE, MAE and R².
//!
//! Covariance and standard deviations share the population (1/N)
//! normalisation, so the correlation does not depend on it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("correlation is undefined: {0} has zero variance")]
    UndefinedCorrelation(&'static str),
    #[error("R² is undefined: targets have zero variance")]
    UndefinedRSquared,
    #[error("no prediction for id `{0}`")]
    MissingPrediction(String),
    #[error("prediction for unknown id `{0}`")]
    UnknownId(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("missing gold score for id `{0}`")]
    MissingGold(String),
    #[error("value {value} for id `{id}` outside [0, {score_max}]")]
    OutOfScale {
        id: String,
        value: f64,
        score_max: f64,
    },
}

fn check<T>(a: &[T], b: &[T], needed: usize) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::Length(a.len(), b.len()));
    }
    if a.len() < needed {
        return Err(MetricError::TooFew {
            needed,
            got: a.len(),
        });
    }
    Ok(())
}

fn mean<T: Scalar>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::of_usize(x.len())
}

/// Two-pass, mean-centred Pearson correlation.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T, MetricError> {
    check(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() {
        return Err(MetricError::UndefinedCorrelation("x"));
    }
    if syy == T::zero() {
        return Err(MetricError::UndefinedCorrelation("y"));
    }
    let r = sxy / (sxx * syy).sqrt();
    Ok(r.max(-T::one()).min(T::one()))
}

pub fn rmse<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T, MetricError> {
    check(actual, predicted, 1)?;
    let sse: T = actual
        .iter()
        .zip(predicted)
        .map(|(&a, &p)| (a - p) * (a - p))
        .sum();
    Ok((sse / T::of_usize(actual.len())).sqrt())
}

pub fn mae<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T, MetricError> {
    check(actual, predicted, 1)?;
    let sae: T = actual
        .iter()
        .zip(predicted)
        .map(|(&a, &p)| (a - p).abs())
        .sum();
    Ok(sae / T::of_usize(actual.len()))
}

pub fn r_squared<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T, MetricError> {
    check(actual, predicted, 2)?;
    let m = mean(actual);
    let sst: T = actual.iter().map(|&a| (a - m) * (a - m)).sum();
    if sst == T::zero() {
        return Err(MetricError::UndefinedRSquared);
    }
    let sse: T = actual
        .iter()
        .zip(predicted)
        .map(|(&a, &p)| (a - p) * (a - p))
        .sum();
    Ok(T::one() - sse / sst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub pearson: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl EvalResult {
    pub fn from_slices(actual: &[f64], predicted: &[f64]) -> Result<Self, MetricError> {
        Ok(Self {
            pearson: pearson(actual, predicted)?,
            rmse: rmse(actual, predicted)?,
            mae: mae(actual, predicted)?,
            r_squared: r_squared(actual, predicted)?,
            n: actual.len(),
        })
    }

    /// Plain-text table in the layout of the usual results tables.
    pub fn table(&self) -> String {
        format!(
            "Metric               Value\n\
             Mean Absolute Error  {:.4}\n\
             RMSE                 {:.4}\n\
             R Squared            {:.4}\n\
             Correlation          {:.4}\n\
             N                    {}\n",
            self.mae, self.rmse, self.r_squared, self.pearson, self.n
        )
    }
}

/// Align gold and predicted scores by id and compute the metrics on the
/// original score scale. Both sides must lie in `[0, score_max]`; gold
/// order determines the pairing order.
pub fn evaluate(
    gold: &[(String, Option<f64>)],
    predictions: &[(String, f64)],
    score_max: f64,
) -> Result<EvalResult, MetricError> {
    let mut by_id: HashMap<&str, f64> = HashMap::with_capacity(predictions.len());
    for (id, p) in predictions {
        if by_id.insert(id.as_str(), *p).is_some() {
            return Err(MetricError::DuplicateId(id.clone()));
        }
    }
    let in_scale = |id: &str, value: f64| {
        if (0.0..=score_max).contains(&value) {
            Ok(value)
        } else {
            Err(MetricError::OutOfScale {
                id: id.to_string(),
                value,
                score_max,
            })
        }
    };
    let mut actual = Vec::with_capacity(gold.len());
    let mut predicted = Vec::with_capacity(gold.len());
    for (id, g) in gold {
        let g = g.ok_or_else(|| MetricError::MissingGold(id.clone()))?;
        let p = by_id
            .remove(id.as_str())
            .ok_or_else(|| MetricError::MissingPrediction(id.clone()))?;
        actual.push(in_scale(id, g)?);
        predicted.push(in_scale(id, p)?);
    }
    if let Some(extra) = predictions
        .iter()
        .find(|(id, _)| by_id.contains_key(id.as_str()))
    {
        return Err(MetricError::UnknownId(extra.0.clone()));
    }
    EvalResult::from_slices(&actual, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0f64, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0f64, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(
            pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap(),
            0.8
        );
    }

    #[test]
    fn pearson_zero_variance_is_loud() {
        assert_eq!(
            pearson(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]),
            Err(MetricError::UndefinedCorrelation("x"))
        );
        assert_eq!(
            pearson(&[1.0, 2.0], &[4.0, 4.0]),
            Err(MetricError::UndefinedCorrelation("y"))
        );
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(MetricError::TooFew { .. })
        ));
    }

    #[test]
    fn error_examples() {
        let a = [0.0, 0.0];
        let p = [3.0, 4.0];
        assert!((rmse(&a, &p).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&a, &p).unwrap(), 3.5);
        let x = [1.0, 2.0, 4.0];
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        assert_eq!(mae(&x, &x).unwrap(), 0.0);
        assert_eq!(r_squared(&x, &x).unwrap(), 1.0);
        let m = [7.0 / 3.0; 3];
        assert!(r_squared::<f64>(&x, &m).unwrap().abs() < 1e-15);
        assert_eq!(
            r_squared(&[2.0, 2.0], &[1.0, 3.0]),
            Err(MetricError::UndefinedRSquared)
        );
        assert_eq!(rmse(&[1.0], &[1.0, 2.0]), Err(MetricError::Length(1, 2)));
    }

    fn gold(v: &[(&str, f64)]) -> Vec<(String, Option<f64>)> {
        v.iter().map(|(i, s)| (i.to_string(), Some(*s))).collect()
    }

    fn preds(v: &[(&str, f64)]) -> Vec<(String, f64)> {
        v.iter().map(|(i, s)| (i.to_string(), *s)).collect()
    }

    #[test]
    fn evaluate_aligns_by_id() {
        let g = gold(&[("a", 1.0), ("b", 3.0), ("c", 5.0)]);
        let r = evaluate(&g, &preds(&[("c", 5.0), ("a", 1.0), ("b", 3.0)]), 5.0).unwrap();
        assert_eq!((r.pearson, r.rmse, r.n), (1.0, 0.0, 3));
        assert_eq!(
            evaluate(&g, &preds(&[("a", 1.0), ("b", 3.0)]), 5.0),
            Err(MetricError::MissingPrediction("c".into()))
        );
        assert_eq!(
            evaluate(
                &g,
                &preds(&[("a", 1.0), ("b", 3.0), ("c", 5.0), ("d", 1.0)]),
                5.0
            ),
            Err(MetricError::UnknownId("d".into()))
        );
        let mut g2 = g.clone();
        g2[1].1 = None;
        assert_eq!(
            evaluate(&g2, &preds(&[("a", 1.0), ("b", 3.0), ("c", 5.0)]), 5.0),
            Err(MetricError::MissingGold("b".into()))
        );
    }

    #[test]
    fn scaled_and_descaled_agree() {
        let g = [0.0, 1.5, 2.5, 4.0, 5.0];
        let p = [0.5, 1.0, 3.0, 4.5, 4.0];
        let gs: Vec<f64> = g.iter().map(|x| x / 5.0).collect();
        let ps: Vec<f64> = p.iter().map(|x| x / 5.0).collect();
        assert!((rmse(&g, &p).unwrap() - 5.0 * rmse(&gs, &ps).unwrap()).abs() < 1e-12);
        assert!((pearson(&g, &p).unwrap() - pearson(&gs, &ps).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn table_layout() {
        let r = EvalResult::from_slices(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        let t = r.table();
        assert!(t.contains("Correlation          1.0000"));
        assert!(t.contains("Mean Absolute Error  0.0000"));
    }
}
