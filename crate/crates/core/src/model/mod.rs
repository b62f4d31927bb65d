//! Regression head, Huber loss and the bagged-tree baseline.

mod forest;
mod head;

pub use forest::{Forest, ForestConfig, Tree};
pub use head::{
    Dense, ForwardCache, Gradients, HeadConfig, HeadModel, Mode, DEFAULT_DROPOUT,
    DEFAULT_HEAD_SEED, DEFAULT_HIDDEN,
};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("input has dimension {got}, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("layer shape mismatch: {0}")]
    Shape(String),
    #[error("forward cache does not match the current parameters")]
    StaleCache,
    #[error("non-finite parameter or input")]
    NonFinite,
    #[error("training set is empty")]
    Empty,
    #[error("feature rows ({rows}) and targets ({targets}) differ in length")]
    Length { rows: usize, targets: usize },
}

/// Huber loss of residual `r = y - yhat` and its derivative with respect to
/// `yhat`.
pub fn huber_loss<T: Scalar>(y: T, yhat: T, delta: T) -> (T, T) {
    let r = y - yhat;
    let half = T::of(0.5);
    if r.abs() <= delta {
        (half * r * r, -r)
    } else {
        (delta * (r.abs() - half * delta), -delta * r.signum())
    }
}

/// Clip a raw head output to `[0, 1]` and map it back onto `[0, score_max]`.
pub fn predict_score(raw: f64, score_max: f64) -> f64 {
    raw.clamp(0.0, 1.0) * score_max
}
