//! Optimisation loop for the regression head: AdamW with decoupled weight
//! decay, linear warmup/decay, per-epoch validation, early stopping at the
//! minimum validation loss, the abort rule and the restart controller.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalmetrics::pearson;
use crate::model::{huber_loss, Gradients, HeadConfig, HeadModel, Mode, ModelError};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::splitter::{split_indices, SplitError, SplitSpec};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

const SHUFFLE_SALT: u64 = 0x5348_5546_464c_4531;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite {what} in attempt {attempt}, epoch {epoch}")]
    Numeric {
        attempt: usize,
        epoch: usize,
        what: &'static str,
    },
    #[error("non-finite gradients")]
    NonFiniteGradients,
    #[error("all {0} training attempts failed numerically")]
    AllFailed(usize),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr_peak: f64,
    pub weight_decay: f64,
    pub warmup_proportion: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub huber_delta: f64,
    pub abort_epoch: usize,
    pub abort_rmse_scaled: f64,
    pub accept_val_pearson: f64,
    pub max_restarts: usize,
    /// Attempt `a` (1-based) splits and trains with seed `base_seed + a`.
    pub base_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_peak: 1e-5,
            weight_decay: 0.1,
            warmup_proportion: 0.06,
            max_epochs: 12,
            batch_size: 1,
            huber_delta: 1.0,
            abort_epoch: 6,
            abort_rmse_scaled: 0.15,
            accept_val_pearson: 0.75,
            max_restarts: 10,
            base_seed: 39,
        }
    }
}

impl TrainConfig {
    /// Settings for heads over frozen encoders: weight decay 1e-8.
    pub fn frozen() -> Self {
        Self {
            weight_decay: 1e-8,
            ..Self::default()
        }
    }

    pub fn attempt_seed(&self, attempt: usize) -> u64 {
        self.base_seed.wrapping_add(attempt as u64)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lr_peak.is_finite() && self.lr_peak > 0.0) {
            return bad("lr_peak must be positive");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if !(self.warmup_proportion > 0.0 && self.warmup_proportion < 1.0) {
            return bad("warmup_proportion must lie in (0, 1)");
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.max_restarts == 0 {
            return bad("max_epochs, batch_size and max_restarts must be positive");
        }
        if self.abort_epoch == 0 || self.abort_epoch > self.max_epochs {
            return bad("abort_epoch must lie in 1..=max_epochs");
        }
        if !(self.huber_delta.is_finite() && self.huber_delta > 0.0) {
            return bad("huber_delta must be positive");
        }
        for (name, t) in [
            ("abort_rmse_scaled", self.abort_rmse_scaled),
            ("accept_val_pearson", self.accept_val_pearson),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return Err(TrainError::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Learning rate at 1-based `step` of `total_steps`: linear ramp to
/// `lr_peak` over the first `ceil(warmup_proportion * total)` steps, then
/// linear decay to zero at the final step.
pub fn lr_at(step: usize, total_steps: usize, config: &TrainConfig) -> f64 {
    let total = total_steps.max(1);
    let step = step.clamp(1, total);
    // 1e-9 absorbs representation error such as 0.06 * 50 = 3.0000000000000004
    let warm = ((config.warmup_proportion * total as f64 - 1e-9).ceil() as usize).clamp(1, total);
    if step <= warm {
        config.lr_peak * step as f64 / warm as f64
    } else {
        config.lr_peak * (total - step) as f64 / (total - warm) as f64
    }
}

/// First and second moment accumulators, one buffer per parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &HeadModel<T>) -> Self {
        let shapes: Vec<usize> = model
            .layers()
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        Self {
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            t: 0,
        }
    }
}

/// One AdamW update: `θ ← θ(1 − lr·λ) − lr·m̂/(√v̂ + ε)`. Decay applies to
/// every parameter, biases included.
pub fn optimizer_step<T: Scalar>(
    model: &mut HeadModel<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    lr: f64,
    weight_decay: f64,
) -> Result<(), TrainError> {
    if !grads.is_finite() {
        return Err(TrainError::NonFiniteGradients);
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (T::of(BETA1), T::of(BETA2));
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let lr_t = T::of(lr);
    let shrink = T::one() - lr_t * T::of(weight_decay);
    let eps = T::of(EPSILON);
    let g_slices = grads.slices();
    let params = model.param_slices_mut();
    for (k, theta) in params.into_iter().enumerate() {
        let (m, v, g) = (&mut state.m[k], &mut state.v[k], g_slices[k]);
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (T::one() - b1) * g[i];
            v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            theta[i] = theta[i] * shrink - lr_t * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// The abort rule: fires only at `abort_epoch`, and only when the scaled
/// validation RMSE is strictly above the threshold.
pub fn abort_triggered(epoch: usize, val_rmse_scaled: f64, config: &TrainConfig) -> bool {
    epoch == config.abort_epoch && val_rmse_scaled > config.abort_rmse_scaled
}

/// Feature rows with their targets on the scaled `[0, 1]` axis.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a, T> {
    pub x: &'a [Vec<T>],
    pub y: &'a [T],
}

impl<'a, T> Samples<'a, T> {
    pub fn new(x: &'a [Vec<T>], y: &'a [T]) -> Self {
        assert_eq!(x.len(), y.len(), "rows and targets differ in length");
        Self { x, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub attempt: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_rmse_scaled: f64,
    pub val_pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: Option<usize>,
    pub aborted: bool,
    /// Set when the attempt stopped on a numeric failure.
    pub failure: Option<String>,
}

impl AttemptRecord {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.map(|e| &self.epochs[e - 1])
    }

    pub fn best_pearson(&self) -> Option<f64> {
        self.best().and_then(|r| r.val_pearson)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValMetrics {
    pub loss: f64,
    pub rmse_scaled: f64,
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub attempts: Vec<AttemptRecord>,
    pub chosen_attempt: usize,
    pub chosen_epoch: usize,
    pub accepted: bool,
    pub final_val: ValMetrics,
}

impl TrainReport {
    pub fn chosen(&self) -> &AttemptRecord {
        &self.attempts[self.chosen_attempt - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Abort,
}

/// Hooks called as training progresses. Returning [`Control::Abort`] from
/// `on_epoch` ends the attempt as aborted.
pub trait TrainObserver {
    fn on_attempt_start(&mut self, _attempt: usize, _seed: u64) {}
    fn on_epoch(&mut self, _record: &EpochRecord) -> Control {
        Control::Continue
    }
    fn on_attempt_end(&mut self, _record: &AttemptRecord) {}
}

impl TrainObserver for () {}

pub struct AttemptOutcome<T> {
    pub record: AttemptRecord,
    /// Parameters from the epoch with the lowest validation loss.
    pub best_model: Option<HeadModel<T>>,
}

/// Mean Huber loss, RMSE and Pearson of eval-mode predictions.
pub fn validate<T: Scalar>(
    model: &HeadModel<T>,
    val: Samples<T>,
    delta: f64,
) -> Result<ValMetrics, ModelError> {
    let preds = val
        .x
        .iter()
        .map(|x| model.predict(x))
        .collect::<Result<Vec<T>, _>>()?;
    let d = T::of(delta);
    let n = T::of_usize(val.len());
    let loss: T = preds
        .iter()
        .zip(val.y)
        .map(|(&p, &y)| huber_loss(y, p, d).0)
        .sum::<T>()
        / n;
    let mse: T = preds
        .iter()
        .zip(val.y)
        .map(|(&p, &y)| (p - y) * (p - y))
        .sum::<T>()
        / n;
    Ok(ValMetrics {
        loss: loss.as_f64(),
        rmse_scaled: mse.sqrt().as_f64(),
        pearson: pearson(val.y, &preds).ok().map(|r| r.as_f64()),
    })
}

/// Train one head from `head_config` reseeded with `seed`, with batch-size
/// `config.batch_size` steps over a `seed`-shuffled order each epoch.
pub fn train_attempt<T: Scalar>(
    train: Samples<T>,
    val: Samples<T>,
    head_config: &HeadConfig,
    config: &TrainConfig,
    attempt: usize,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<AttemptOutcome<T>, TrainError> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::Config(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let mut model = HeadModel::<T>::init(head_config.clone().with_seed(seed))?;
    let mut state = AdamState::new(&model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffler = SplitMix64::new(seed ^ SHUFFLE_SALT);
    let steps_per_epoch = train.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.max_epochs;
    let delta = T::of(config.huber_delta);

    let mut record = AttemptRecord {
        attempt,
        seed,
        epochs: Vec::new(),
        best_epoch: None,
        aborted: false,
        failure: None,
    };
    let mut best_model = None;
    let mut best_loss = f64::INFINITY;
    let mut step = 0;
    observer.on_attempt_start(attempt, seed);

    'epochs: for epoch in 1..=config.max_epochs {
        shuffler.shuffle(&mut order);
        let mut train_loss = T::zero();
        for batch in order.chunks(config.batch_size) {
            let mut acc: Option<Gradients<T>> = None;
            for &i in batch {
                let cache = model.forward(&train.x[i], Mode::Train)?;
                let (loss, dloss) = huber_loss(train.y[i], cache.output, delta);
                if !loss.is_finite() {
                    record.failure = Some(
                        TrainError::Numeric {
                            attempt,
                            epoch,
                            what: "training loss",
                        }
                        .to_string(),
                    );
                    break 'epochs;
                }
                train_loss = train_loss + loss;
                let g = model.backward(&cache, dloss)?;
                match acc.as_mut() {
                    Some(a) => a.add_assign(&g),
                    None => acc = Some(g),
                }
            }
            let mut grads = acc.expect("non-empty batch");
            if batch.len() > 1 {
                grads.scale(T::one() / T::of_usize(batch.len()));
            }
            step += 1;
            let lr = lr_at(step, total_steps, config);
            if let Err(e) = optimizer_step(&mut model, &grads, &mut state, lr, config.weight_decay)
            {
                record.failure = Some(e.to_string());
                break 'epochs;
            }
        }
        if !model.is_finite() {
            record.failure = Some(
                TrainError::Numeric {
                    attempt,
                    epoch,
                    what: "parameters",
                }
                .to_string(),
            );
            break;
        }
        let metrics = validate(&model, val, config.huber_delta)?;
        if !metrics.loss.is_finite() {
            record.failure = Some(
                TrainError::Numeric {
                    attempt,
                    epoch,
                    what: "validation loss",
                }
                .to_string(),
            );
            break;
        }
        let rec = EpochRecord {
            attempt,
            epoch,
            train_loss: (train_loss / T::of_usize(train.len())).as_f64(),
            val_loss: metrics.loss,
            val_rmse_scaled: metrics.rmse_scaled,
            val_pearson: metrics.pearson,
        };
        if rec.val_loss < best_loss {
            best_loss = rec.val_loss;
            record.best_epoch = Some(epoch);
            best_model = Some(model.clone());
        }
        let control = observer.on_epoch(&rec);
        record.epochs.push(rec);
        if control == Control::Abort || abort_triggered(epoch, metrics.rmse_scaled, config) {
            record.aborted = true;
            break;
        }
    }
    if record.failure.is_some() {
        best_model = None;
        record.best_epoch = None;
    }
    observer.on_attempt_end(&record);
    Ok(AttemptOutcome { record, best_model })
}

/// Restart controller. Attempt `a` splits the items into train/validation
/// with seed `base_seed + a`, trains, and is accepted when it was not
/// aborted and its best-epoch validation Pearson reaches the acceptance
/// threshold. Without an accepted attempt the one with the highest
/// best-epoch Pearson is returned with `accepted = false`.
pub fn fit_with_controller<T: Scalar>(
    question_ids: &[&str],
    x: &[Vec<T>],
    y: &[T],
    head_config: &HeadConfig,
    config: &TrainConfig,
    split: &SplitSpec,
    observer: &mut dyn TrainObserver,
) -> Result<(TrainReport, HeadModel<T>), TrainError> {
    config.validate()?;
    if split.fractions().len() != 2 {
        return Err(TrainError::Config(
            "controller split needs exactly two parts".into(),
        ));
    }
    if question_ids.len() != x.len() || x.len() != y.len() {
        return Err(TrainError::Config(
            "question ids, rows and targets differ in length".into(),
        ));
    }
    let mut attempts = Vec::new();
    let mut models: Vec<Option<HeadModel<T>>> = Vec::new();
    let mut accepted = None;
    for a in 1..=config.max_restarts {
        let seed = config.attempt_seed(a);
        let parts = split_indices(question_ids, &split.clone().with_seed(seed))?;
        let pick = |idx: &[usize]| -> (Vec<Vec<T>>, Vec<T>) {
            (
                idx.iter().map(|&i| x[i].clone()).collect(),
                idx.iter().map(|&i| y[i]).collect(),
            )
        };
        let (tx, ty) = pick(&parts[0]);
        let (vx, vy) = pick(&parts[1]);
        let outcome = train_attempt(
            Samples::new(&tx, &ty),
            Samples::new(&vx, &vy),
            head_config,
            config,
            a,
            seed,
            observer,
        )?;
        let ok = !outcome.record.aborted
            && outcome.record.failure.is_none()
            && outcome
                .record
                .best_pearson()
                .is_some_and(|p| p >= config.accept_val_pearson);
        attempts.push(outcome.record);
        models.push(outcome.best_model);
        if ok {
            accepted = Some(a);
            break;
        }
    }
    let chosen = match accepted {
        Some(a) => a,
        None => {
            let mut best: Option<(usize, f64)> = None;
            for (i, rec) in attempts.iter().enumerate() {
                if models[i].is_none() {
                    continue;
                }
                let p = rec.best_pearson().unwrap_or(f64::NEG_INFINITY);
                if best.is_none_or(|(_, b)| p > b) {
                    best = Some((i + 1, p));
                }
            }
            best.ok_or(TrainError::AllFailed(attempts.len()))?.0
        }
    };
    let model = models[chosen - 1]
        .take()
        .expect("chosen attempt has a model");
    let best = attempts[chosen - 1]
        .best()
        .expect("chosen attempt has a best epoch");
    let report = TrainReport {
        chosen_attempt: chosen,
        chosen_epoch: best.epoch,
        accepted: accepted.is_some(),
        final_val: ValMetrics {
            loss: best.val_loss,
            rmse_scaled: best.val_rmse_scaled,
            pearson: best.val_pearson,
        },
        attempts,
    };
    Ok((report, model))
}
