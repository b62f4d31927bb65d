//! Fully connected regression head: `[affine -> ReLU -> dropout]*` then a
//! final affine map to one scalar, with hand-written backpropagation.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN: usize = 256;
pub const DEFAULT_DROPOUT: f64 = 0.1;
pub const DEFAULT_HEAD_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub dropout_p: f64,
    pub seed: u64,
}

impl HeadConfig {
    /// One hidden layer of 256 units with dropout 0.1.
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims: vec![DEFAULT_HIDDEN],
            dropout_p: DEFAULT_DROPOUT,
            seed: DEFAULT_HEAD_SEED,
        }
    }

    /// Three affine layers with (ReLU, dropout) after the first two.
    pub fn large_frozen(input_dim: usize) -> Self {
        Self {
            hidden_dims: vec![512, 128],
            ..Self::new(input_dim)
        }
    }

    /// Two affine layers with one (ReLU, dropout) block between them.
    pub fn base_frozen(input_dim: usize) -> Self {
        Self::new(input_dim)
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden_dims = hidden;
        self
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_p = p;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(ModelError::Config("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(ModelError::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout_p
            )));
        }
        Ok(())
    }

    /// `(outputs, inputs)` for each affine layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_dims);
        dims.push(1);
        dims.windows(2).map(|w| (w[1], w[0])).collect()
    }
}

/// Row-major `outputs x inputs` weights and a bias per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); outputs * inputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(x).map(|(&w, &xi)| w * xi).sum::<T>() + b)
            .collect()
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Values recorded by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    version: u64,
    /// Input to each affine layer.
    inputs: Vec<Vec<T>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Vec<T>>,
    /// Inverted-dropout multipliers per hidden layer (train mode only).
    masks: Vec<Option<Vec<T>>>,
    pub output: T,
}

/// Parameter-shaped gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &HeadModel<T>) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.outputs, l.inputs))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, &y) in a.weights.iter_mut().zip(&b.weights) {
                *x = *x + y;
            }
            for (x, &y) in a.bias.iter_mut().zip(&b.bias) {
                *x = *x + y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for l in &mut self.layers {
            l.weights
                .iter_mut()
                .chain(l.bias.iter_mut())
                .for_each(|x| *x = *x * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    /// Flattened view in the same order as [`HeadModel::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeadModel<T> {
    config: HeadConfig,
    layers: Vec<Dense<T>>,
    #[serde(skip, default = "default_rng")]
    dropout_rng: SplitMix64,
    #[serde(skip)]
    version: u64,
}

/// Equal when configuration and parameters match; dropout stream position
/// and cache version are ignored.
impl<T: PartialEq> PartialEq for HeadModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.layers == other.layers
    }
}

fn default_rng() -> SplitMix64 {
    SplitMix64::new(DEFAULT_HEAD_SEED)
}

impl<T: Scalar> HeadModel<T> {
    /// Weights uniform in `±sqrt(6 / fan_in)` drawn layer by layer,
    /// row-major, from SplitMix64 seeded with `config.seed`; zero biases.
    /// The same stream then supplies dropout masks.
    pub fn init(config: HeadConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = SplitMix64::new(config.seed);
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(out, inp)| {
                let limit = (6.0 / inp as f64).sqrt();
                let mut d = Dense::zeros(out, inp);
                d.weights
                    .iter_mut()
                    .for_each(|w| *w = T::of(rng.uniform(-limit, limit)));
                d
            })
            .collect();
        Ok(Self {
            config,
            layers,
            dropout_rng: rng,
            version: 0,
        })
    }

    /// All parameters zero.
    pub fn zeros(config: HeadConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(o, i)| Dense::zeros(o, i))
            .collect();
        Ok(Self {
            dropout_rng: SplitMix64::new(config.seed),
            config,
            layers,
            version: 0,
        })
    }

    /// Rebuild from stored layers, checking that the shapes chain.
    pub fn from_layers(config: HeadConfig, layers: Vec<Dense<T>>) -> Result<Self, ModelError> {
        config.validate()?;
        let shapes = config.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(ModelError::Shape(format!(
                "expected {} layers, found {}",
                shapes.len(),
                layers.len()
            )));
        }
        for (i, ((out, inp), l)) in shapes.iter().zip(&layers).enumerate() {
            if l.outputs != *out
                || l.inputs != *inp
                || l.weights.len() != out * inp
                || l.bias.len() != *out
            {
                return Err(ModelError::Shape(format!(
                    "layer {i}: expected {out}x{inp}, found {}x{} ({} weights, {} biases)",
                    l.outputs,
                    l.inputs,
                    l.weights.len(),
                    l.bias.len()
                )));
            }
            if !l.is_finite() {
                return Err(ModelError::NonFinite);
            }
        }
        Ok(Self {
            dropout_rng: SplitMix64::new(config.seed),
            config,
            layers,
            version: 0,
        })
    }

    pub fn config(&self) -> &HeadConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    /// Mutable access for hand-set weights. Invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        self.version += 1;
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Restart the dropout stream.
    pub fn reseed_dropout(&mut self, seed: u64) {
        self.dropout_rng = SplitMix64::new(seed);
    }

    /// Parameter slices in layer order, weights before biases. Invalidates
    /// outstanding caches.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.version += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    pub fn forward(&mut self, x: &[T], mode: Mode) -> Result<ForwardCache<T>, ModelError> {
        if x.len() != self.config.input_dim {
            return Err(ModelError::Dimension {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        let p = self.config.dropout_p;
        let hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(hidden);
        let mut masks = Vec::with_capacity(hidden);
        let mut a = x.to_vec();
        for layer in &self.layers[..hidden] {
            let z = layer.apply(&a);
            let mut h: Vec<T> = z.iter().map(|&v| v.max(T::zero())).collect();
            let mask = if mode == Mode::Train && p > 0.0 {
                let keep = T::of(1.0 / (1.0 - p));
                let m: Vec<T> = (0..h.len())
                    .map(|_| {
                        if self.dropout_rng.next_f64() < p {
                            T::zero()
                        } else {
                            keep
                        }
                    })
                    .collect();
                h.iter_mut().zip(&m).for_each(|(v, &k)| *v = *v * k);
                Some(m)
            } else {
                None
            };
            inputs.push(std::mem::replace(&mut a, h));
            pre.push(z);
            masks.push(mask);
        }
        let output = self.layers[hidden].apply(&a)[0];
        inputs.push(a);
        Ok(ForwardCache {
            version: self.version,
            inputs,
            pre,
            masks,
            output,
        })
    }

    /// Deterministic evaluation-mode prediction on the raw (scaled) axis.
    pub fn predict(&self, x: &[T]) -> Result<T, ModelError> {
        if x.len() != self.config.input_dim {
            return Err(ModelError::Dimension {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        let hidden = self.layers.len() - 1;
        let mut a = x.to_vec();
        for layer in &self.layers[..hidden] {
            a = layer
                .apply(&a)
                .into_iter()
                .map(|v| v.max(T::zero()))
                .collect();
        }
        Ok(self.layers[hidden].apply(&a)[0])
    }

    /// Gradients of the loss given `dloss = dL/d(output)`.
    pub fn backward(&self, cache: &ForwardCache<T>, dloss: T) -> Result<Gradients<T>, ModelError> {
        if cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(ModelError::StaleCache);
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = vec![dloss];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.inputs[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] = d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(w, &a)| *w = d * a);
            }
            if l == 0 {
                break;
            }
            let mut upstream = vec![T::zero(); layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                upstream
                    .iter_mut()
                    .zip(row)
                    .for_each(|(u, &w)| *u = *u + w * d);
            }
            let h = l - 1;
            if let Some(mask) = &cache.masks[h] {
                upstream
                    .iter_mut()
                    .zip(mask)
                    .for_each(|(u, &m)| *u = *u * m);
            }
            upstream.iter_mut().zip(&cache.pre[h]).for_each(|(u, &z)| {
                if z <= T::zero() {
                    *u = T::zero();
                }
            });
            delta = upstream;
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let c = HeadConfig::new(8).with_hidden(vec![5, 3]);
        let a = HeadModel::<f64>::init(c.clone()).unwrap();
        let b = HeadModel::<f64>::init(c).unwrap();
        assert_eq!(a, b);
        for l in a.layers() {
            let limit = (6.0 / l.inputs as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= limit));
            assert!(l.bias.iter().all(|b| *b == 0.0));
        }
    }

    #[test]
    fn shapes_chain() {
        let m = HeadModel::<f64>::init(HeadConfig::new(4).with_hidden(vec![3])).unwrap();
        let shapes: Vec<_> = m
            .layers()
            .iter()
            .map(|l| (l.outputs, l.inputs, l.weights.len(), l.bias.len()))
            .collect();
        assert_eq!(shapes, [(3, 4, 12, 3), (1, 3, 3, 1)]);
        let lin = HeadModel::<f64>::init(HeadConfig::new(4).with_hidden(vec![])).unwrap();
        assert_eq!(lin.layers().len(), 1);
        assert_eq!((lin.layers()[0].outputs, lin.layers()[0].inputs), (1, 4));
        assert_eq!(HeadConfig::large_frozen(10).layer_shapes().len(), 3);
        assert_eq!(HeadConfig::base_frozen(10).layer_shapes().len(), 2);
    }

    #[test]
    fn zero_weights_predict_zero() {
        let mut m = HeadModel::<f64>::zeros(HeadConfig::new(3)).unwrap();
        assert_eq!(m.predict(&[1.0, -2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(
            m.forward(&[5.0, 5.0, 5.0], Mode::Train).unwrap().output,
            0.0
        );
    }

    #[test]
    fn hand_computed_forward() {
        // x = [1, 2]; hidden: 1 unit, w = [0.5, -1], b = 2 -> z = 0.5, relu 0.5
        // output: w = 3, b = -0.25 -> 1.25
        let mut m = HeadModel::<f64>::zeros(HeadConfig::new(2).with_hidden(vec![1])).unwrap();
        {
            let l = m.layers_mut();
            l[0].weights.copy_from_slice(&[0.5, -1.0]);
            l[0].bias[0] = 2.0;
            l[1].weights[0] = 3.0;
            l[1].bias[0] = -0.25;
        }
        assert_eq!(m.predict(&[1.0, 2.0]).unwrap(), 1.25);
        assert_eq!(m.forward(&[1.0, 2.0], Mode::Eval).unwrap().output, 1.25);
        // negative pre-activation is clipped: z = 0.5 - 4 + 2 = -1.5 -> 0
        assert_eq!(m.predict(&[1.0, 4.0]).unwrap(), -0.25);
    }

    #[test]
    fn eval_is_pure() {
        let mut m = HeadModel::<f64>::init(HeadConfig::new(6).with_hidden(vec![4])).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6];
        let a = m.forward(&x, Mode::Eval).unwrap().output;
        let b = m.forward(&x, Mode::Eval).unwrap().output;
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), m.predict(&x).unwrap().to_bits());
    }

    #[test]
    fn dimension_mismatch() {
        let mut m = HeadModel::<f64>::init(HeadConfig::new(3)).unwrap();
        assert!(matches!(
            m.forward(&[1.0], Mode::Eval),
            Err(ModelError::Dimension {
                expected: 3,
                got: 1
            })
        ));
    }

    #[test]
    fn zero_dloss_gives_zero_grads() {
        let mut m = HeadModel::<f64>::init(HeadConfig::new(3).with_hidden(vec![4])).unwrap();
        let c = m.forward(&[0.3, -0.1, 0.9], Mode::Train).unwrap();
        let g = m.backward(&c, 0.0).unwrap();
        assert!(g.slices().iter().all(|s| s.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn duplicate_sample_doubles_gradient() {
        let mut m =
            HeadModel::<f64>::init(HeadConfig::new(3).with_hidden(vec![4]).with_dropout(0.0))
                .unwrap();
        let c = m.forward(&[0.3, -0.1, 0.9], Mode::Train).unwrap();
        let g = m.backward(&c, 0.7).unwrap();
        let mut sum = g.clone();
        sum.add_assign(&g);
        let mut twice = g.clone();
        twice.scale(2.0);
        assert_eq!(sum, twice);
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = HeadModel::<f64>::init(HeadConfig::new(2)).unwrap();
        let c = m.forward(&[1.0, 1.0], Mode::Eval).unwrap();
        m.param_slices_mut();
        assert!(matches!(m.backward(&c, 1.0), Err(ModelError::StaleCache)));
    }

    #[test]
    fn dropout_scales_survivors() {
        let mut m =
            HeadModel::<f64>::init(HeadConfig::new(4).with_hidden(vec![64]).with_dropout(0.5))
                .unwrap();
        let c = m.forward(&[1.0, 0.5, -0.5, 0.25], Mode::Train).unwrap();
        let mask = c.masks[0].as_ref().unwrap();
        assert!(mask.iter().all(|&v| v == 0.0 || v == 2.0));
        assert!(mask.contains(&0.0) && mask.contains(&2.0));
    }

    #[test]
    fn from_layers_validates_shape() {
        let m = HeadModel::<f64>::init(HeadConfig::new(3).with_hidden(vec![2])).unwrap();
        let mut layers = m.layers().to_vec();
        assert!(HeadModel::from_layers(m.config().clone(), layers.clone()).is_ok());
        layers[1].weights.pop();
        assert!(matches!(
            HeadModel::from_layers(m.config().clone(), layers),
            Err(ModelError::Shape(_))
        ));
    }

    #[test]
    fn single_precision_forward() {
        let m = HeadModel::<f32>::init(HeadConfig::new(3)).unwrap();
        assert!(m.predict(&[0.1, 0.2, 0.3]).unwrap().is_finite());
    }
}
