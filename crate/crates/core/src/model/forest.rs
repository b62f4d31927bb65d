//! Bagged regression trees with squared-error splits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_trees == 0 {
            return Err(ModelError::Config("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ModelError::Config(
                "min_samples_split must be at least 2".into(),
            ));
        }
        if self.max_features == Some(0) {
            return Err(ModelError::Config("max_features must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    Leaf {
        value: T,
    },
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// Nodes in an arena; the root is node 0. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn predict(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        best
    }

    fn fit(
        x: &[Vec<T>],
        y: &[T],
        samples: Vec<usize>,
        config: &ForestConfig,
        rng: &mut SplitMix64,
    ) -> Self {
        let n_features = x[0].len();
        let mut nodes = Vec::new();
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, samples, 0usize)];
        nodes.push(Node::Leaf { value: T::zero() });
        let mut features: Vec<usize> = (0..n_features).collect();
        while let Some((slot, idx, depth)) = stack.pop() {
            let value = leaf_mean(y, &idx);
            let can_split =
                idx.len() >= config.min_samples_split && config.max_depth.is_none_or(|m| depth < m);
            let split = if can_split {
                let candidates = match config.max_features {
                    Some(k) if k < n_features => {
                        rng.shuffle(&mut features);
                        &features[..k]
                    }
                    _ => {
                        features.sort_unstable();
                        &features[..]
                    }
                };
                best_split(x, y, &idx, candidates)
            } else {
                None
            };
            match split {
                None => nodes[slot] = Node::Leaf { value },
                Some((feature, threshold)) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        idx.iter().partition(|&&s| x[s][feature] <= threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: T::zero() });
                    let right = nodes.len();
                    nodes.push(Node::Leaf { value: T::zero() });
                    nodes[slot] = Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    };
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        Self { nodes }
    }
}

/// Mean of the selected targets, kept inside their range despite rounding.
fn leaf_mean<T: Scalar>(y: &[T], idx: &[usize]) -> T {
    let mut lo = y[idx[0]];
    let mut hi = lo;
    let mut sum = T::zero();
    for &i in idx {
        lo = lo.min(y[i]);
        hi = hi.max(y[i]);
        sum = sum + y[i];
    }
    (sum / T::of_usize(idx.len())).max(lo).min(hi)
}

/// Feature and midpoint threshold minimising the children's summed squared
/// error. Ties keep the first candidate in feature then threshold order.
/// Returns `None` when no split strictly reduces the node's error.
fn best_split<T: Scalar>(
    x: &[Vec<T>],
    y: &[T],
    idx: &[usize],
    features: &[usize],
) -> Option<(usize, T)> {
    let n = T::of_usize(idx.len());
    let total: T = idx.iter().map(|&i| y[i]).sum();
    let total_sq: T = idx.iter().map(|&i| y[i] * y[i]).sum();
    let parent = total_sq - total * total / n;
    let mut best: Option<(T, usize, T)> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).expect("finite features"));
        let mut left_sum = T::zero();
        let mut left_sq = T::zero();
        for k in 0..order.len() - 1 {
            let yi = y[order[k]];
            left_sum = left_sum + yi;
            left_sq = left_sq + yi * yi;
            let here = x[order[k]][f];
            let next = x[order[k + 1]][f];
            if here == next {
                continue;
            }
            let nl = T::of_usize(k + 1);
            let nr = n - nl;
            let right_sum = total - left_sum;
            let right_sq = total_sq - left_sq;
            let sse =
                (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
            if best.is_none_or(|(b, _, _)| sse < b) {
                let mut threshold = (here + next) / T::of(2.0);
                if threshold >= next {
                    threshold = here;
                }
                best = Some((sse, f, threshold));
            }
        }
    }
    let tolerance = T::of(1e-12) * (T::one() + parent.abs());
    best.filter(|(sse, _, _)| *sse < parent - tolerance)
        .map(|(_, f, t)| (f, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest<T> {
    config: ForestConfig,
    n_features: usize,
    trees: Vec<Tree<T>>,
    y_min: T,
    y_max: T,
}

impl<T: Scalar> Forest<T> {
    pub fn fit(x: &[Vec<T>], y: &[T], config: ForestConfig) -> Result<Self, ModelError> {
        config.validate()?;
        if x.is_empty() {
            return Err(ModelError::Empty);
        }
        if x.len() != y.len() {
            return Err(ModelError::Length {
                rows: x.len(),
                targets: y.len(),
            });
        }
        let n_features = x[0].len();
        if n_features == 0 {
            return Err(ModelError::Config("feature rows are empty".into()));
        }
        if let Some(row) = x.iter().find(|r| r.len() != n_features) {
            return Err(ModelError::Dimension {
                expected: n_features,
                got: row.len(),
            });
        }
        if !x.iter().flatten().chain(y).all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let mut master = SplitMix64::new(config.seed);
        let seeds: Vec<u64> = (0..config.n_trees).map(|_| master.next_u64()).collect();
        let n = x.len();
        let trees = seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = SplitMix64::new(seed);
                let samples: Vec<usize> = if config.bootstrap {
                    (0..n).map(|_| rng.below(n)).collect()
                } else {
                    (0..n).collect()
                };
                Tree::fit(x, y, samples, &config, &mut rng)
            })
            .collect();
        let y_min = y.iter().copied().fold(y[0], T::min);
        let y_max = y.iter().copied().fold(y[0], T::max);
        Ok(Self {
            config,
            n_features,
            trees,
            y_min,
            y_max,
        })
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn predict(&self, x: &[T]) -> Result<T, ModelError> {
        if x.len() != self.n_features {
            return Err(ModelError::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let sum: T = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok((sum / T::of_usize(self.trees.len()))
            .max(self.y_min)
            .min(self.y_max))
    }
}
