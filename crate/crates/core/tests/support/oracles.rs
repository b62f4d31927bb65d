//! Independent reference computations for the numeric modules. Each oracle
//! is written from the textbook definition with plain index loops and
//! shares no code with the library beyond its public types.
#![allow(dead_code, clippy::needless_range_loop)]

use asag_core::model::{huber_loss, HeadConfig, HeadModel, Mode};
use asag_core::rng::SplitMix64;

pub fn random_vec(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(lo, hi)).collect()
}

// ---- evaluation metrics ----

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut mx = 0.0;
    let mut my = 0.0;
    for i in 0..n {
        mx += x[i];
        my += y[i];
    }
    mx /= n as f64;
    my /= n as f64;
    let mut num = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..n {
        num += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx).powi(2);
        vy += (y[i] - my).powi(2);
    }
    num / (vx.sqrt() * vy.sqrt())
}

pub fn rmse(a: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - p[i]).powi(2);
    }
    (s / a.len() as f64).sqrt()
}

pub fn mae(a: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - p[i]).abs();
    }
    s / a.len() as f64
}

pub fn r_squared(a: &[f64], p: &[f64]) -> f64 {
    let m = a.iter().sum::<f64>() / a.len() as f64;
    let mut res = 0.0;
    let mut tot = 0.0;
    for i in 0..a.len() {
        res += (a[i] - p[i]).powi(2);
        tot += (a[i] - m).powi(2);
    }
    1.0 - res / tot
}

// ---- vector similarity ----

fn dot(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        s += u[i] * v[i];
    }
    s
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    dot(u, v) / (dot(u, u).sqrt() * dot(v, v).sqrt())
}

pub fn minkowski(u: &[f64], v: &[f64], p: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        s += (u[i] - v[i]).abs().powf(p);
    }
    s.powf(1.0 / p)
}

pub fn canberra(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        let d = u[i].abs() + v[i].abs();
        if d != 0.0 {
            s += (u[i] - v[i]).abs() / d;
        }
    }
    s
}

pub fn braycurtis(u: &[f64], v: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..u.len() {
        num += (u[i] - v[i]).abs();
        den += (u[i] + v[i]).abs();
    }
    num / den
}

pub fn dice(u: &[f64], v: &[f64]) -> f64 {
    2.0 * dot(u, v) / (dot(u, u) + dot(v, v))
}

pub fn jaccard(u: &[f64], v: &[f64]) -> f64 {
    let uv = dot(u, v);
    uv / (dot(u, u) + dot(v, v) - uv)
}

/// Population skewness and excess kurtosis from central moments.
pub fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let c = |k: i32| v.iter().map(|x| (x - m).powi(k)).sum::<f64>() / n;
    let (m2, m3, m4) = (c(2), c(3), c(4));
    (m3 / m2.powf(1.5), m4 / m2.powi(2) - 3.0)
}

// ---- fuzzy ratios ----

/// Every string of length 0..=max_len over `alphabet`, with the set of its
/// subsequences as a bitset of string indices grouped by length.
pub struct SubsequenceTable {
    pub strings: Vec<String>,
    lengths: Vec<usize>,
    subseq: Vec<Vec<u64>>,
    length_masks: Vec<Vec<u64>>,
}

impl SubsequenceTable {
    pub fn new(alphabet: &[char], max_len: usize) -> Self {
        let mut strings = vec![String::new()];
        let mut frontier = vec![String::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &frontier {
                for &c in alphabet {
                    next.push(format!("{s}{c}"));
                }
            }
            strings.extend(next.iter().cloned());
            frontier = next;
        }
        let index: std::collections::HashMap<&str, usize> = strings
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let words = strings.len().div_ceil(64);
        let lengths: Vec<usize> = strings.iter().map(|s| s.chars().count()).collect();
        let mut subseq = vec![vec![0u64; words]; strings.len()];
        for (i, s) in strings.iter().enumerate() {
            let chars: Vec<char> = s.chars().collect();
            for mask in 0u32..(1 << chars.len()) {
                let sub: String = (0..chars.len())
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| chars[b])
                    .collect();
                let j = index[sub.as_str()];
                subseq[i][j / 64] |= 1 << (j % 64);
            }
        }
        let mut length_masks = vec![vec![0u64; words]; max_len + 1];
        for (j, &l) in lengths.iter().enumerate() {
            length_masks[l][j / 64] |= 1 << (j % 64);
        }
        Self {
            strings,
            lengths,
            subseq,
            length_masks,
        }
    }

    /// Length of the longest string that is a subsequence of both.
    pub fn lcs(&self, a: usize, b: usize) -> usize {
        let max = self.lengths[a].min(self.lengths[b]);
        for l in (1..=max).rev() {
            let hit = (0..self.subseq[a].len())
                .any(|w| self.subseq[a][w] & self.subseq[b][w] & self.length_masks[l][w] != 0);
            if hit {
                return l;
            }
        }
        0
    }

    pub fn len_of(&self, i: usize) -> usize {
        self.lengths[i]
    }
}

/// The integer percentage nearest to `100 (1 - indel / total)`, ties upward,
/// found by exhaustive comparison of exact rationals.
pub fn indel_ratio(lcs: usize, la: usize, lb: usize) -> u8 {
    let total = la + lb;
    if total == 0 {
        return 100;
    }
    let indel = total - 2 * lcs;
    // value = 100 (total - indel) / total; compare |100 (total - indel) - r total|
    let target = 100 * (total - indel) as i64;
    let mut best = 0i64;
    let mut best_gap = i64::MAX;
    for r in 0..=100i64 {
        let gap = (target - r * total as i64).abs();
        if gap <= best_gap {
            best = r;
            best_gap = gap;
        }
    }
    best as u8
}

// ---- gradients ----

pub struct GradCheck {
    pub max_rel_error: f64,
    pub params: usize,
}

fn loss_at(model: &HeadModel<f64>, x: &[f64], y: f64, delta: f64) -> f64 {
    huber_loss(y, model.predict(x).unwrap(), delta).0
}

/// Compare analytic gradients with central differences (step `h`) on one
/// random network without dropout. Inputs that put a ReLU pre-activation
/// or the Huber residual within `1e-3` of a kink are redrawn, since central
/// differences are invalid across a kink.
pub fn gradient_check(seed: u64, h: f64) -> GradCheck {
    let mut rng = SplitMix64::new(seed);
    let input = 1 + rng.below(6);
    let hidden: Vec<usize> = (0..rng.below(3)).map(|_| 1 + rng.below(6)).collect();
    let config = HeadConfig::new(input)
        .with_hidden(hidden)
        .with_dropout(0.0)
        .with_seed(rng.next_u64());
    let mut model = HeadModel::<f64>::init(config).unwrap();
    // non-zero biases so every parameter is exercised
    for layer in model.layers_mut() {
        for b in &mut layer.bias {
            *b = rng.uniform(-0.5, 0.5);
        }
    }
    let delta = [0.5, 1.0, 2.0][rng.below(3)];
    let (x, y) = loop {
        let x = random_vec(&mut rng, input, -1.0, 1.0);
        let y = rng.uniform(-2.0, 2.0);
        if clear_of_kinks(&model, &x, y, delta) {
            break (x, y);
        }
    };
    let cache = model.forward(&x, Mode::Train).unwrap();
    let (_, dloss) = huber_loss(y, cache.output, delta);
    let grads = model.backward(&cache, dloss).unwrap();
    let analytic: Vec<f64> = grads
        .slices()
        .iter()
        .flat_map(|s| s.iter().copied())
        .collect();

    let mut numeric = Vec::with_capacity(analytic.len());
    let mut probe = model.clone();
    let n_slices = probe.param_slices_mut().len();
    for s in 0..n_slices {
        let len = probe.param_slices_mut()[s].len();
        for i in 0..len {
            let orig = probe.param_slices_mut()[s][i];
            probe.param_slices_mut()[s][i] = orig + h;
            let up = loss_at(&probe, &x, y, delta);
            probe.param_slices_mut()[s][i] = orig - h;
            let down = loss_at(&probe, &x, y, delta);
            probe.param_slices_mut()[s][i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    let max_rel_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max);
    GradCheck {
        max_rel_error,
        params: analytic.len(),
    }
}

fn clear_of_kinks(model: &HeadModel<f64>, x: &[f64], y: f64, delta: f64) -> bool {
    let layers = model.layers();
    let mut a = x.to_vec();
    for layer in &layers[..layers.len() - 1] {
        let mut next = Vec::with_capacity(layer.outputs);
        for o in 0..layer.outputs {
            let mut z = layer.bias[o];
            for i in 0..layer.inputs {
                z += layer.weights[o * layer.inputs + i] * a[i];
            }
            if z.abs() < 1e-3 {
                return false;
            }
            next.push(z.max(0.0));
        }
        a = next;
    }
    let r = y - model.predict(x).unwrap();
    (r.abs() - delta).abs() > 1e-3
}
