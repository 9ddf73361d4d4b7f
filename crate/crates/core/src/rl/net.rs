//! Fully connected policy/value network with manual backpropagation.
//!
//! Layout of the flat parameter vector, row-major throughout: for each
//! hidden layer its weights `(out x in)` then biases, then the policy head
//! `(actions x hidden)` and biases, then the value head `(1 x hidden)` and
//! its bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet {
    input_dim: usize,
    hidden: Vec<usize>,
    actions: usize,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input followed by every hidden activation (post-ReLU).
    activations: Vec<Vec<f64>>,
    /// Hidden pre-activations.
    pre: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub value: f64,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Offsets of one dense layer inside the parameter vector.
#[derive(Clone, Copy, Debug)]
struct Dense {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

impl PolicyNet {
    /// He-uniform hidden layers; heads scaled down by 10x so the initial
    /// policy is near uniform.
    pub fn new(input_dim: usize, hidden: &[usize], actions: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden, actions)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = net.layers();
        let heads = layers.len() - 2;
        for (i, l) in layers.iter().enumerate() {
            let bound = if i < heads {
                (6.0 / l.fan_in as f64).sqrt()
            } else {
                0.1 / (l.fan_in as f64).sqrt()
            };
            for p in &mut net.params[l.w..l.w + l.fan_in * l.fan_out] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(input_dim: usize, hidden: &[usize], actions: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::domain("input_dim", "must be > 0"));
        }
        if actions < 2 {
            return Err(Error::domain("actions", "need at least two actions"));
        }
        if hidden.contains(&0) {
            return Err(Error::domain("hidden", "layer sizes must be > 0"));
        }
        let mut n = 0;
        let mut prev = input_dim;
        for &h in hidden {
            n += h * prev + h;
            prev = h;
        }
        n += actions * prev + actions + prev + 1;
        Ok(PolicyNet {
            input_dim,
            hidden: hidden.to_vec(),
            actions,
            params: vec![0.0; n],
        })
    }

    /// Rebuilds a network from a parameter vector in the documented layout.
    pub fn from_params(
        input_dim: usize,
        hidden: &[usize],
        actions: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden, actions)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Zeroes the policy head so every action is equally likely.
    pub fn zero_policy_head(&mut self) {
        let layers = self.layers();
        let head = layers[layers.len() - 2];
        self.params[head.w..head.b + head.fan_out].fill(0.0);
    }

    fn layers(&self) -> Vec<Dense> {
        let mut out = Vec::with_capacity(self.hidden.len() + 2);
        let mut off = 0;
        let mut prev = self.input_dim;
        let mut push = |fan_in: usize, fan_out: usize, off: &mut usize| {
            out.push(Dense {
                w: *off,
                b: *off + fan_in * fan_out,
                fan_in,
                fan_out,
            });
            *off += fan_in * fan_out + fan_out;
        };
        for &h in &self.hidden {
            push(prev, h, &mut off);
            prev = h;
        }
        push(prev, self.actions, &mut off);
        push(prev, 1, &mut off);
        out
    }

    fn dense(&self, l: Dense, x: &[f64]) -> Vec<f64> {
        let w = &self.params[l.w..l.b];
        let b = &self.params[l.b..l.b + l.fan_out];
        (0..l.fan_out)
            .map(|o| {
                let row = &w[o * l.fan_in..(o + 1) * l.fan_in];
                b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn forward_cached(&self, state: &[f64]) -> Result<ForwardCache> {
        if state.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: state.len(),
            });
        }
        let layers = self.layers();
        let n_hidden = self.hidden.len();
        let mut activations = Vec::with_capacity(n_hidden + 1);
        let mut pre = Vec::with_capacity(n_hidden);
        activations.push(state.to_vec());
        for l in &layers[..n_hidden] {
            let z = self.dense(*l, activations.last().expect("input present"));
            activations.push(z.iter().map(|v| v.max(0.0)).collect());
            pre.push(z);
        }
        let top = activations.last().expect("input present");
        let logits = self.dense(layers[n_hidden], top);
        let value = self.dense(layers[n_hidden + 1], top)[0];
        Ok(ForwardCache {
            probs: softmax(&logits),
            logits,
            value,
            activations,
            pre,
        })
    }

    /// Action probabilities and state value.
    pub fn forward(&self, state: &[f64]) -> Result<(Vec<f64>, f64)> {
        let c = self.forward_cached(state)?;
        Ok((c.probs, c.value))
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.forward_cached(state)?.value)
    }

    /// Accumulates into `grad` the parameter gradient of a loss whose
    /// derivatives w.r.t. the logits and the value are given.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &[f64], d_value: f64, grad: &mut [f64]) {
        let layers = self.layers();
        let n_hidden = self.hidden.len();
        let top = &cache.activations[n_hidden];
        let width = top.len();
        let mut d_top = vec![0.0; width];

        let head = layers[n_hidden];
        for (o, &g) in d_logits.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[head.b + o] += g;
            let row = head.w + o * width;
            for i in 0..width {
                grad[row + i] += g * top[i];
                d_top[i] += g * self.params[row + i];
            }
        }
        let vh = layers[n_hidden + 1];
        if d_value != 0.0 {
            grad[vh.b] += d_value;
            for i in 0..width {
                grad[vh.w + i] += d_value * top[i];
                d_top[i] += d_value * self.params[vh.w + i];
            }
        }

        let mut d_act = d_top;
        for li in (0..n_hidden).rev() {
            let l = layers[li];
            let input = &cache.activations[li];
            let dz: Vec<f64> = d_act
                .iter()
                .zip(&cache.pre[li])
                .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
                .collect();
            let mut d_in = vec![0.0; l.fan_in];
            for (o, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad[l.b + o] += g;
                let row = l.w + o * l.fan_in;
                for i in 0..l.fan_in {
                    grad[row + i] += g * input[i];
                    d_in[i] += g * self.params[row + i];
                }
            }
            d_act = d_in;
        }
    }

    /// Gradient of the state value w.r.t. every parameter.
    pub fn value_gradient(&self, state: &[f64]) -> Result<Vec<f64>> {
        let cache = self.forward_cached(state)?;
        let mut g = vec![0.0; self.params.len()];
        self.backward(&cache, &vec![0.0; self.actions], 1.0, &mut g);
        Ok(g)
    }

    /// Gradient of `log pi(action | state)` w.r.t. every parameter.
    pub fn log_prob_gradient(&self, state: &[f64], action: usize) -> Result<Vec<f64>> {
        let cache = self.forward_cached(state)?;
        let d: Vec<f64> = cache
            .probs
            .iter()
            .enumerate()
            .map(|(j, p)| if j == action { 1.0 - p } else { -p })
            .collect();
        let mut g = vec![0.0; self.params.len()];
        self.backward(&cache, &d, 0.0, &mut g);
        Ok(g)
    }

    pub fn log_prob(&self, state: &[f64], action: usize) -> Result<f64> {
        Ok(log_softmax(&self.forward_cached(state)?.logits)[action])
    }
}

/// Entropy of a distribution given as probabilities.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}
