//! Minimal dense network with hand-rolled backprop.
//!
//! Networks here are tiny (tens of parameters for gradient checks, a few
//! hundred in training), so a tape autodiff would be overkill: each layer
//! caches its input and pre-activations on the forward pass and replays the
//! chain rule on the backward pass. Hidden layers are tanh, the output layer
//! is linear.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer forward cache: the layer input and its post-activation output.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
    activations: Vec<Vec<f64>>,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Fresh network with layer widths `sizes[0] -> ... -> sizes.last()`,
    /// uniform Xavier-style init.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let scale = (6.0 / (n_in + n_out) as f64).sqrt();
                Dense {
                    weights: (0..n_in * n_out).map(|_| rng.random_range(-scale..scale)).collect(),
                    biases: vec![0.0; n_out],
                    inputs: n_in,
                    outputs: n_out,
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        assert_eq!(x.len(), self.input_dim(), "input width mismatch");
        let mut cache = MlpCache { inputs: Vec::with_capacity(self.layers.len()), activations: Vec::with_capacity(self.layers.len()) };
        let mut current = x.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            cache.inputs.push(current.clone());
            let last = li + 1 == self.layers.len();
            let mut out = Vec::with_capacity(layer.outputs);
            for o in 0..layer.outputs {
                let mut z = layer.biases[o];
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, v) in row.iter().zip(&current) {
                    z += w * v;
                }
                out.push(if last { z } else { z.tanh() });
            }
            cache.activations.push(out.clone());
            current = out;
        }
        (current, cache)
    }

    /// Backpropagate `grad_out` (dL/doutput), accumulating parameter
    /// gradients into `grads` and returning dL/dinput.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64], grads: &mut MlpGrads) -> Vec<f64> {
        let mut upstream = grad_out.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let last = li + 1 == self.layers.len();
            let input = &cache.inputs[li];
            let output = &cache.activations[li];
            // dL/dz: linear output passes through, tanh uses 1 - y^2.
            let dz: Vec<f64> = if last {
                upstream.clone()
            } else {
                upstream.iter().zip(output).map(|(g, y)| g * (1.0 - y * y)).collect()
            };
            let mut dinput = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                grads.biases[li][o] += dz[o];
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let grow = &mut grads.weights[li][o * layer.inputs..(o + 1) * layer.inputs];
                for i in 0..layer.inputs {
                    grow[i] += dz[o] * input[i];
                    dinput[i] += row[i] * dz[o];
                }
            }
            upstream = dinput;
        }
        upstream
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// Plain SGD step `w -= lr * g`.
    pub fn apply_gradients(&mut self, grads: &MlpGrads, lr: f64) {
        for (li, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.weights.iter_mut().zip(&grads.weights[li]) {
                *w -= lr * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(&grads.biases[li]) {
                *b -= lr * g;
            }
        }
    }

    /// `self = tau * online + (1 - tau) * self`, elementwise.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        for (mine, theirs) in self.layers.iter_mut().zip(&online.layers) {
            for (t, o) in mine.weights.iter_mut().zip(&theirs.weights) {
                *t = tau * o + (1.0 - tau) * *t;
            }
            for (t, o) in mine.biases.iter_mut().zip(&theirs.biases) {
                *t = tau * o + (1.0 - tau) * *t;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut idx = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[idx..idx + nw]);
            idx += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[idx..idx + nb]);
            idx += nb;
        }
        assert_eq!(idx, flat.len(), "flat parameter width mismatch");
    }
}

impl MlpGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().flatten().chain(self.biases.iter_mut().flatten()) {
            *v *= factor;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .chain(self.biases.iter().flatten())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Adam moment buffers for one network.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    /// One Adam step on the flattened parameters.
    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads, lr: f64) {
        let g = grads.flat();
        if self.m.len() != g.len() {
            self.m = vec![0.0; g.len()];
            self.v = vec![0.0; g.len()];
            self.t = 0;
        }
        self.t += 1;
        let mut params = net.params_flat();
        let bias1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bias2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..g.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
        net.set_params_flat(&params);
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Shannon entropy of a probability vector.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Gradient of `f = sum_a probs[a] * coeffs[a]` with respect to the logits:
/// `df/dlogit_i = probs[i] * (coeffs[i] - f)`.
pub fn softmax_expectation_grad(probs: &[f64], coeffs: &[f64]) -> Vec<f64> {
    let f: f64 = probs.iter().zip(coeffs).map(|(p, c)| p * c).sum();
    probs.iter().zip(coeffs).map(|(p, c)| p * (c - f)).collect()
}

/// Gradient of the entropy with respect to the logits:
/// `dH/dlogit_i = -probs[i] * (ln probs[i] + H)`.
pub fn entropy_grad(probs: &[f64]) -> Vec<f64> {
    let h = entropy(probs);
    probs.iter().map(|p| if *p > 0.0 { -p * (p.ln() + h) } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn finite_diff<F: Fn(&[f64]) -> f64>(f: F, point: &[f64], eps: f64) -> Vec<f64> {
        let mut grads = Vec::with_capacity(point.len());
        let mut p = point.to_vec();
        for i in 0..point.len() {
            p[i] = point[i] + eps;
            let up = f(&p);
            p[i] = point[i] - eps;
            let down = f(&p);
            p[i] = point[i];
            grads.push((up - down) / (2.0 * eps));
        }
        grads
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let net = Mlp::new(&[3, 4, 2], &mut rng);
        let x = [0.3, -0.7, 1.1];
        // Scalar loss: sum of squared outputs.
        let loss_at = |flat: &[f64]| {
            let mut m = net.clone();
            m.set_params_flat(flat);
            m.forward(&x).iter().map(|y| y * y).sum::<f64>()
        };
        let (out, cache) = net.forward_cached(&x);
        let mut grads = net.zero_grads();
        let grad_out: Vec<f64> = out.iter().map(|y| 2.0 * y).collect();
        net.backward(&cache, &grad_out, &mut grads);
        let analytic = grads.flat();
        let numeric = finite_diff(loss_at, &net.params_flat(), 1e-6);
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!((a - n).abs() <= 1e-6 * (1.0 + n.abs()), "{a} vs {n}");
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let net = Mlp::new(&[2, 3, 1], &mut rng);
        let x = [0.5, -0.2];
        let (out, cache) = net.forward_cached(&x);
        let mut grads = net.zero_grads();
        let dinput = net.backward(&cache, &[1.0], &mut grads);
        let f = |p: &[f64]| net.forward(p)[0];
        let numeric = finite_diff(f, &x, 1e-6);
        for (a, n) in dinput.iter().zip(&numeric) {
            assert!((a - n).abs() <= 1e-7 * (1.0 + n.abs()), "{a} vs {n} (out={out:?})");
        }
    }

    #[test]
    fn soft_update_blends_elementwise() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let online = Mlp::new(&[2, 2], &mut rng);
        let mut target = Mlp::new(&[2, 2], &mut rng);
        let before = target.params_flat();
        target.soft_update_from(&online, 0.25);
        for ((t, b), o) in target.params_flat().iter().zip(&before).zip(&online.params_flat()) {
            assert!((t - (0.25 * o + 0.75 * b)).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_is_simplex_valued() {
        let p = softmax(&[1e3, -1e3, 0.0, 5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| *v >= 0.0));
        let uniform = softmax(&[0.7, 0.7, 0.7]);
        for v in uniform {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}
