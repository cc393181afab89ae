//! Denoising-diffusion machinery for the discrete-action policy.
//!
//! The forward process adds Gaussian noise over `H` steps following a fixed
//! variance schedule; the reverse process applies a learned noise predictor
//! step by step, conditioned on the environment state and the step index,
//! with the variance taken from the schedule (mean-only learning). The final
//! sample is softmax-projected onto the action set by the caller.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::drl::nn::{Mlp, MlpCache, MlpGrads};

/// Noise-variance schedule `iota_1..iota_H` with cached products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    pub betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl DiffusionSchedule {
    /// Linearly spaced schedule. `steps == 0` yields the degenerate chain
    /// that returns the seed noise unchanged.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Self {
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                if steps <= 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        assert!(betas.iter().all(|b| (0.0..1.0).contains(b)), "schedule must lie in (0, 1)");
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        DiffusionSchedule { betas, alphas, alpha_bars }
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// `alpha_bar_h` for 1-based step `h`.
    pub fn alpha_bar(&self, h: usize) -> f64 {
        self.alpha_bars[h - 1]
    }

    /// Closed-form forward marginal: `x_h | x_0 ~ N(sqrt(ab_h) x0, (1-ab_h) I)`.
    pub fn forward_marginal(&self, x0: &[f64], h: usize) -> (Vec<f64>, f64) {
        let ab = self.alpha_bar(h);
        (x0.iter().map(|v| ab.sqrt() * v).collect(), 1.0 - ab)
    }

    /// Draw one sample of `x_h | x_0` by iterating the single-step kernel
    /// `x_t = sqrt(1 - iota_t) x_{t-1} + sqrt(iota_t) eps_t`.
    pub fn forward_sample(&self, x0: &[f64], h: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut x = x0.to_vec();
        for t in 1..=h {
            let beta = self.betas[t - 1];
            for v in x.iter_mut() {
                let eps: f64 = rng.sample(StandardNormal);
                *v = (1.0 - beta).sqrt() * *v + beta.sqrt() * eps;
            }
        }
        x
    }
}

/// All Gaussian draws one reverse chain consumes, sampled up front so the
/// chain itself is a deterministic differentiable function of the denoiser
/// parameters (reparametrization).
#[derive(Debug, Clone)]
pub struct ChainNoise {
    /// Seed sample `x_H`.
    pub seed: Vec<f64>,
    /// Injection noise per reverse step `h = H..2`; the final step is
    /// noise-free. Empty when `H <= 1`.
    pub injections: Vec<Vec<f64>>,
}

impl ChainNoise {
    pub fn sample(action_dim: usize, steps: usize, rng: &mut impl Rng) -> Self {
        let seed = (0..action_dim).map(|_| rng.sample(StandardNormal)).collect();
        let injections = (0..steps.saturating_sub(1))
            .map(|_| (0..action_dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        ChainNoise { seed, injections }
    }

    /// Deterministic variant: zero seed and zero injections. Used for the
    /// critic bootstrap so targets do not jitter between updates.
    pub fn zeros(action_dim: usize, steps: usize) -> Self {
        ChainNoise {
            seed: vec![0.0; action_dim],
            injections: vec![vec![0.0; action_dim]; steps.saturating_sub(1)],
        }
    }
}

/// Noise-prediction network conditioned on the state features and the
/// normalized step index: input `[x, state, h/H]`, output one value per
/// action dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Denoiser {
    pub net: Mlp,
    pub action_dim: usize,
    pub state_dim: usize,
}

/// Forward-pass record of one reverse chain, kept for backprop.
pub struct ChainTrace {
    /// `x_H, x_{H-1}, ..., x_0`.
    pub xs: Vec<Vec<f64>>,
    caches: Vec<(Vec<f64>, MlpCache)>,
}

impl Denoiser {
    pub fn new(action_dim: usize, state_dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut sizes = vec![action_dim + state_dim + 1];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        Denoiser { net: Mlp::new(&sizes, rng), action_dim, state_dim }
    }

    fn net_input(&self, x: &[f64], state: &[f64], h: usize, total: usize) -> Vec<f64> {
        let mut input = Vec::with_capacity(self.action_dim + self.state_dim + 1);
        input.extend_from_slice(x);
        input.extend_from_slice(state);
        input.push(h as f64 / total.max(1) as f64);
        input
    }

    /// Run the reverse chain from the supplied noise, producing `x_0`.
    pub fn reverse_chain(
        &self,
        schedule: &DiffusionSchedule,
        state: &[f64],
        noise: &ChainNoise,
    ) -> ChainTrace {
        let steps = schedule.steps();
        let mut xs = vec![noise.seed.clone()];
        let mut caches = Vec::with_capacity(steps);
        let mut x = noise.seed.clone();
        for h in (1..=steps).rev() {
            let input = self.net_input(&x, state, h, steps);
            let (eps, cache) = self.net.forward_cached(&input);
            let beta = schedule.betas[h - 1];
            let a = 1.0 / (1.0 - beta).sqrt();
            let b = beta / (1.0 - schedule.alpha_bar(h)).sqrt();
            let sigma = if h > 1 { beta.sqrt() } else { 0.0 };
            let inject = if h > 1 { Some(&noise.injections[steps - h]) } else { None };
            let next: Vec<f64> = x
                .iter()
                .zip(&eps)
                .enumerate()
                .map(|(i, (xv, ev))| {
                    a * (xv - b * ev) + sigma * inject.map_or(0.0, |z| z[i])
                })
                .collect();
            caches.push((input, cache));
            xs.push(next.clone());
            x = next;
        }
        ChainTrace { xs, caches }
    }

    /// Final chain output `x_0`.
    pub fn sample_x0(&self, schedule: &DiffusionSchedule, state: &[f64], noise: &ChainNoise) -> Vec<f64> {
        self.reverse_chain(schedule, state, noise).xs.last().unwrap().clone()
    }

    /// Backpropagate dL/dx_0 through the whole chain, accumulating denoiser
    /// parameter gradients.
    pub fn chain_backward(
        &self,
        schedule: &DiffusionSchedule,
        trace: &ChainTrace,
        grad_x0: &[f64],
        grads: &mut MlpGrads,
    ) {
        let steps = schedule.steps();
        let mut grad = grad_x0.to_vec();
        // Walk the chain back: step index h goes 1..=H as we unwind.
        for (rev_idx, (_, cache)) in trace.caches.iter().enumerate().rev() {
            let h = steps - rev_idx;
            let beta = schedule.betas[h - 1];
            let a = 1.0 / (1.0 - beta).sqrt();
            let b = beta / (1.0 - schedule.alpha_bar(h)).sqrt();
            // x_{h-1} = a * (x_h - b * eps(x_h, ...)): push grad into eps, then x_h.
            let eps_grad: Vec<f64> = grad.iter().map(|g| -a * b * g).collect();
            let dinput = self.net.backward(cache, &eps_grad, grads);
            let mut next_grad = vec![0.0; self.action_dim];
            for i in 0..self.action_dim {
                next_grad[i] = a * grad[i] + dinput[i];
            }
            grad = next_grad;
        }
    }
}
