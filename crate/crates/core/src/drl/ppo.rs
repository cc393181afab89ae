//! Clipped-surrogate policy-gradient baseline over the same auction MDP.
//!
//! On-policy: collects a batch of episodes with the current policy, computes
//! discounted returns and advantages against a learned state-value baseline,
//! then takes a few epochs of clipped policy and value steps.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::drl::agent::EpisodeStats;
use crate::drl::env::{ActionSpace, AuctionEnv, MarketConfig, RewardWeights};
use crate::drl::nn::{self, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub discount: f64,
    pub clip: f64,
    pub epochs: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Episodes rolled out per policy update.
    pub episodes_per_update: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            hidden: vec![16, 16],
            learning_rate: 3e-3,
            discount: 0.95,
            clip: 0.2,
            epochs: 4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            episodes_per_update: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpoAgent {
    pub policy: Mlp,
    pub value: Mlp,
    pub config: PpoConfig,
    #[serde(default)]
    opt_policy: crate::drl::nn::AdamState,
    #[serde(default)]
    opt_value: crate::drl::nn::AdamState,
}

impl PpoAgent {
    pub fn init(state_dim: usize, action_dim: usize, config: PpoConfig, rng: &mut impl Rng) -> Self {
        let mut policy_sizes = vec![state_dim];
        policy_sizes.extend_from_slice(&config.hidden);
        policy_sizes.push(action_dim);
        let mut value_sizes = vec![state_dim];
        value_sizes.extend_from_slice(&config.hidden);
        value_sizes.push(1);
        PpoAgent {
            policy: Mlp::new(&policy_sizes, rng),
            value: Mlp::new(&value_sizes, rng),
            config,
            opt_policy: Default::default(),
            opt_value: Default::default(),
        }
    }

    pub fn probs(&self, features: &[f64]) -> Vec<f64> {
        nn::softmax(&self.policy.forward(features))
    }

    pub fn sample_action(&self, features: &[f64], rng: &mut impl Rng) -> (usize, Vec<f64>) {
        let probs = self.probs(features);
        let draw: f64 = rng.random();
        let mut acc = 0.0;
        let mut action = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if draw < acc {
                action = i;
                break;
            }
        }
        (action, probs)
    }
}

struct Sample {
    features: Vec<f64>,
    action: usize,
    old_prob: f64,
    ret: f64,
    advantage: f64,
}

/// One clipped-surrogate update over collected samples. Returns the mean
/// policy loss of the final epoch.
fn update(agent: &mut PpoAgent, samples: &mut [Sample]) -> Result<f64> {
    // Advantage normalization stabilizes the tiny-batch regime.
    let n = samples.len() as f64;
    let mean_adv = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var_adv = samples.iter().map(|s| (s.advantage - mean_adv).powi(2)).sum::<f64>() / n;
    let std_adv = var_adv.sqrt().max(1e-8);
    for s in samples.iter_mut() {
        s.advantage = (s.advantage - mean_adv) / std_adv;
    }

    let clip = agent.config.clip;
    let mut last_loss = 0.0;
    for _ in 0..agent.config.epochs {
        let mut policy_grads = agent.policy.zero_grads();
        let mut value_grads = agent.value.zero_grads();
        let mut loss = 0.0;
        for s in samples.iter() {
            let (logits, cache) = agent.policy.forward_cached(&s.features);
            let probs = nn::softmax(&logits);
            let ratio = probs[s.action] / s.old_prob.max(1e-12);
            let unclipped = ratio * s.advantage;
            let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * s.advantage;
            let surrogate = unclipped.min(clipped);
            let ent = nn::entropy(&probs);
            loss += (-surrogate - agent.config.entropy_coef * ent) / n;

            // Gradient flows only while the unclipped branch is active.
            let clip_blocked = (s.advantage >= 0.0 && ratio > 1.0 + clip)
                || (s.advantage < 0.0 && ratio < 1.0 - clip);
            let mut grad_logits = vec![0.0; probs.len()];
            if !clip_blocked {
                for (i, gl) in grad_logits.iter_mut().enumerate() {
                    let indicator = if i == s.action { 1.0 } else { 0.0 };
                    *gl += -s.advantage * ratio * (indicator - probs[i]) / n;
                }
            }
            for (gl, ge) in grad_logits.iter_mut().zip(nn::entropy_grad(&probs)) {
                *gl += -agent.config.entropy_coef * ge / n;
            }
            agent.policy.backward(&cache, &grad_logits, &mut policy_grads);

            let (v, vcache) = agent.value.forward_cached(&s.features);
            let vdiff = v[0] - s.ret;
            loss += agent.config.value_coef * vdiff * vdiff / n;
            agent.value.backward(&vcache, &[agent.config.value_coef * 2.0 * vdiff / n], &mut value_grads);
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite { context: "ppo loss".into(), value: loss });
        }
        let lr = agent.config.learning_rate;
        let mut opt = std::mem::take(&mut agent.opt_policy);
        opt.step(&mut agent.policy, &policy_grads, lr);
        agent.opt_policy = opt;
        let mut opt = std::mem::take(&mut agent.opt_value);
        opt.step(&mut agent.value, &value_grads, lr);
        agent.opt_value = opt;
        last_loss = loss;
    }
    Ok(last_loss)
}

/// Train PPO for `episodes` episodes on markets sampled from the config.
/// Deterministic per seed.
pub fn train_ppo(
    episodes: usize,
    market: &MarketConfig,
    action_steps: &[f64],
    weights: RewardWeights,
    config: PpoConfig,
    seed: u64,
) -> Result<(PpoAgent, Vec<EpisodeStats>)> {
    market.validate()?;
    let actions = ActionSpace::new(action_steps.to_vec())?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut agent = PpoAgent::init(AuctionEnv::feature_dim(), actions.len(), config, &mut rng);
    let mut curve = Vec::with_capacity(episodes);
    let mut pending: Vec<Sample> = Vec::new();

    for episode in 0..episodes {
        let m = market.sample(&mut rng);
        let mut env = AuctionEnv::new(m, actions.clone(), weights)?;
        let state = env.mdp_state();
        let mut features = env.features(&state);
        let mut episode_reward = 0.0;
        let mut steps: Vec<(Vec<f64>, usize, f64, f64)> = Vec::new();
        loop {
            let (action, probs) = agent.sample_action(&features, &mut rng);
            let (next_state, reward, done) = env.step(action)?;
            episode_reward += reward;
            steps.push((features.clone(), action, probs[action], reward));
            features = env.features(&next_state);
            if done {
                break;
            }
        }
        // Discounted returns back to front.
        let mut ret = 0.0;
        for (feat, action, old_prob, reward) in steps.into_iter().rev() {
            ret = reward + agent.config.discount * ret;
            let baseline = agent.value.forward(&feat)[0];
            pending.push(Sample { advantage: ret - baseline, features: feat, action, old_prob, ret });
        }
        let outcome = env.outcome().expect("episode ended");
        curve.push(EpisodeStats {
            episode,
            reward: episode_reward,
            social_welfare: outcome.social_welfare,
            exchange_cost: outcome.exchange_cost,
            rounds: outcome.rounds_used,
            matched: outcome.matched_pairs,
        });

        if (episode + 1) % agent.config.episodes_per_update == 0 {
            update(&mut agent, &mut pending)?;
            pending.clear();
        }
    }
    Ok((agent, curve))
}
