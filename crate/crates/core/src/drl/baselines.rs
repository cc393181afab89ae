//! Auctioneer policies under one interface: the trained diffusion policy,
//! the PPO baseline, and the non-learning references (greedy, random,
//! fixed-step DDA).

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::drl::agent::{denoise_action, mean_action_probabilities, EpisodeStats, PolicyParams};
use crate::drl::env::{ActionSpace, AuctionEnv, MarketConfig, RewardWeights};
use crate::drl::ppo::PpoAgent;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Diffusion,
    Ppo,
    Greedy,
    Random,
    FixedDda,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] =
        [PolicyKind::Diffusion, PolicyKind::Ppo, PolicyKind::Greedy, PolicyKind::Random, PolicyKind::FixedDda];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Diffusion => "diffusion",
            PolicyKind::Ppo => "ppo",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Random => "random",
            PolicyKind::FixedDda => "fixed_dda",
        }
    }

    pub fn parse(name: &str) -> Option<PolicyKind> {
        PolicyKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// A step-selection policy over the auction MDP.
pub enum Auctioneer {
    Diffusion(Box<PolicyParams>),
    /// Deterministic deployment mode: argmax of the zero-noise denoising
    /// chain's action distribution.
    DiffusionGreedy(Box<PolicyParams>),
    Ppo(Box<PpoAgent>),
    /// Always the largest step: fastest clock motion.
    Greedy,
    /// Uniform over the action set.
    Random,
    /// Constant configured step index (the traditional single-speed DDA).
    Fixed(usize),
}

impl Auctioneer {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Auctioneer::Diffusion(_) | Auctioneer::DiffusionGreedy(_) => PolicyKind::Diffusion,
            Auctioneer::Ppo(_) => PolicyKind::Ppo,
            Auctioneer::Greedy => PolicyKind::Greedy,
            Auctioneer::Random => PolicyKind::Random,
            Auctioneer::Fixed(_) => PolicyKind::FixedDda,
        }
    }

    pub fn act(&self, features: &[f64], n_actions: usize, rng: &mut impl Rng) -> usize {
        match self {
            Auctioneer::Diffusion(params) => denoise_action(features, params, rng).0,
            Auctioneer::DiffusionGreedy(params) => {
                let probs = mean_action_probabilities(features, params);
                probs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            }
            Auctioneer::Ppo(agent) => agent.sample_action(features, rng).0,
            Auctioneer::Greedy => n_actions - 1,
            Auctioneer::Random => rng.random_range(0..n_actions),
            Auctioneer::Fixed(idx) => (*idx).min(n_actions - 1),
        }
    }
}

/// Build a non-learning baseline. `fixed_step_index` picks the constant step
/// for the traditional-DDA reference (index 0, the smallest step, matches
/// its single-speed clock narrative).
pub fn baseline_policy(kind: PolicyKind, fixed_step_index: usize) -> Option<Auctioneer> {
    match kind {
        PolicyKind::Greedy => Some(Auctioneer::Greedy),
        PolicyKind::Random => Some(Auctioneer::Random),
        PolicyKind::FixedDda => Some(Auctioneer::Fixed(fixed_step_index)),
        PolicyKind::Diffusion | PolicyKind::Ppo => None,
    }
}

/// Play one episode to termination and report its stats.
pub fn run_episode(env: &mut AuctionEnv, policy: &Auctioneer, rng: &mut impl Rng) -> Result<EpisodeStats> {
    let mut state = env.reset();
    let mut reward = 0.0;
    loop {
        let features = env.features(&state);
        let action = policy.act(&features, env.actions.len(), rng);
        let (next, r, done) = env.step(action)?;
        reward += r;
        state = next;
        if done {
            break;
        }
    }
    let outcome = env.outcome().expect("episode ended");
    Ok(EpisodeStats {
        episode: 0,
        reward,
        social_welfare: outcome.social_welfare,
        exchange_cost: outcome.exchange_cost,
        rounds: outcome.rounds_used,
        matched: outcome.matched_pairs,
    })
}

/// Evaluate a policy over markets sampled from the config, one episode per
/// seed offset. Deterministic per (config, seed).
pub fn evaluate(
    policy: &Auctioneer,
    market: &MarketConfig,
    actions: &ActionSpace,
    weights: RewardWeights,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeStats>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let m = market.sample(&mut rng);
        let mut env = AuctionEnv::new(m, actions.clone(), weights)?;
        let mut stats = run_episode(&mut env, policy, &mut rng)?;
        stats.episode = episode;
        out.push(stats);
    }
    Ok(out)
}
