//! The auction wrapped as a Markov decision process for the auctioneer.
//!
//! The state is the six-component tuple (active side, round, both clocks,
//! winner counts); the action picks a clock step from a finite ordered set;
//! the reward penalizes regret on acceptance rounds and broadcast cost on
//! adjustment rounds, and pays out welfare and match count on termination
//! (or incrementally, behind the per-step attribution flag).

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dda::{AuctionState, Market, MarketOutcome, RoundEvent, DEFAULT_EXCHANGE_COST_RATE};
use crate::error::{Error, Result};

/// The auctioneer's observation: exactly the six tuple components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdpState {
    pub flag: u8,
    pub round: usize,
    pub buyer_clock: f64,
    pub seller_clock: f64,
    pub n_buy_winners: usize,
    pub n_sell_winners: usize,
}

/// Ordered clock-step menu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub steps: Vec<f64>,
}

impl ActionSpace {
    pub fn new(steps: Vec<f64>) -> Result<Self> {
        if steps.len() < 2 {
            return Err(Error::invalid("action_space", "need at least two steps"));
        }
        if !steps.windows(2).all(|w| w[0] < w[1]) || steps[0] <= 0.0 {
            return Err(Error::invalid("action_space", "steps must be positive and strictly increasing"));
        }
        Ok(ActionSpace { steps })
    }

    /// Default menu scaled to the opening spread: `{0.25, 0.5, 1, 2} * spread / 40`.
    pub fn default_for_spread(spread: f64) -> Self {
        let unit = spread / 40.0;
        ActionSpace { steps: vec![0.25 * unit, 0.5 * unit, unit, 2.0 * unit] }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Reward blend `r = regret_weight * R + welfare_weight * SW + match_weight * NUM`,
/// with the cost of one broadcast folded into `R` on adjustment rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub regret_weight: f64,
    pub welfare_weight: f64,
    pub match_weight: f64,
    /// When true (default), welfare and match count pay out only on the
    /// terminal transition; when false they are attributed incrementally as
    /// matches form (both schedules sum to the same episode total).
    pub terminal_only: bool,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { regret_weight: 1.0, welfare_weight: 1.0, match_weight: 0.5, terminal_only: true }
    }
}

/// Randomized-market family: participant counts and value ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub n_buyers: usize,
    pub n_sellers: usize,
    pub buyer_value_min: f64,
    pub buyer_value_max: f64,
    pub seller_value_min: f64,
    pub seller_value_max: f64,
    pub buyer_clock_start: f64,
    pub seller_clock_start: f64,
    pub psi: f64,
    pub exchange_cost_rate: f64,
}

impl MarketConfig {
    /// Oracle-sized default: 3x3 participants with an opening spread of 5,
    /// so every trajectory under the desk action set terminates within the
    /// 12-round enumeration horizon.
    pub fn desk_default() -> Self {
        MarketConfig {
            n_buyers: 3,
            n_sellers: 3,
            buyer_value_min: 10.0,
            buyer_value_max: 12.0,
            seller_value_min: 7.0,
            seller_value_max: 8.5,
            buyer_clock_start: 12.0,
            seller_clock_start: 7.0,
            psi: 0.5,
            exchange_cost_rate: DEFAULT_EXCHANGE_COST_RATE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_buyers == 0 || self.n_sellers == 0 {
            return Err(Error::invalid("market_config", "participant counts must be positive"));
        }
        if self.buyer_value_min > self.buyer_value_max || self.seller_value_min > self.seller_value_max {
            return Err(Error::invalid("market_config", "value ranges inverted"));
        }
        if self.buyer_clock_start < self.seller_clock_start {
            return Err(Error::invalid("market_config", "clock starts inverted"));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Market {
        let draw = |lo: f64, hi: f64, rng: &mut dyn rand::RngCore| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        };
        Market {
            buyer_values: (0..self.n_buyers)
                .map(|_| draw(self.buyer_value_min, self.buyer_value_max, rng))
                .collect(),
            seller_values: (0..self.n_sellers)
                .map(|_| draw(self.seller_value_min, self.seller_value_max, rng))
                .collect(),
            buyer_clock_start: self.buyer_clock_start,
            seller_clock_start: self.seller_clock_start,
            psi: self.psi,
            exchange_cost_rate: self.exchange_cost_rate,
        }
    }
}

/// One auction episode exposed through the MDP interface.
#[derive(Debug, Clone)]
pub struct AuctionEnv {
    pub market: Market,
    pub actions: ActionSpace,
    pub weights: RewardWeights,
    state: AuctionState,
    round_bound: usize,
    outcome: Option<MarketOutcome>,
    welfare_paid: f64,
    matches_paid: usize,
}

impl AuctionEnv {
    pub fn new(market: Market, actions: ActionSpace, weights: RewardWeights) -> Result<Self> {
        let state = market.open()?;
        let round_bound = market.round_bound(actions.steps[0]);
        Ok(AuctionEnv { market, actions, weights, state, round_bound, outcome: None, welfare_paid: 0.0, matches_paid: 0 })
    }

    /// Reopen the same market for a fresh episode.
    pub fn reset(&mut self) -> MdpState {
        self.state = self.market.open().expect("market validated at construction");
        self.outcome = None;
        self.welfare_paid = 0.0;
        self.matches_paid = 0;
        self.mdp_state()
    }

    pub fn mdp_state(&self) -> MdpState {
        MdpState {
            flag: match self.state.active_side() {
                crate::dda::Side::Buyer => 0,
                crate::dda::Side::Seller => 1,
            },
            round: self.state.round(),
            buyer_clock: self.state.buyer_clock(),
            seller_clock: self.state.seller_clock(),
            n_buy_winners: self.state.buy_winners().len(),
            n_sell_winners: self.state.sell_winners().len(),
        }
    }

    /// Normalized feature vector for the function approximators. Clocks map
    /// through the opening spread (invertible given the opening pair).
    pub fn features(&self, s: &MdpState) -> Vec<f64> {
        let (b0, s0) = self.state.clock_starts();
        let spread = (b0 - s0).max(f64::MIN_POSITIVE);
        vec![
            s.flag as f64,
            s.round as f64 / self.round_bound as f64,
            (s.buyer_clock - s0) / spread,
            (s.seller_clock - s0) / spread,
            s.n_buy_winners as f64 / self.market.buyer_values.len() as f64,
            s.n_sell_winners as f64 / self.market.seller_values.len() as f64,
        ]
    }

    pub fn feature_dim() -> usize {
        6
    }

    pub fn done(&self) -> bool {
        self.state.terminated()
    }

    pub fn outcome(&self) -> Option<&MarketOutcome> {
        self.outcome.as_ref()
    }

    pub fn round_bound(&self) -> usize {
        self.round_bound
    }

    /// Apply one auctioneer action. Errors if the episode already ended.
    pub fn step(&mut self, action: usize) -> Result<(MdpState, f64, bool)> {
        if self.state.terminated() {
            return Err(Error::AuctionTerminated { round: self.state.round() });
        }
        if action >= self.actions.len() {
            return Err(Error::invalid("action", format!("index {action} out of range")));
        }
        let record = self.state.step(self.actions.steps[action])?;
        let broadcast_term = match record.outcome {
            RoundEvent::Accepted { regret, .. } => -regret,
            RoundEvent::Adjusted { cost, .. } => -cost,
        };
        let mut reward = self.weights.regret_weight * broadcast_term;

        let done = self.state.terminated();
        if !self.weights.terminal_only {
            let welfare_now = self.state.prospective_matched_welfare();
            let matches_now = self.state.matched_pairs_so_far();
            reward += self.weights.welfare_weight * (welfare_now - self.welfare_paid)
                + self.weights.match_weight * (matches_now - self.matches_paid) as f64;
            self.welfare_paid = welfare_now;
            self.matches_paid = matches_now;
        }
        if done {
            let outcome = self.state.clear(self.market.psi)?;
            if self.weights.terminal_only {
                reward += self.weights.welfare_weight * outcome.social_welfare
                    + self.weights.match_weight * outcome.matched_pairs as f64;
            }
            self.outcome = Some(outcome);
        }
        if !reward.is_finite() {
            return Err(Error::NonFinite { context: "env reward".into(), value: reward });
        }
        Ok((self.mdp_state(), reward, done))
    }
}

/// Fresh episode on a market drawn from the config, deterministic per seed.
pub fn env_reset(
    config: &MarketConfig,
    actions: ActionSpace,
    weights: RewardWeights,
    seed: u64,
) -> Result<(AuctionEnv, MdpState)> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let market = config.sample(&mut rng);
    let env = AuctionEnv::new(market, actions, weights)?;
    let state = env.mdp_state();
    Ok((env, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_actions() -> ActionSpace {
        ActionSpace::new(vec![1.0, 2.0, 4.0]).unwrap()
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        let cfg = MarketConfig::desk_default();
        let (env_a, s_a) = env_reset(&cfg, desk_actions(), RewardWeights::default(), 42).unwrap();
        let (env_b, s_b) = env_reset(&cfg, desk_actions(), RewardWeights::default(), 42).unwrap();
        assert_eq!(env_a.market, env_b.market);
        assert_eq!(s_a, s_b);
        let (env_c, _) = env_reset(&cfg, desk_actions(), RewardWeights::default(), 43).unwrap();
        assert_ne!(env_a.market, env_c.market);
    }

    #[test]
    fn sampled_values_respect_ranges() {
        let cfg = MarketConfig::desk_default();
        for seed in 0..100 {
            let (env, _) = env_reset(&cfg, desk_actions(), RewardWeights::default(), seed).unwrap();
            for v in &env.market.buyer_values {
                assert!((cfg.buyer_value_min..cfg.buyer_value_max).contains(v));
            }
            for v in &env.market.seller_values {
                assert!((cfg.seller_value_min..cfg.seller_value_max).contains(v));
            }
        }
    }

    #[test]
    fn minimal_market_resets() {
        let cfg = MarketConfig { n_buyers: 1, n_sellers: 1, ..MarketConfig::desk_default() };
        let (env, state) = env_reset(&cfg, desk_actions(), RewardWeights::default(), 7).unwrap();
        assert_eq!(state.round, 0);
        assert_eq!(state.flag, 0);
        assert_eq!(env.market.buyer_values.len(), 1);
    }

    #[test]
    fn adjustment_reward_is_broadcast_cost() {
        // Clock far above every buyer: first step must be an adjustment that
        // charges rate x listeners.
        let market = Market {
            buyer_values: vec![1.0, 1.0, 1.0, 1.0],
            seller_values: vec![1.0],
            buyer_clock_start: 60.0,
            seller_clock_start: 1.0,
            psi: 0.5,
            exchange_cost_rate: 0.01,
        };
        let mut env = AuctionEnv::new(market, desk_actions(), RewardWeights::default()).unwrap();
        let (_, reward, done) = env.step(1).unwrap();
        assert!(!done);
        assert!((reward - (-0.04)).abs() < 1e-15, "{reward}");
    }

    #[test]
    fn acceptance_reward_is_negative_regret() {
        let market = Market {
            buyer_values: vec![41.0],
            seller_values: vec![1.0],
            buyer_clock_start: 42.0,
            seller_clock_start: 1.0,
            psi: 0.5,
            exchange_cost_rate: 0.01,
        };
        let mut env = AuctionEnv::new(market, ActionSpace::new(vec![1.0, 50.0]).unwrap(), RewardWeights::default()).unwrap();
        env.step(0).unwrap(); // adjust 42 -> 41
        let (_, reward, _) = env.step(0).unwrap(); // buyer accepts, regret 0
        assert_eq!(reward, 0.0);
    }

    #[test]
    fn terminal_reward_includes_welfare_and_matches() {
        let market = Market {
            buyer_values: vec![40.0],
            seller_values: vec![8.0],
            buyer_clock_start: 40.0,
            seller_clock_start: 10.0,
            psi: 0.5,
            exchange_cost_rate: 0.0,
        };
        let actions = ActionSpace::new(vec![1.0, 40.0]).unwrap();
        let run = |weights: RewardWeights| -> (f64, f64) {
            let mut env = AuctionEnv::new(market.clone(), actions.clone(), weights).unwrap();
            let mut total = 0.0;
            let mut last = 0.0;
            loop {
                let (_, r, done) = env.step(1).unwrap();
                total += r;
                last = r;
                if done {
                    break;
                }
            }
            (total, last)
        };
        let (total_terminal, last_terminal) = run(RewardWeights::default());
        let (total_stepwise, _) = run(RewardWeights { terminal_only: false, ..Default::default() });
        // Same episode total under either attribution.
        assert!((total_terminal - total_stepwise).abs() < 1e-12);
        // Terminal transition carries welfare + 0.5 * matches.
        let mut env = AuctionEnv::new(market.clone(), actions.clone(), RewardWeights::default()).unwrap();
        loop {
            let (_, _, done) = env.step(1).unwrap();
            if done {
                break;
            }
        }
        let out = env.outcome().unwrap();
        assert!((last_terminal - (out.social_welfare + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn stepping_finished_episode_errors() {
        let market = Market {
            buyer_values: vec![1.0],
            seller_values: vec![100.0],
            buyer_clock_start: 2.0,
            seller_clock_start: 1.0,
            psi: 0.5,
            exchange_cost_rate: 0.01,
        };
        let mut env = AuctionEnv::new(market, desk_actions(), RewardWeights::default()).unwrap();
        while !env.done() {
            env.step(2).unwrap();
        }
        assert!(matches!(env.step(0), Err(Error::AuctionTerminated { .. })));
    }
}
