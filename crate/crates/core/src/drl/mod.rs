//! Reinforcement-learning auctioneer: the auction MDP, the diffusion-policy
//! learner with twin critics, and the baseline policies it is compared
//! against.

pub mod agent;
pub mod baselines;
pub mod diffusion;
pub mod env;
pub mod nn;
pub mod ppo;
pub mod replay;

pub use agent::{
    actor_update, critic_update, denoise_action, soft_update, train, AgentConfig, Checkpoint,
    EpisodeStats, PolicyParams, TrainConfig,
};
pub use baselines::{baseline_policy, evaluate, run_episode, Auctioneer, PolicyKind};
pub use diffusion::{ChainNoise, Denoiser, DiffusionSchedule};
pub use env::{env_reset, ActionSpace, AuctionEnv, MarketConfig, MdpState, RewardWeights};
pub use ppo::{train_ppo, PpoAgent, PpoConfig};
pub use replay::{ReplayBuffer, Transition};
