//! Deterministic, seedable simulator and solver library for two-tier task
//! offloading markets: a Stackelberg pricing game among wireless/mobile/fixed
//! agents, a double Dutch auction between fixed and aerial agents, and a
//! diffusion-policy reinforcement-learning auctioneer with baselines, plus an
//! experiment harness behind the `offload-market` CLI.

pub mod dda;
pub mod drl;
pub mod error;
pub mod harness;
pub mod market;
pub mod stackelberg;
pub mod utility;

pub use error::{Error, Result};
pub use market::{loader, Scenario};
pub use utility::{LatencyCase, PriceProfile};
