//! Utility functions of the four agents and the FA/AA valuations that seed
//! the auction bids and asks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{self, Scenario};

/// Unit resource prices posted by the two leaders, with their caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceProfile {
    /// MA unit price `p_i`, currency/bit.
    pub ma: f64,
    /// FA unit price `p_j`, currency/bit.
    pub fa: f64,
    pub ma_cap: f64,
    pub fa_cap: f64,
}

impl PriceProfile {
    /// Build a cap-checked profile from scenario price caps.
    pub fn new(ma: f64, fa: f64, s: &Scenario) -> Result<Self> {
        let p = PriceProfile { ma, fa, ma_cap: s.price_cap_ma, fa_cap: s.price_cap_fa };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=self.ma_cap).contains(&self.ma) {
            return Err(Error::invalid("price.ma", format!("{} outside [0, {}]", self.ma, self.ma_cap)));
        }
        if !(0.0..=self.fa_cap).contains(&self.fa) {
            return Err(Error::invalid("price.fa", format!("{} outside [0, {}]", self.fa, self.fa_cap)));
        }
        Ok(())
    }
}

/// Which compute path carries the binding end-to-end latency.
///
/// The enum order doubles as the documented tie-break: on exact latency ties
/// the earlier variant wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LatencyCase {
    /// Upload plus MA local compute binds.
    MaCompute,
    /// Upload plus FA local compute binds.
    FaCompute,
    /// Upload, FA->AA hop, and AA compute bind.
    AaCompute,
}

impl LatencyCase {
    pub const ALL: [LatencyCase; 3] = [LatencyCase::MaCompute, LatencyCase::FaCompute, LatencyCase::AaCompute];
}

/// End-to-end latency under the assumption that `case` is the binding path.
pub fn case_latency(o: f64, case: LatencyCase, s: &Scenario) -> f64 {
    let d = market::total_delays(o, s);
    match case {
        LatencyCase::MaCompute => d.ma_total,
        LatencyCase::FaCompute => d.fa_total,
        LatencyCase::AaCompute => s.channel.t_up + d.aa_total,
    }
}

/// The actual binding latency and its case; ties break in enum order.
pub fn binding_latency(o: f64, s: &Scenario) -> (LatencyCase, f64) {
    let mut best = (LatencyCase::MaCompute, case_latency(o, LatencyCase::MaCompute, s));
    for case in [LatencyCase::FaCompute, LatencyCase::AaCompute] {
        let t = case_latency(o, case, s);
        if t > best.1 {
            best = (case, t);
        }
    }
    best
}

fn qoe(latency: f64, s: &Scenario) -> Result<f64> {
    let slack = 1.0 + s.wa.max_delay - latency;
    if slack <= 0.0 {
        return Err(Error::DeadlineInfeasible { latency, budget: 1.0 + s.wa.max_delay });
    }
    Ok(s.wa.qoe_weight * slack.ln() * (1.0 + s.wa.actuator_time / s.wa.max_delay).ln())
}

fn wa_utility_at_latency(o: f64, latency: f64, prices: &PriceProfile, s: &Scenario) -> Result<f64> {
    let w = s.workload;
    let energy = market::wa_transmission_energy(o, s)?;
    Ok(qoe(latency, s)?
        - o * w * prices.ma
        - (1.0 - o) * w * prices.fa
        - s.wa.energy_weight * energy)
}

/// WA utility: QoE reward minus both unit-price payments minus weighted
/// transmission energy, with the binding latency taken as the max over the
/// three compute paths.
pub fn wa_utility(o: f64, prices: &PriceProfile, s: &Scenario) -> Result<f64> {
    let (_, latency) = binding_latency(o, s);
    wa_utility_at_latency(o, latency, prices, s)
}

/// WA utility restricted to one latency case. This is the objective the
/// per-case follower analysis differentiates.
pub fn wa_utility_for_case(o: f64, case: LatencyCase, prices: &PriceProfile, s: &Scenario) -> Result<f64> {
    wa_utility_at_latency(o, case_latency(o, case, s), prices, s)
}

/// Mobility-adjusted reward price actually received by the MA per bit.
pub fn ma_reward_price(prices: &PriceProfile, s: &Scenario) -> Result<f64> {
    if s.density == 0.0 {
        return Err(Error::DivisionByZero { context: "ma_reward_price: density" });
    }
    let speed_span = s.speed_max - s.speed_min;
    if speed_span == 0.0 {
        return Err(Error::DivisionByZero { context: "ma_reward_price: speed bounds" });
    }
    let numerator = s.ma.idle_resources * s.density_max * (s.wa.speed - s.ma.speed).abs()
        + s.mobility_offset;
    let denominator = s.idle_max * s.density * speed_span;
    Ok(s.mobility_factor * numerator / denominator * prices.ma)
}

/// MA utility: mobility-adjusted revenue on its workload share minus weighted
/// compute energy.
pub fn ma_utility(o: f64, prices: &PriceProfile, s: &Scenario) -> Result<f64> {
    let reward = ma_reward_price(prices, s)?;
    let energies = market::compute_energies(o, s);
    Ok(o * s.workload * reward - s.ma.compute_cost * energies.ma)
}

/// FA utility: revenue on its share minus the payment forwarded to the AA
/// minus weighted compute and uplink energies.
pub fn fa_utility(o: f64, prices: &PriceProfile, r_payment: f64, s: &Scenario) -> Result<f64> {
    let energies = market::compute_energies(o, s);
    let (_, e_up) = market::fa_to_aa_power_and_energy(o, s)?;
    Ok((1.0 - o) * s.workload * prices.fa
        - r_payment
        - s.fa.compute_cost * energies.fa
        - s.fa.tx_cost * e_up)
}

/// Buyer-side valuation of delegating `w_k` bits to the AA: revenue at the FA
/// price minus a log delay penalty, clamped into [0, p_j * w_k].
pub fn fa_valuation(w_k: f64, prices: &PriceProfile, s: &Scenario) -> f64 {
    let delay = s.aa.compute.seconds_per_bit() * w_k;
    let v = prices.fa * w_k - s.fa.delay_penalty * (delay + 1.0).ln();
    v.max(0.0)
}

/// Seller-side valuation of computing `w_k` bits: weighted compute and hover
/// energy cost plus a quadratic delay term, clamped to at most p_j * w_k.
pub fn aa_valuation(w_k: f64, prices: &PriceProfile, s: &Scenario) -> f64 {
    let compute_cost = s.aa.compute_cost * s.aa.compute.joules_per_bit() * w_k;
    let hover_time = s.channel.t_k_up + s.aa.compute.seconds_per_bit() * w_k;
    let hover_cost = s.aa.tx_cost * hover_time * s.aa.hover_power;
    let fa_delay = s.fa.compute.seconds_per_bit() * w_k;
    let v = compute_cost + hover_cost + s.aa.delay_penalty * fa_delay * fa_delay;
    v.min(prices.fa * w_k)
}

/// Cost floor of the seller: weighted compute plus hover energy, without the
/// delay markup or revenue cap. Seeds the seller clock.
pub fn aa_cost_floor(w_k: f64, s: &Scenario) -> f64 {
    let compute_cost = s.aa.compute_cost * s.aa.compute.joules_per_bit() * w_k;
    let hover_time = s.channel.t_k_up + s.aa.compute.seconds_per_bit() * w_k;
    compute_cost + s.aa.tx_cost * hover_time * s.aa.hover_power
}

/// Profit-sharing payment from FA to AA: the psi-blend of bid and ask.
pub fn aa_payment(bid: f64, ask: f64, psi: f64) -> f64 {
    debug_assert!(psi > 0.0 && psi < 1.0, "profit share must lie in (0, 1)");
    psi * bid + (1.0 - psi) * ask
}
