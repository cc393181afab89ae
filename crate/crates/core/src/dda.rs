//! Double Dutch auction between FA buyers and AA sellers.
//!
//! Two synchronized clocks: the buyer clock opens at the maximum bid value
//! and descends, the seller clock opens at the seller cost floor and ascends.
//! Each round either admits exactly one acceptor on the active side (then the
//! active side flips) or moves the active clock by the auctioneer's chosen
//! step. The run terminates the first time the buyer clock drops strictly
//! below the seller clock; matched winners then all trade at the blended
//! clearing price.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::Scenario;
use crate::utility::{self, PriceProfile};

/// Communication penalty per broadcast recipient on adjustment rounds.
pub const DEFAULT_EXCHANGE_COST_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Buyer,
    Seller,
}

/// One market participant with its private true value (a buyer's maximum
/// willingness to pay, or a seller's minimum acceptable price).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: usize,
    pub side: Side,
    pub true_value: f64,
}

/// A reusable market description: rosters, opening clocks, and pricing knobs.
/// Opening it yields a fresh [`AuctionState`]; the description itself never
/// mutates, so replays are cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Market {
    /// Buyer true values; participant ids are the indices.
    pub buyer_values: Vec<f64>,
    /// Seller true values; participant ids are the indices.
    pub seller_values: Vec<f64>,
    pub buyer_clock_start: f64,
    pub seller_clock_start: f64,
    /// Profit-share blend for the clearing price.
    pub psi: f64,
    /// Broadcast cost per recipient on adjustment rounds.
    pub exchange_cost_rate: f64,
}

/// Winner entry: the committed clock value and the regret logged at
/// acceptance time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Winner {
    pub id: usize,
    pub committed: f64,
    pub regret: f64,
}

/// What happened in one auction round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RoundEvent {
    Accepted { side: Side, actor: usize, committed: f64, regret: f64 },
    Adjusted { side: Side, step: f64, recipients: usize, cost: f64 },
}

/// Audit-log row emitted by [`AuctionState::step`]; serialized as JSON lines
/// by the harness and consumed by the learning environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRecord {
    pub t: usize,
    pub psi: u8,
    pub buyer_clock: f64,
    pub seller_clock: f64,
    #[serde(flatten)]
    pub outcome: RoundEvent,
}

/// The sequential auction state machine.
#[derive(Debug, Clone)]
pub struct AuctionState {
    buyers: Vec<Participant>,
    sellers: Vec<Participant>,
    active_side: Side,
    round: usize,
    buyer_clock: f64,
    seller_clock: f64,
    buyer_clock_start: f64,
    seller_clock_start: f64,
    buy_winners: Vec<Winner>,
    sell_winners: Vec<Winner>,
    exchange_cost_rate: f64,
    exchange_cost: f64,
    terminated: bool,
    /// Clock pair observed just before the crossing adjustment; feeds r*.
    pre_cross: Option<(f64, f64)>,
}

/// Final market outcome after the clocks cross.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketOutcome {
    pub clearing_price: f64,
    pub social_welfare: f64,
    pub matched_pairs: usize,
    /// Matched buyer (id, utility) pairs in admission order.
    pub buyer_utilities: Vec<(usize, f64)>,
    /// Matched seller (id, utility) pairs in admission order.
    pub seller_utilities: Vec<(usize, f64)>,
    /// Sum of all regrets logged during play, matched or not.
    pub total_regret: f64,
    pub exchange_cost: f64,
    pub rounds_used: usize,
}

impl Market {
    pub fn open(&self) -> Result<AuctionState> {
        if self.buyer_values.is_empty() || self.seller_values.is_empty() {
            return Err(Error::AuctionInvalid("both market sides must be nonempty".into()));
        }
        if self.buyer_clock_start < self.seller_clock_start {
            return Err(Error::AuctionInvalid(format!(
                "buyer clock {} opens below seller clock {}",
                self.buyer_clock_start, self.seller_clock_start
            )));
        }
        for v in self.buyer_values.iter().chain(&self.seller_values) {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::AuctionInvalid(format!("participant value {v} invalid")));
            }
        }
        let buyers = self
            .buyer_values
            .iter()
            .enumerate()
            .map(|(id, &true_value)| Participant { id, side: Side::Buyer, true_value })
            .collect();
        let sellers = self
            .seller_values
            .iter()
            .enumerate()
            .map(|(id, &true_value)| Participant { id, side: Side::Seller, true_value })
            .collect();
        Ok(AuctionState {
            buyers,
            sellers,
            active_side: Side::Buyer,
            round: 0,
            buyer_clock: self.buyer_clock_start,
            seller_clock: self.seller_clock_start,
            buyer_clock_start: self.buyer_clock_start,
            seller_clock_start: self.seller_clock_start,
            buy_winners: Vec::new(),
            sell_winners: Vec::new(),
            exchange_cost_rate: self.exchange_cost_rate,
            exchange_cost: 0.0,
            terminated: false,
            pre_cross: None,
        })
    }

    /// Upper bound on rounds for any step policy whose smallest step is
    /// `min_step`: clock travel plus one acceptance per participant plus the
    /// crossing round.
    pub fn round_bound(&self, min_step: f64) -> usize {
        let travel = (self.buyer_clock_start - self.seller_clock_start) / min_step;
        travel.ceil() as usize + self.buyer_values.len() + self.seller_values.len() + 1
    }
}

/// Opens a scenario-derived auction: the buyer clock starts at the FA's
/// revenue for the delegated workload, the seller clock at the AA's
/// energy-cost floor.
pub fn init_auction(
    buyers: Vec<Participant>,
    sellers: Vec<Participant>,
    w_k: f64,
    prices: &PriceProfile,
    s: &Scenario,
) -> Result<AuctionState> {
    let market = Market {
        buyer_values: {
            let mut v: Vec<(usize, f64)> = buyers.iter().map(|p| (p.id, p.true_value)).collect();
            v.sort_by_key(|(id, _)| *id);
            v.into_iter().map(|(_, b)| b).collect()
        },
        seller_values: {
            let mut v: Vec<(usize, f64)> = sellers.iter().map(|p| (p.id, p.true_value)).collect();
            v.sort_by_key(|(id, _)| *id);
            v.into_iter().map(|(_, b)| b).collect()
        },
        buyer_clock_start: prices.fa * w_k,
        seller_clock_start: utility::aa_cost_floor(w_k, s),
        psi: s.profit_share,
        exchange_cost_rate: DEFAULT_EXCHANGE_COST_RATE,
    };
    market.open()
}

impl AuctionState {
    pub fn active_side(&self) -> Side {
        self.active_side
    }
    pub fn round(&self) -> usize {
        self.round
    }
    pub fn buyer_clock(&self) -> f64 {
        self.buyer_clock
    }
    pub fn seller_clock(&self) -> f64 {
        self.seller_clock
    }
    pub fn clock_starts(&self) -> (f64, f64) {
        (self.buyer_clock_start, self.seller_clock_start)
    }
    pub fn terminated(&self) -> bool {
        self.terminated
    }
    pub fn buy_winners(&self) -> &[Winner] {
        &self.buy_winners
    }
    pub fn sell_winners(&self) -> &[Winner] {
        &self.sell_winners
    }
    pub fn exchange_cost(&self) -> f64 {
        self.exchange_cost
    }

    /// Pairs that would match if the auction cleared right now.
    pub fn matched_pairs_so_far(&self) -> usize {
        self.buy_winners.len().min(self.sell_winners.len())
    }

    /// Welfare of the currently matched prefix. The clearing price cancels
    /// out of the welfare sum, so this telescopes exactly to the final
    /// social welfare as acceptances accumulate.
    pub fn prospective_matched_welfare(&self) -> f64 {
        let matched = self.matched_pairs_so_far();
        self.buy_winners[..matched].iter().map(|w| w.committed).sum::<f64>()
            - self.sell_winners[..matched].iter().map(|w| w.committed).sum::<f64>()
    }

    fn is_winner(&self, side: Side, id: usize) -> bool {
        match side {
            Side::Buyer => self.buy_winners.iter().any(|w| w.id == id),
            Side::Seller => self.sell_winners.iter().any(|w| w.id == id),
        }
    }

    /// Count of available (not-yet-winning) participants on the active side;
    /// these are the recipients of a clock broadcast.
    pub fn active_listeners(&self) -> usize {
        match self.active_side {
            Side::Buyer => {
                self.buyers.iter().filter(|p| !self.is_winner(Side::Buyer, p.id)).count()
            }
            Side::Seller => {
                self.sellers.iter().filter(|p| !self.is_winner(Side::Seller, p.id)).count()
            }
        }
    }

    /// The participant that would accept the current clock, if any: the
    /// highest-value available buyer at or above the buyer clock, or the
    /// lowest-value available seller at or below the seller clock. Value ties
    /// break toward the smaller id.
    pub fn pending_acceptor(&self) -> Option<Participant> {
        match self.active_side {
            Side::Buyer => self
                .buyers
                .iter()
                .filter(|p| !self.is_winner(Side::Buyer, p.id) && p.true_value >= self.buyer_clock)
                .copied()
                .min_by(|a, b| {
                    b.true_value.partial_cmp(&a.true_value).unwrap().then(a.id.cmp(&b.id))
                }),
            Side::Seller => self
                .sellers
                .iter()
                .filter(|p| !self.is_winner(Side::Seller, p.id) && p.true_value <= self.seller_clock)
                .copied()
                .min_by(|a, b| {
                    a.true_value.partial_cmp(&b.true_value).unwrap().then(a.id.cmp(&b.id))
                }),
        }
    }

    /// Run one round: broadcast, acceptance (admitting at most one
    /// participant), or clock adjustment by `step_size`, then the crossing
    /// check.
    pub fn step(&mut self, step_size: f64) -> Result<RoundRecord> {
        if self.terminated {
            return Err(Error::AuctionTerminated { round: self.round });
        }
        if !(step_size > 0.0) {
            return Err(Error::invalid("step_size", "must be strictly positive"));
        }
        let t = self.round;
        let side = self.active_side;
        let clocks_before = (self.buyer_clock, self.seller_clock);

        let outcome = if let Some(acceptor) = self.pending_acceptor() {
            let (committed, regret) = match side {
                Side::Buyer => (self.buyer_clock, acceptor.true_value - self.buyer_clock),
                Side::Seller => (self.seller_clock, self.seller_clock - acceptor.true_value),
            };
            let winner = Winner { id: acceptor.id, committed, regret };
            match side {
                Side::Buyer => {
                    self.buy_winners.push(winner);
                    self.active_side = Side::Seller;
                }
                Side::Seller => {
                    self.sell_winners.push(winner);
                    self.active_side = Side::Buyer;
                }
            }
            RoundEvent::Accepted { side, actor: acceptor.id, committed, regret }
        } else {
            let recipients = self.active_listeners();
            let cost = self.exchange_cost_rate * recipients as f64;
            self.exchange_cost += cost;
            match side {
                Side::Buyer => self.buyer_clock -= step_size,
                Side::Seller => self.seller_clock += step_size,
            }
            RoundEvent::Adjusted { side, step: step_size, recipients, cost }
        };

        self.round += 1;
        if self.buyer_clock < self.seller_clock {
            self.terminated = true;
            self.pre_cross = Some(clocks_before);
        }
        Ok(RoundRecord {
            t,
            psi: match side {
                Side::Buyer => 0,
                Side::Seller => 1,
            },
            buyer_clock: self.buyer_clock,
            seller_clock: self.seller_clock,
            outcome,
        })
    }

    /// Clearing after termination: the first `min(|J_b|, |K_s|)` winners on
    /// each side match in admission order and all trade at
    /// `r* = psi * C_b^{T-1} + (1 - psi) * C_s^{T-1}`. Unmatched winners earn
    /// zero and are excluded from welfare.
    pub fn clear(&self, psi: f64) -> Result<MarketOutcome> {
        if !self.terminated {
            return Err(Error::AuctionOpen("clear() requires crossed clocks"));
        }
        let (c_b_pre, c_s_pre) = self.pre_cross.expect("terminated auctions carry pre-cross clocks");
        // Clamp guards the last-ulp rounding of the blend so matched
        // utilities stay sign-exact.
        let clearing_price = (psi * c_b_pre + (1.0 - psi) * c_s_pre).clamp(c_s_pre, c_b_pre);
        let matched = self.buy_winners.len().min(self.sell_winners.len());
        let buyer_utilities: Vec<(usize, f64)> = self.buy_winners[..matched]
            .iter()
            .map(|w| (w.id, w.committed - clearing_price))
            .collect();
        let seller_utilities: Vec<(usize, f64)> = self.sell_winners[..matched]
            .iter()
            .map(|w| (w.id, clearing_price - w.committed))
            .collect();
        let social_welfare = buyer_utilities.iter().map(|(_, u)| u).sum::<f64>()
            + seller_utilities.iter().map(|(_, u)| u).sum::<f64>();
        let total_regret = self
            .buy_winners
            .iter()
            .chain(&self.sell_winners)
            .map(|w| w.regret)
            .sum();
        Ok(MarketOutcome {
            clearing_price,
            social_welfare,
            matched_pairs: matched,
            buyer_utilities,
            seller_utilities,
            total_regret,
            exchange_cost: self.exchange_cost,
            rounds_used: self.round,
        })
    }
}

/// Runs a whole auction under a constant clock step and returns the outcome
/// with the audit trail.
pub fn run_fixed_step(market: &Market, step: f64) -> Result<(MarketOutcome, Vec<RoundRecord>)> {
    let mut state = market.open()?;
    let mut records = Vec::new();
    while !state.terminated() {
        records.push(state.step(step)?);
    }
    Ok((state.clear(market.psi)?, records))
}

/// Canonical truthfulness-demo market: a buyer with true value 41 and a
/// seller with true value 9, padded with a rival buyer and two rival sellers.
/// The spare seller at 21 sits one unit step above the truthful crossing
/// level, which is what punishes overstated asks.
pub fn fig8_market() -> Market {
    Market {
        buyer_values: vec![41.0, 30.0],
        seller_values: vec![20.0, 21.0, 9.0],
        buyer_clock_start: 50.0,
        seller_clock_start: 5.0,
        psi: 0.5,
        exchange_cost_rate: DEFAULT_EXCHANGE_COST_RATE,
    }
}

/// Property report from replaying a market once per probe bid.
#[derive(Debug, Clone, Serialize)]
pub struct IcReport {
    pub probe_side: Side,
    pub probe_id: usize,
    pub true_value: f64,
    /// (reported bid, probe utility against its true value) per grid point.
    pub curve: Vec<(f64, f64)>,
    /// Maximum-utility bid; ties resolve toward the true value.
    pub argmax_bid: f64,
    pub truthful_utility: f64,
    /// True when no deviation beats truthful reporting.
    pub ic_holds: bool,
    /// Smallest realized matched-winner utility across every replay.
    pub min_winner_utility: f64,
}

/// Replays the full auction once per grid bid with the probe reporting that
/// bid instead of its true value. The probe's utility is always measured
/// against its true value: `true_value - r*` (buyer) or `r* - true_value`
/// (seller) when matched, zero otherwise.
pub fn verify_ir_ic(
    market: &Market,
    probe_side: Side,
    probe_id: usize,
    bid_grid: &[f64],
    step: f64,
) -> Result<IcReport> {
    let true_value = match probe_side {
        Side::Buyer => market.buyer_values.get(probe_id),
        Side::Seller => market.seller_values.get(probe_id),
    }
    .copied()
    .ok_or_else(|| Error::invalid("probe_id", "no such participant"))?;

    let mut curve = Vec::with_capacity(bid_grid.len());
    let mut min_winner_utility = f64::INFINITY;
    for &bid in bid_grid {
        let mut replay = market.clone();
        match probe_side {
            Side::Buyer => replay.buyer_values[probe_id] = bid,
            Side::Seller => replay.seller_values[probe_id] = bid,
        }
        let (outcome, _) = run_fixed_step(&replay, step)?;
        for (_, u) in outcome.buyer_utilities.iter().chain(&outcome.seller_utilities) {
            min_winner_utility = min_winner_utility.min(*u);
        }
        let r = outcome.clearing_price;
        let probe_utility = match probe_side {
            Side::Buyer => outcome
                .buyer_utilities
                .iter()
                .find(|(id, _)| *id == probe_id)
                .map(|_| true_value - r),
            Side::Seller => outcome
                .seller_utilities
                .iter()
                .find(|(id, _)| *id == probe_id)
                .map(|_| r - true_value),
        }
        .unwrap_or(0.0);
        curve.push((bid, probe_utility));
    }

    let best_utility = curve.iter().map(|(_, u)| *u).fold(f64::NEG_INFINITY, f64::max);
    let argmax_bid = curve
        .iter()
        .filter(|(_, u)| *u == best_utility)
        .map(|(b, _)| *b)
        .min_by(|a, b| {
            let da = (a - true_value).abs();
            let db = (b - true_value).abs();
            da.partial_cmp(&db).unwrap().then(a.partial_cmp(b).unwrap())
        })
        .unwrap_or(true_value);
    let truthful = run_fixed_step(market, step)?.0;
    let truthful_utility = match probe_side {
        Side::Buyer => truthful
            .buyer_utilities
            .iter()
            .find(|(id, _)| *id == probe_id)
            .map(|_| true_value - truthful.clearing_price),
        Side::Seller => truthful
            .seller_utilities
            .iter()
            .find(|(id, _)| *id == probe_id)
            .map(|_| truthful.clearing_price - true_value),
    }
    .unwrap_or(0.0);
    let ic_holds = curve.iter().all(|(_, u)| *u <= truthful_utility + 1e-12);
    Ok(IcReport {
        probe_side,
        probe_id,
        true_value,
        curve,
        argmax_bid,
        truthful_utility,
        ic_holds,
        min_winner_utility,
    })
}

/// Exhaustively enumerates step-index sequences (branching only on
/// adjustment rounds, where the choice matters) up to `round_cap` rounds and
/// returns the terminating trajectory with maximal social welfare, if any.
pub fn enumerate_max_social_welfare(
    market: &Market,
    action_set: &[f64],
    round_cap: usize,
) -> Result<Option<(f64, Vec<usize>)>> {
    fn dfs(
        state: &AuctionState,
        market: &Market,
        actions: &[f64],
        cap: usize,
        trace: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) -> Result<()> {
        if state.terminated() {
            let sw = state.clear(market.psi)?.social_welfare;
            if best.as_ref().map_or(true, |(b, _)| sw > *b) {
                *best = Some((sw, trace.clone()));
            }
            return Ok(());
        }
        if trace.len() == cap {
            return Ok(());
        }
        // On acceptance rounds every action leads to the same state.
        let branches = if state.pending_acceptor().is_some() { 1 } else { actions.len() };
        for idx in 0..branches {
            let mut next = state.clone();
            next.step(actions[idx])?;
            trace.push(idx);
            dfs(&next, market, actions, cap, trace, best)?;
            trace.pop();
        }
        Ok(())
    }

    if action_set.is_empty() {
        return Err(Error::invalid("action_set", "must be nonempty"));
    }
    let state = market.open()?;
    let mut best = None;
    dfs(&state, market, action_set, round_cap, &mut Vec::new(), &mut best)?;
    Ok(best)
}

/// Replays an action-index sequence through the engine.
pub fn replay_sequence(market: &Market, action_set: &[f64], sequence: &[usize]) -> Result<MarketOutcome> {
    let mut state = market.open()?;
    for &idx in sequence {
        state.step(action_set[idx])?;
    }
    if !state.terminated() {
        return Err(Error::AuctionOpen("replayed sequence did not reach termination"));
    }
    state.clear(market.psi)
}
