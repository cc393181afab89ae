//! Multi-leader (MA, FA) / single-follower (WA) pricing game.
//!
//! Backward induction: for fixed leader prices the follower's utility is
//! strictly concave in the offloading ratio on each latency case, so its best
//! response is a threshold rule plus a bisection on the closed-form first
//! derivative. Leaders then run a linear price search against that response,
//! and the equilibrium loop alternates the two searches until prices stop
//! moving.
//!
//! Concavity is a checked assumption, not a silent one: the bisection scans
//! its bracket and reports a violation, and the search wrapper falls back to
//! a plain grid argmax in that regime.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::Scenario;
use crate::utility::{self, LatencyCase, PriceProfile};

/// Outcome of the follower analysis at fixed prices for one latency case.
#[derive(Debug, Clone, Copy)]
pub struct FollowerAnalysis {
    pub case: LatencyCase,
    /// Classification threshold on `p_j - p_i` for this case.
    pub threshold: f64,
    /// Derivative of the follower utility at `o = 0`.
    pub derivative_at_zero: f64,
    /// Maximizing offloading ratio in [0, 1].
    pub o_star: f64,
    /// True when `o_star` is an interior stationary point rather than a
    /// threshold/clamp corner.
    pub interior: bool,
}

/// Which leader is optimizing its price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leader {
    Ma,
    Fa,
}

/// Follower model used by the solver: the analysis of one forced latency
/// case, or the true binding-case utility (max of the three latencies).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseMode {
    Forced(LatencyCase),
    Auto,
}

/// One leader-search outcome: best price, the utility it earns there, and the
/// follower response it induces.
#[derive(Debug, Clone, Copy)]
pub struct LeaderSearchResult {
    pub price: f64,
    pub utility: f64,
    pub o_star: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub price_ma: f64,
    pub price_fa: f64,
    pub o_star: f64,
}

/// Converged (or best-so-far) equilibrium of the pricing game.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub prices: PriceProfile,
    pub o_star: f64,
    pub wa_utility: f64,
    pub ma_utility: f64,
    pub fa_utility: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

/// Solver knobs with the documented defaults: price step `cap/200`,
/// bisection tolerance 1e-6, convergence tolerance 1e-4, 200 iterations.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Price-grid step as a fraction of each leader's cap.
    pub price_steps: usize,
    pub bisect_tol: f64,
    pub convergence_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { price_steps: 200, bisect_tol: 1e-6, convergence_tol: 1e-4, max_iters: 200 }
    }
}

/// Binding latency case at a given ratio; ties break toward the earlier case.
pub fn select_binding_case(o: f64, s: &Scenario) -> LatencyCase {
    utility::binding_latency(o, s).0
}

/// `ln(1 + t_n / eps_n)`, the QoE factor shared by every derivative term.
fn qoe_log(s: &Scenario) -> f64 {
    (1.0 + s.wa.actuator_time / s.wa.max_delay).ln()
}

/// Energy term of dU/do: `zeta * n_B * W * 2^B * ln2 / w_B * (1/g_nj - 1/g_ni)`
/// with `B = o W / (w_B t_up)`.
fn energy_derivative_term(o: f64, s: &Scenario) -> f64 {
    let ch = &s.channel;
    let b = o * s.workload / (ch.bandwidth_wa * ch.t_up);
    s.wa.energy_weight * ch.noise_wa * s.workload * b.exp2() * std::f64::consts::LN_2
        / ch.bandwidth_wa
        * (1.0 / ch.gain_wa_fa - 1.0 / ch.gain_wa_ma)
}

/// QoE slack denominator `1 + eps_n - t_case(o)` for each case.
fn case_denominator(o: f64, case: LatencyCase, s: &Scenario) -> f64 {
    1.0 + s.wa.max_delay - utility::case_latency(o, case, s)
}

/// Closed-form dU_n/do for one latency case.
///
/// Case 1 trades QoE away as `o` grows (the MA path lengthens); cases 2 and 3
/// gain QoE with `o` (the FA/AA paths shorten). The price and energy terms
/// are case-independent.
pub fn follower_derivative(
    o: f64,
    case: LatencyCase,
    prices: &PriceProfile,
    s: &Scenario,
) -> Result<f64> {
    let den = case_denominator(o, case, s);
    if den <= 0.0 {
        return Err(Error::DeadlineInfeasible {
            latency: utility::case_latency(o, case, s),
            budget: 1.0 + s.wa.max_delay,
        });
    }
    let w = s.workload;
    let log_term = qoe_log(s);
    let qoe = match case {
        LatencyCase::MaCompute => {
            let rate = s.ma.compute.seconds_per_bit();
            -s.wa.qoe_weight * w * rate * log_term / den
        }
        LatencyCase::FaCompute => {
            let rate = (1.0 - s.alpha) * s.fa.compute.seconds_per_bit();
            s.wa.qoe_weight * w * rate * log_term / den
        }
        LatencyCase::AaCompute => {
            let rate = s.alpha * s.aa.compute.seconds_per_bit();
            s.wa.qoe_weight * w * rate * log_term / den
        }
    };
    Ok(qoe + (prices.fa - prices.ma) * w + energy_derivative_term(o, s))
}

/// Classification threshold `P` on the price gap: the case's derivative at
/// `o = 0` equals `((p_j - p_i) - P) * W_n`, so demand exists exactly when
/// the gap exceeds `P`.
pub fn follower_threshold(case: LatencyCase, s: &Scenario) -> Result<f64> {
    let den0 = case_denominator(0.0, case, s);
    if den0 <= 0.0 {
        return Err(Error::DeadlineInfeasible {
            latency: utility::case_latency(0.0, case, s),
            budget: 1.0 + s.wa.max_delay,
        });
    }
    let ch = &s.channel;
    let channel = s.wa.energy_weight * ch.noise_wa * std::f64::consts::LN_2 / ch.bandwidth_wa
        * (1.0 / ch.gain_wa_ma - 1.0 / ch.gain_wa_fa);
    let log_term = qoe_log(s);
    let qoe = match case {
        LatencyCase::MaCompute => s.wa.qoe_weight * s.ma.compute.seconds_per_bit() * log_term / den0,
        LatencyCase::FaCompute => {
            -s.wa.qoe_weight * (1.0 - s.alpha) * s.fa.compute.seconds_per_bit() * log_term / den0
        }
        LatencyCase::AaCompute => {
            -s.wa.qoe_weight * s.alpha * s.aa.compute.seconds_per_bit() * log_term / den0
        }
    };
    Ok(qoe + channel)
}

/// Largest ratio at which the case stays inside the deadline, shaved slightly
/// off the wall so log arguments stay positive.
fn feasible_upper(case: LatencyCase, s: &Scenario) -> f64 {
    // Only case 1's latency grows with o; cases 2/3 relax as o rises.
    if case != LatencyCase::MaCompute {
        return 1.0;
    }
    let rate = s.ma.compute.seconds_per_bit() * s.workload;
    if rate <= 0.0 {
        return 1.0;
    }
    let wall = (1.0 + s.wa.max_delay - s.channel.t_up) / rate;
    (wall * (1.0 - 1e-9)).min(1.0)
}

fn derivative_for_mode(o: f64, mode: CaseMode, prices: &PriceProfile, s: &Scenario) -> Result<f64> {
    match mode {
        CaseMode::Forced(case) => follower_derivative(o, case, prices, s),
        CaseMode::Auto => follower_derivative(o, select_binding_case(o, s), prices, s),
    }
}

fn upper_for_mode(mode: CaseMode, s: &Scenario) -> f64 {
    match mode {
        CaseMode::Forced(case) => feasible_upper(case, s),
        // The binding latency includes case 1, so its wall limits the bracket.
        CaseMode::Auto => feasible_upper(LatencyCase::MaCompute, s),
    }
}

fn bisect_descending(
    mode: CaseMode,
    prices: &PriceProfile,
    s: &Scenario,
    tol: f64,
    hi: f64,
) -> Result<(f64, bool)> {
    // Concavity guard: the derivative must be nonincreasing on the bracket.
    const SCAN: usize = 8;
    let mut prev = f64::INFINITY;
    let mut prev_o = 0.0;
    for i in 0..=SCAN {
        let o = hi * i as f64 / SCAN as f64;
        let d = derivative_for_mode(o, mode, prices, s)?;
        let slack = 1e-9 * (1.0 + prev.abs());
        if d > prev + slack {
            return Err(Error::ConcavityViolation { at: o, prev: prev_o, next: d });
        }
        prev = d;
        prev_o = o;
    }

    if derivative_for_mode(hi, mode, prices, s)? >= 0.0 {
        // Stationary point beyond the bracket: clamp (min(1, o_e) rule).
        return Ok((hi, false));
    }
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if derivative_for_mode(mid, mode, prices, s)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), true))
}

/// Follower best response for one forced latency case: threshold rule at the
/// lower bound, bisection of the derivative sign change otherwise.
pub fn best_response_bisection(
    case: LatencyCase,
    prices: &PriceProfile,
    s: &Scenario,
    tol: f64,
) -> Result<FollowerAnalysis> {
    assert!(tol > 0.0, "bisection tolerance must be positive");
    let threshold = follower_threshold(case, s)?;
    let derivative_at_zero = follower_derivative(0.0, case, prices, s)?;
    // The boundary gap == P sits on the closed lower branch.
    if prices.fa - prices.ma <= threshold {
        return Ok(FollowerAnalysis { case, threshold, derivative_at_zero, o_star: 0.0, interior: false });
    }
    let (o_star, interior) =
        bisect_descending(CaseMode::Forced(case), prices, s, tol, feasible_upper(case, s))?;
    Ok(FollowerAnalysis { case, threshold, derivative_at_zero, o_star, interior })
}

/// Follower best response against the true binding latency. The utility is
/// the min of three concave per-case utilities, hence concave; the bisection
/// walks its subderivative, re-selecting the binding case at every probe.
pub fn best_response_auto(prices: &PriceProfile, s: &Scenario, tol: f64) -> Result<FollowerAnalysis> {
    assert!(tol > 0.0);
    let case0 = select_binding_case(0.0, s);
    let threshold = follower_threshold(case0, s)?;
    let derivative_at_zero = follower_derivative(0.0, case0, prices, s)?;
    if derivative_at_zero <= 0.0 {
        return Ok(FollowerAnalysis { case: case0, threshold, derivative_at_zero, o_star: 0.0, interior: false });
    }
    let (o_star, interior) =
        bisect_descending(CaseMode::Auto, prices, s, tol, upper_for_mode(CaseMode::Auto, s))?;
    Ok(FollowerAnalysis {
        case: select_binding_case(o_star, s),
        threshold,
        derivative_at_zero,
        o_star,
        interior,
    })
}

fn case_utility(o: f64, mode: CaseMode, prices: &PriceProfile, s: &Scenario) -> Result<f64> {
    match mode {
        CaseMode::Forced(case) => utility::wa_utility_for_case(o, case, prices, s),
        CaseMode::Auto => utility::wa_utility(o, prices, s),
    }
}

/// Grid argmax of the follower utility; the fallback when the concavity
/// assumption fails.
fn grid_best_response(mode: CaseMode, prices: &PriceProfile, s: &Scenario) -> Result<FollowerAnalysis> {
    let hi = upper_for_mode(mode, s);
    let n = 1000;
    let mut best = (0.0, case_utility(0.0, mode, prices, s)?);
    for i in 1..=n {
        let o = hi * i as f64 / n as f64;
        let u = case_utility(o, mode, prices, s)?;
        if u > best.1 {
            best = (o, u);
        }
    }
    let case = match mode {
        CaseMode::Forced(case) => case,
        CaseMode::Auto => select_binding_case(best.0, s),
    };
    Ok(FollowerAnalysis {
        case,
        threshold: follower_threshold(case, s)?,
        derivative_at_zero: follower_derivative(0.0, case, prices, s)?,
        o_star: best.0,
        interior: false,
    })
}

/// Best response under either case mode, with the grid fallback wired in.
pub fn best_response(mode: CaseMode, prices: &PriceProfile, s: &Scenario, tol: f64) -> Result<FollowerAnalysis> {
    let attempt = match mode {
        CaseMode::Forced(case) => best_response_bisection(case, prices, s, tol),
        CaseMode::Auto => best_response_auto(prices, s, tol),
    };
    match attempt {
        Err(Error::ConcavityViolation { .. }) => grid_best_response(mode, prices, s),
        other => other,
    }
}

/// FA -> AA payment induced by the current split: the psi-blend of the two
/// valuations at the delegated workload.
pub fn induced_aa_payment(o: f64, prices: &PriceProfile, s: &Scenario) -> f64 {
    let w_k = s.aa_workload(o);
    let bid = utility::fa_valuation(w_k, prices, s);
    let ask = utility::aa_valuation(w_k, prices, s);
    utility::aa_payment(bid, ask, s.profit_share)
}

fn leader_utility(who: Leader, o: f64, prices: &PriceProfile, s: &Scenario) -> Result<f64> {
    match who {
        Leader::Ma => utility::ma_utility(o, prices, s),
        Leader::Fa => utility::fa_utility(o, prices, induced_aa_payment(o, prices, s), s),
    }
}

/// Linear price search for one leader holding the other's price fixed.
///
/// Scans `[0, cap]` at the grid step, runs the follower best response per
/// candidate, and keeps the argmax of the leader's utility among candidates
/// the follower actually accepts (nonnegative WA utility). Ties go to the
/// lowest price; if nothing improves on zero, the result is price 0 with
/// utility 0 (no trade).
pub fn leader_price_search(
    fixed_other_price: f64,
    who: Leader,
    mode: CaseMode,
    s: &Scenario,
    opts: &SolverOptions,
) -> Result<LeaderSearchResult> {
    let cap = match who {
        Leader::Ma => s.price_cap_ma,
        Leader::Fa => s.price_cap_fa,
    };
    let delta = cap / opts.price_steps as f64;
    let mut best = LeaderSearchResult { price: 0.0, utility: 0.0, o_star: 0.0 };
    for i in 0..=opts.price_steps {
        let candidate = (i as f64 * delta).min(cap);
        let prices = match who {
            Leader::Ma => PriceProfile::new(candidate, fixed_other_price, s)?,
            Leader::Fa => PriceProfile::new(fixed_other_price, candidate, s)?,
        };
        let response = best_response(mode, &prices, s, opts.bisect_tol)?;
        // Follower participation: a split that leaves the WA with negative
        // utility never gets uploaded in the first place.
        if case_utility(response.o_star, mode, &prices, s)? < 0.0 {
            continue;
        }
        let u = leader_utility(who, response.o_star, &prices, s)?;
        if u > best.utility {
            best = LeaderSearchResult { price: candidate, utility: u, o_star: response.o_star };
        }
    }
    Ok(best)
}

/// Iterative best response over the two leaders (MA first, then FA) until
/// both price deltas drop below the convergence tolerance.
pub fn iterate_equilibrium(s: &Scenario, mode: CaseMode, opts: &SolverOptions) -> Result<EquilibriumResult> {
    assert!(opts.max_iters >= 1);
    let mut price_ma = s.price_cap_ma / 2.0;
    let mut price_fa = s.price_cap_fa / 2.0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last = LeaderSearchResult { price: price_fa, utility: 0.0, o_star: 0.0 };
    let mut ma_best = LeaderSearchResult { price: price_ma, utility: 0.0, o_star: 0.0 };

    for iter in 1..=opts.max_iters {
        iterations = iter;
        ma_best = leader_price_search(price_fa, Leader::Ma, mode, s, opts)?;
        let fa_best = leader_price_search(ma_best.price, Leader::Fa, mode, s, opts)?;
        let delta_ma = (ma_best.price - price_ma).abs();
        let delta_fa = (fa_best.price - price_fa).abs();
        price_ma = ma_best.price;
        price_fa = fa_best.price;
        last = fa_best;
        trace.push(TracePoint { iteration: iter, price_ma, price_fa, o_star: fa_best.o_star });
        if delta_ma <= opts.convergence_tol && delta_fa <= opts.convergence_tol {
            converged = true;
            break;
        }
    }

    let prices = PriceProfile::new(price_ma, price_fa, s)?;
    let o_star = last.o_star;
    let wa_u = case_utility(o_star, mode, &prices, s)?;
    Ok(EquilibriumResult {
        prices,
        o_star,
        wa_utility: wa_u,
        ma_utility: ma_best.utility,
        fa_utility: last.utility,
        iterations,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::loader::desk_scenario;

    fn prices(s: &Scenario, ma: f64, fa: f64) -> PriceProfile {
        PriceProfile::new(ma, fa, s).unwrap()
    }

    #[test]
    fn derivative_cancels_under_symmetry() {
        let mut s = desk_scenario();
        s.channel.gain_wa_fa = s.channel.gain_wa_ma;
        s.wa.qoe_weight = 0.0;
        let p = prices(&s, 2.5, 2.5);
        for case in LatencyCase::ALL {
            for o in [0.0, 0.3, 0.8] {
                let d = follower_derivative(o, case, &p, &s).unwrap();
                assert!(d.abs() < 1e-12, "{case:?} o={o}: {d}");
            }
        }
    }

    #[test]
    fn derivative_matches_threshold_identity_at_zero() {
        // d/do at o=0 must equal ((p_j - p_i) - P) * W for each case.
        let s = desk_scenario();
        for (ma, fa) in [(0.0, 6.0), (3.0, 2.0), (5.0, 5.0)] {
            let p = prices(&s, ma, fa);
            for case in LatencyCase::ALL {
                let d0 = follower_derivative(0.0, case, &p, &s).unwrap();
                let threshold = follower_threshold(case, &s).unwrap();
                let expected = ((fa - ma) - threshold) * s.workload;
                assert!(
                    (d0 - expected).abs() <= 1e-9 * (1.0 + expected.abs()),
                    "{case:?}: {d0} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let s = desk_scenario();
        let p = prices(&s, 2.0, 6.0);
        let h = 1e-6;
        for case in LatencyCase::ALL {
            for o in [0.1, 0.3, 0.55, 0.8] {
                let up = utility::wa_utility_for_case(o + h, case, &p, &s).unwrap();
                let down = utility::wa_utility_for_case(o - h, case, &p, &s).unwrap();
                let fd = (up - down) / (2.0 * h);
                let an = follower_derivative(o, case, &p, &s).unwrap();
                let rel = (fd - an).abs() / an.abs().max(1.0);
                assert!(rel <= 1e-4, "{case:?} o={o}: fd={fd} analytic={an}");
            }
        }
    }

    #[test]
    fn threshold_equal_gains_examples() {
        let mut s = desk_scenario();
        s.channel.gain_wa_fa = s.channel.gain_wa_ma;
        // Channel term vanishes; case 1 reduces to the pure QoE expression.
        let p1 = follower_threshold(LatencyCase::MaCompute, &s).unwrap();
        let expected = s.wa.qoe_weight * s.ma.compute.seconds_per_bit()
            * (1.0 + s.wa.actuator_time / s.wa.max_delay).ln()
            / (1.0 + s.wa.max_delay - s.channel.t_up);
        assert!((p1 - expected).abs() < 1e-12);
        s.wa.qoe_weight = 0.0;
        for case in LatencyCase::ALL {
            assert_eq!(follower_threshold(case, &s).unwrap(), 0.0);
        }
    }

    #[test]
    fn best_response_threshold_rule() {
        let s = desk_scenario();
        let p1 = follower_threshold(LatencyCase::MaCompute, &s).unwrap();
        // Just below the threshold: no offloading.
        let p = prices(&s, 0.0, (p1 - 0.05).max(0.0));
        let fa = best_response_bisection(LatencyCase::MaCompute, &p, &s, 1e-6).unwrap();
        assert_eq!(fa.o_star, 0.0);
        assert!(!fa.interior);
    }

    #[test]
    fn best_response_clamps_at_corner() {
        // Case 2 with a huge price gap pushes the stationary point past 1.
        let mut s = desk_scenario();
        s.wa.energy_weight = 0.0; // remove the exponential brake
        let p = prices(&s, 0.0, 8.0);
        let fa = best_response_bisection(LatencyCase::FaCompute, &p, &s, 1e-6).unwrap();
        assert_eq!(fa.o_star, 1.0);
        assert!(!fa.interior);
    }

    #[test]
    fn best_response_interior_stationarity() {
        let s = desk_scenario();
        let p = prices(&s, 3.0, 6.0);
        let tol = 1e-6;
        let fa = best_response_bisection(LatencyCase::FaCompute, &p, &s, tol).unwrap();
        assert!(fa.interior, "expected interior optimum, got {fa:?}");
        let d = follower_derivative(fa.o_star, LatencyCase::FaCompute, &p, &s).unwrap();
        // |d(o*)| bounded by tol times the local derivative slope.
        let h = 1e-4;
        let slope = (follower_derivative(fa.o_star + h, LatencyCase::FaCompute, &p, &s).unwrap()
            - follower_derivative(fa.o_star - h, LatencyCase::FaCompute, &p, &s).unwrap())
            / (2.0 * h);
        assert!(d.abs() <= 10.0 * tol * slope.abs(), "d={d} slope={slope}");
    }

    #[test]
    fn binding_case_selection() {
        let mut s = desk_scenario();
        // o=1: every path collapses to its bare slot except the MA's.
        assert_eq!(select_binding_case(1.0, &s), LatencyCase::MaCompute);
        // alpha=0 with an arbitrarily slow AA never yields case 3.
        s.alpha = 0.0;
        s.aa.compute.cpu_speed = 1e-3;
        for i in 0..=20 {
            let o = i as f64 / 20.0;
            assert_ne!(select_binding_case(o, &s), LatencyCase::AaCompute, "o={o}");
        }
    }

    #[test]
    fn binding_case_tie_break() {
        // Dyadic constants make the MA and AA paths collide exactly at
        // o = 0.75: both latencies equal 1.25 s, and case 1 wins the tie.
        let mut s = desk_scenario();
        s.workload = 128.0;
        s.alpha = 1.0;
        s.channel.t_up = 0.5;
        s.channel.t_k_up = 0.5;
        s.channel.t_k_up_max = 0.5;
        s.ma.compute.cycles_per_bit = 1.0;
        s.ma.compute.cpu_speed = 128.0; // 1/128 s/bit: ma_total = 0.5 + o
        s.aa.compute.cycles_per_bit = 1.0;
        s.aa.compute.cpu_speed = 128.0; // aa path = 1.0 + (1 - o)
        let d = crate::market::total_delays(0.75, &s);
        assert_eq!(d.ma_total, s.channel.t_up + d.aa_total);
        assert_eq!(select_binding_case(0.75, &s), LatencyCase::MaCompute);
    }

    #[test]
    fn leader_search_no_demand_returns_zero() {
        let mut s = desk_scenario();
        // Crank the QoE penalty so P1 exceeds any feasible price gap, then
        // force case 1 so demand never materializes.
        s.ma.compute.cpu_speed = 2e6;
        let res = leader_price_search(
            0.5,
            Leader::Ma,
            CaseMode::Forced(LatencyCase::MaCompute),
            &s,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!((res.price, res.utility, res.o_star), (0.0, 0.0, 0.0));
    }

    #[test]
    fn leader_search_matches_refined_grid() {
        let s = desk_scenario();
        let opts = SolverOptions::default();
        let coarse = leader_price_search(6.0, Leader::Ma, CaseMode::Auto, &s, &opts).unwrap();
        let fine = leader_price_search(
            6.0,
            Leader::Ma,
            CaseMode::Auto,
            &s,
            &SolverOptions { price_steps: 2000, ..opts },
        )
        .unwrap();
        let delta = s.price_cap_ma / 200.0;
        assert!(
            (coarse.price - fine.price).abs() <= delta + 1e-12,
            "coarse {} vs fine {}",
            coarse.price,
            fine.price
        );
        assert!(fine.utility >= coarse.utility - 1e-9);
    }

    #[test]
    fn equilibrium_trivial_tolerance_stops_after_one_iteration() {
        let s = desk_scenario();
        let opts = SolverOptions { convergence_tol: f64::INFINITY, ..Default::default() };
        let eq = iterate_equilibrium(&s, CaseMode::Auto, &opts).unwrap();
        assert_eq!(eq.iterations, 1);
        assert!(eq.converged);
        assert_eq!(eq.trace.len(), 1);
    }

    #[test]
    fn equilibrium_converges_on_desk_scenario() {
        let s = desk_scenario();
        let eq = iterate_equilibrium(&s, CaseMode::Auto, &SolverOptions::default()).unwrap();
        assert!(eq.converged, "no convergence in {} iterations", eq.iterations);
        assert!(eq.iterations <= 50);
        assert!(eq.prices.check().is_ok());
        assert!((0.0..=1.0).contains(&eq.o_star));
        assert!(eq.wa_utility >= 0.0);
        assert!(eq.ma_utility >= 0.0);
        assert!(eq.fa_utility >= 0.0);
    }
}
