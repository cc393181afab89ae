//! Agent, channel, and scenario parameters, plus the transmission-power,
//! transmission-energy, latency, and compute-energy closed forms they induce.
//!
//! All quantities are normalized at load time to SI-ish base units: bits,
//! hertz, watts, joules, seconds. Everything here is a pure function of an
//! immutable [`Scenario`], so the whole module is safe to call concurrently.

pub mod loader;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents of `2^x` above this raise [`Error::ExponentOverflow`] instead of
/// returning infinity. Workloads quoted in Mbits over kHz bandwidth produce
/// astronomically large powers; the guard makes that misconfiguration loud.
pub const EXPONENT_GUARD: f64 = 1024.0;

/// Channel and slot-timing constants shared by one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Bandwidth of the WA-to-MA/FA links, Hz.
    pub bandwidth_wa: f64,
    /// Noise power on the WA-side links, W.
    pub noise_wa: f64,
    /// Bandwidth of the FA-to-AA link, Hz.
    pub bandwidth_fa_aa: f64,
    /// Noise power on the FA-to-AA link, W.
    pub noise_fa_aa: f64,
    /// Channel gain WA -> MA, dimensionless.
    pub gain_wa_ma: f64,
    /// Channel gain WA -> FA, dimensionless.
    pub gain_wa_fa: f64,
    /// Channel gain FA -> AA, dimensionless.
    pub gain_fa_aa: f64,
    /// Upload slot WA -> MA/FA, s.
    pub t_up: f64,
    /// Upload slot FA -> AA, s.
    pub t_k_up: f64,
    /// Cap on `t_up`, s.
    pub t_up_max: f64,
    /// Cap on `t_k_up`, s.
    pub t_k_up_max: f64,
}

/// Per-agent compute constants: cycles/bit, cycles/s, and the cubic power
/// coefficient in J*s^2/cycle^3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeParams {
    pub cycles_per_bit: f64,
    pub cpu_speed: f64,
    pub power_coeff: f64,
}

impl ComputeParams {
    /// Local compute time per bit, s/bit.
    pub fn seconds_per_bit(&self) -> f64 {
        self.cycles_per_bit / self.cpu_speed
    }

    /// Local compute energy per bit, J/bit (`sigma * mu^2 * lambda`).
    pub fn joules_per_bit(&self) -> f64 {
        self.power_coeff * self.cpu_speed * self.cpu_speed * self.cycles_per_bit
    }
}

/// The task source. Holds only economic/QoE constants; the WA computes
/// nothing locally in this model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaParams {
    /// QoE weight `kappa_n`.
    pub qoe_weight: f64,
    /// Energy cost weight `zeta_n`, 1/J.
    pub energy_weight: f64,
    /// Maximum tolerable perception-to-action delay `eps_n`, s.
    pub max_delay: f64,
    /// Actuator response time `t_n`, s.
    pub actuator_time: f64,
    /// Moving speed `v_n`, m/s.
    pub speed: f64,
}

/// Vehicular helper (leader pricing `p_i`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaParams {
    pub compute: ComputeParams,
    /// Compute-energy cost weight `xi_i`, 1/J.
    pub compute_cost: f64,
    /// Idle resource units `D_i`.
    pub idle_resources: f64,
    /// Moving speed `v_i`, m/s.
    pub speed: f64,
}

/// Roadside infrastructure (leader pricing `p_j`, buyer in the auction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaParams {
    pub compute: ComputeParams,
    /// Compute-energy cost weight `xi_j`, 1/J.
    pub compute_cost: f64,
    /// Transmission-energy cost weight `gamma_j`, 1/J.
    pub tx_cost: f64,
    /// Delay penalty `theta_j` in the buyer valuation.
    pub delay_penalty: f64,
}

/// Aerial helper (seller in the auction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AaParams {
    pub compute: ComputeParams,
    /// Compute-energy cost weight `xi_k`, 1/J.
    pub compute_cost: f64,
    /// Hover-energy cost weight `gamma_k`, 1/J.
    pub tx_cost: f64,
    /// Delay penalty `theta_k` in the seller valuation.
    pub delay_penalty: f64,
    /// Hover power draw, W.
    pub hover_power: f64,
}

/// One WA/MA/FA/AA quadruple plus channel and market constants: the unit of
/// simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub wa: WaParams,
    pub ma: MaParams,
    pub fa: FaParams,
    pub aa: AaParams,
    pub channel: ChannelParams,
    /// Total task size `W_n`, bits.
    pub workload: f64,
    /// FA -> AA delegation fraction `alpha_jk`.
    pub alpha: f64,
    /// Current agent density `rho`, agents/m.
    pub density: f64,
    /// Maximum agent density `rho_bar`, agents/m.
    pub density_max: f64,
    /// WA speed bounds, m/s.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Idle-resource bounds for MAs.
    pub idle_min: f64,
    pub idle_max: f64,
    /// Mobility reward multiplier `phi` (outer factor in the MA reward price).
    pub mobility_factor: f64,
    /// Additive offset inside the MA reward-price numerator.
    pub mobility_offset: f64,
    /// Profit-sharing proportion `psi` between FA and AA.
    pub profit_share: f64,
    /// Price caps for the two leaders, currency/bit.
    pub price_cap_ma: f64,
    pub price_cap_fa: f64,
}

/// End-to-end latencies of the three compute paths, s.
///
/// `aa_total` covers only the FA->AA hop plus AA compute; the binding
/// end-to-end latency for that path adds the WA->FA upload slot on top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delays {
    pub ma_total: f64,
    pub fa_total: f64,
    pub aa_total: f64,
}

/// Local compute energies of the three helpers plus AA hover energy, J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeEnergies {
    pub ma: f64,
    pub fa: f64,
    pub aa: f64,
    pub hover: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(name, format!("must be strictly positive, got {v}")));
    }
    Ok(())
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::invalid(name, format!("must be nonnegative, got {v}")));
    }
    Ok(())
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("channel.bandwidth_wa", self.bandwidth_wa)?;
        check_positive("channel.noise_wa", self.noise_wa)?;
        check_positive("channel.bandwidth_fa_aa", self.bandwidth_fa_aa)?;
        check_positive("channel.noise_fa_aa", self.noise_fa_aa)?;
        check_positive("channel.gain_wa_ma", self.gain_wa_ma)?;
        check_positive("channel.gain_wa_fa", self.gain_wa_fa)?;
        check_positive("channel.gain_fa_aa", self.gain_fa_aa)?;
        check_positive("channel.t_up", self.t_up)?;
        check_positive("channel.t_k_up", self.t_k_up)?;
        if self.t_up > self.t_up_max {
            return Err(Error::invalid("channel.t_up", "exceeds t_up_max"));
        }
        if self.t_k_up > self.t_k_up_max {
            return Err(Error::invalid("channel.t_k_up", "exceeds t_k_up_max"));
        }
        Ok(())
    }
}

impl ComputeParams {
    fn validate(&self, who: &str) -> Result<()> {
        check_positive(&format!("{who}.cycles_per_bit"), self.cycles_per_bit)?;
        check_positive(&format!("{who}.cpu_speed"), self.cpu_speed)?;
        check_nonneg(&format!("{who}.power_coeff"), self.power_coeff)
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.ma.compute.validate("ma")?;
        self.fa.compute.validate("fa")?;
        self.aa.compute.validate("aa")?;
        check_positive("workload", self.workload)?;
        check_positive("wa.max_delay", self.wa.max_delay)?;
        check_nonneg("wa.actuator_time", self.wa.actuator_time)?;
        check_nonneg("wa.qoe_weight", self.wa.qoe_weight)?;
        check_nonneg("wa.energy_weight", self.wa.energy_weight)?;
        check_nonneg("ma.compute_cost", self.ma.compute_cost)?;
        check_nonneg("fa.compute_cost", self.fa.compute_cost)?;
        check_nonneg("fa.tx_cost", self.fa.tx_cost)?;
        check_nonneg("aa.compute_cost", self.aa.compute_cost)?;
        check_nonneg("aa.tx_cost", self.aa.tx_cost)?;
        check_nonneg("aa.hover_power", self.aa.hover_power)?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", "must lie in [0, 1]"));
        }
        if !(self.profit_share > 0.0 && self.profit_share < 1.0) {
            return Err(Error::invalid("profit_share", "must lie in (0, 1)"));
        }
        if self.density <= 0.0 || self.density > self.density_max {
            return Err(Error::invalid("density", "need 0 < density <= density_max"));
        }
        if self.speed_min >= self.speed_max {
            return Err(Error::invalid("speed_min", "need speed_min < speed_max"));
        }
        if self.ma.idle_resources < self.idle_min || self.ma.idle_resources > self.idle_max {
            return Err(Error::invalid("ma.idle_resources", "outside [idle_min, idle_max]"));
        }
        check_positive("price_cap_ma", self.price_cap_ma)?;
        check_positive("price_cap_fa", self.price_cap_fa)?;
        Ok(())
    }

    /// Workload fraction shipped onward to the AA for a given offloading
    /// ratio: `w_k = (1 - o) * W_n * alpha`.
    pub fn aa_workload(&self, o: f64) -> f64 {
        (1.0 - o) * self.workload * self.alpha
    }
}

/// `2^x`, guarded against unphysical exponents.
fn exp2_guarded(x: f64) -> Result<f64> {
    if x > EXPONENT_GUARD {
        return Err(Error::ExponentOverflow { exponent: x, limit: EXPONENT_GUARD });
    }
    Ok(x.exp2())
}

/// Transmission power the WA needs to push its MA share through the slot, W.
///
/// `p_ni = (n_B / g_ni) * (2^(o*W / (w_B * t_up)) - 1)`; zero at `o = 0` and
/// monotone nondecreasing in `o`.
pub fn uplink_power_wa_ma(o: f64, s: &Scenario) -> Result<f64> {
    let ch = &s.channel;
    let exponent = o * s.workload / (ch.bandwidth_wa * ch.t_up);
    Ok(ch.noise_wa / ch.gain_wa_ma * (exp2_guarded(exponent)? - 1.0))
}

/// Transmission power the WA needs for its FA share, W.
///
/// The closed form already folds in the interference of the concurrent
/// WA->MA stream: `p_nj = (n_B / g_nj) * (2^((1-o)*W/(w_B*t_up)) - 1) *
/// 2^(o*W/(w_B*t_up))`; zero at `o = 1`.
pub fn uplink_power_wa_fa(o: f64, s: &Scenario) -> Result<f64> {
    let ch = &s.channel;
    let unit = s.workload / (ch.bandwidth_wa * ch.t_up);
    let fa_exp = (1.0 - o) * unit;
    let ma_exp = o * unit;
    exp2_guarded(fa_exp + ma_exp)?;
    Ok(ch.noise_wa / ch.gain_wa_fa * (exp2_guarded(fa_exp)? - 1.0) * exp2_guarded(ma_exp)?)
}

/// Total WA transmission energy over the upload slot, J: `(p_ni + p_nj) * t_up`.
pub fn wa_transmission_energy(o: f64, s: &Scenario) -> Result<f64> {
    Ok((uplink_power_wa_ma(o, s)? + uplink_power_wa_fa(o, s)?) * s.channel.t_up)
}

/// FA -> AA transmission power (W) and energy (J) for the delegated share.
pub fn fa_to_aa_power_and_energy(o: f64, s: &Scenario) -> Result<(f64, f64)> {
    let ch = &s.channel;
    let exponent = s.aa_workload(o) / (ch.bandwidth_fa_aa * ch.t_k_up);
    let power = ch.noise_fa_aa / ch.gain_fa_aa * (exp2_guarded(exponent)? - 1.0);
    Ok((power, power * ch.t_k_up))
}

/// End-to-end latencies of the three compute paths.
pub fn total_delays(o: f64, s: &Scenario) -> Delays {
    let ch = &s.channel;
    let w = s.workload;
    Delays {
        ma_total: ch.t_up + s.ma.compute.seconds_per_bit() * o * w,
        fa_total: ch.t_up + s.fa.compute.seconds_per_bit() * (1.0 - o) * w * (1.0 - s.alpha),
        aa_total: ch.t_k_up + s.aa.compute.seconds_per_bit() * s.aa_workload(o),
    }
}

/// Local compute energies of MA/FA/AA plus the AA hover energy.
pub fn compute_energies(o: f64, s: &Scenario) -> ComputeEnergies {
    let w = s.workload;
    let aa_share = s.aa_workload(o);
    let aa_compute_time = s.aa.compute.seconds_per_bit() * aa_share;
    ComputeEnergies {
        ma: s.ma.compute.joules_per_bit() * o * w,
        fa: s.fa.compute.joules_per_bit() * (1.0 - o) * w * (1.0 - s.alpha),
        aa: s.aa.compute.joules_per_bit() * aa_share,
        hover: (s.channel.t_k_up + aa_compute_time) * s.aa.hover_power,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::loader::desk_scenario;

    /// Toy channel from the per-operation examples: W=1000 bits, w_B=1000 Hz,
    /// t_up=0.5 s, n_B=1e-4 W, unit gains.
    fn toy() -> Scenario {
        let mut s = desk_scenario();
        s.workload = 1000.0;
        s.channel.bandwidth_wa = 1000.0;
        s.channel.t_up = 0.5;
        s.channel.noise_wa = 1e-4;
        s.channel.gain_wa_ma = 1.0;
        s.channel.gain_wa_fa = 1.0;
        s.channel.bandwidth_fa_aa = 1000.0;
        s.channel.t_k_up = 0.5;
        s.channel.t_k_up_max = 0.5;
        s.channel.noise_fa_aa = 1e-4;
        s.channel.gain_fa_aa = 1.0;
        s
    }

    #[test]
    fn uplink_power_ma_examples() {
        let s = toy();
        assert_eq!(uplink_power_wa_ma(0.0, &s).unwrap(), 0.0);
        let p1 = uplink_power_wa_ma(1.0, &s).unwrap();
        assert!((p1 - 3e-4).abs() < 1e-18, "o=1: {p1}");
        let p05 = uplink_power_wa_ma(0.5, &s).unwrap();
        assert!((p05 - 1e-4).abs() < 1e-18, "o=0.5: {p05}");
    }

    #[test]
    fn uplink_power_ma_monotone() {
        let s = toy();
        let mut prev = -1.0;
        for i in 0..=100 {
            let p = uplink_power_wa_ma(i as f64 / 100.0, &s).unwrap();
            assert!(p > prev, "not strictly increasing at {i}");
            prev = p;
        }
    }

    #[test]
    fn uplink_power_fa_examples() {
        let s = toy();
        assert_eq!(uplink_power_wa_fa(1.0, &s).unwrap(), 0.0);
        let p0 = uplink_power_wa_fa(0.0, &s).unwrap();
        assert!((p0 - 3e-4).abs() < 1e-18, "o=0: {p0}");
        let p05 = uplink_power_wa_fa(0.5, &s).unwrap();
        assert!((p05 - 2e-4).abs() < 1e-18, "o=0.5: {p05}");
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let p = uplink_power_wa_fa(i as f64 / 100.0, &s).unwrap();
            assert!(p < prev, "not strictly decreasing at {i}");
            prev = p;
        }
    }

    #[test]
    fn transmission_energy_examples() {
        let s = toy();
        let e = wa_transmission_energy(0.5, &s).unwrap();
        assert!((e - 1.5e-4).abs() < 1e-18, "o=0.5: {e}");
        // MA term vanishes at o=0 when gains match.
        let e0 = wa_transmission_energy(0.0, &s).unwrap();
        let fa_only = uplink_power_wa_fa(0.0, &s).unwrap() * s.channel.t_up;
        assert_eq!(e0, fa_only);
        let mut z = toy();
        z.workload = 1e-300; // workload -> 0 limit
        assert!(wa_transmission_energy(0.7, &z).unwrap() < 1e-300);
    }

    #[test]
    fn fa_to_aa_examples() {
        let mut s = toy();
        s.alpha = 1.0;
        let (p, e) = fa_to_aa_power_and_energy(0.0, &s).unwrap();
        assert!((p - 3e-4).abs() < 1e-18);
        assert!((e - 1.5e-4).abs() < 1e-18);
        let (p1, e1) = fa_to_aa_power_and_energy(1.0, &s).unwrap();
        assert_eq!((p1, e1), (0.0, 0.0));
        s.alpha = 0.0;
        let (p2, e2) = fa_to_aa_power_and_energy(0.3, &s).unwrap();
        assert_eq!((p2, e2), (0.0, 0.0));
    }

    #[test]
    fn delay_examples() {
        let mut s = toy();
        s.workload = 10.0;
        s.ma.compute.cycles_per_bit = 1e4;
        s.ma.compute.cpu_speed = 1e6;
        let d = total_delays(0.5, &s);
        assert!((d.ma_total - 0.55).abs() < 1e-12, "{}", d.ma_total);
        let d0 = total_delays(0.0, &s);
        assert_eq!(d0.ma_total, s.channel.t_up);
        s.alpha = 1.0;
        let d1 = total_delays(0.0, &s);
        assert_eq!(d1.fa_total, s.channel.t_up);
    }

    #[test]
    fn compute_energy_examples() {
        let mut s = toy();
        s.workload = 10.0;
        s.ma.compute = ComputeParams { cycles_per_bit: 1e4, cpu_speed: 1e6, power_coeff: 1e-20 };
        let e = compute_energies(1.0, &s);
        assert!((e.ma - 1e-3).abs() < 1e-15, "{}", e.ma);
        let mut z = s.clone();
        z.workload = 1e-300;
        let ez = compute_energies(0.5, &z);
        assert!(ez.ma < 1e-290 && ez.fa < 1e-290 && ez.aa < 1e-290);
        s.alpha = 0.0;
        let ea = compute_energies(0.4, &s);
        assert_eq!(ea.aa, 0.0);
        assert_eq!(ea.hover, s.channel.t_k_up * s.aa.hover_power);
    }

    #[test]
    fn energies_linear_in_workload() {
        let s = toy();
        for k in [2.0, 10.0] {
            let mut scaled = s.clone();
            scaled.workload *= k;
            for o in [0.0, 0.3, 0.9] {
                let base = compute_energies(o, &s);
                let big = compute_energies(o, &scaled);
                for (a, b) in [(base.ma, big.ma), (base.fa, big.fa), (base.aa, big.aa)] {
                    assert!((b - k * a).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn workload_conservation() {
        let s = toy();
        let w = s.workload;
        for i in 0..=100 {
            let o = i as f64 / 100.0;
            for a in [0.0, 0.25, 0.5, 1.0] {
                let sum = o * w + (1.0 - o) * w * (1.0 - a) + (1.0 - o) * w * a;
                assert!((sum - w).abs() <= 8.0 * f64::EPSILON * w, "o={o} a={a}: {sum}");
            }
        }
    }

    #[test]
    fn overflow_guard_trips() {
        let mut s = toy();
        s.workload = 1e7; // paper-scale Mbits over kHz
        match uplink_power_wa_ma(1.0, &s) {
            Err(Error::ExponentOverflow { .. }) => {}
            other => panic!("expected overflow guard, got {other:?}"),
        }
    }

    #[test]
    fn desk_scenario_outputs_finite_nonnegative() {
        let s = desk_scenario();
        for i in 0..=50 {
            let o = i as f64 / 50.0;
            let p1 = uplink_power_wa_ma(o, &s).unwrap();
            let p2 = uplink_power_wa_fa(o, &s).unwrap();
            let e = wa_transmission_energy(o, &s).unwrap();
            let (p3, e3) = fa_to_aa_power_and_energy(o, &s).unwrap();
            let d = total_delays(o, &s);
            let c = compute_energies(o, &s);
            for v in [p1, p2, e, p3, e3, d.ma_total, d.fa_total, d.aa_total, c.ma, c.fa, c.aa, c.hover] {
                assert!(v.is_finite() && v >= 0.0, "o={o}: {v}");
            }
            assert!(d.ma_total >= s.channel.t_up);
            assert!(d.fa_total >= s.channel.t_up);
            assert!(d.aa_total >= s.channel.t_k_up);
        }
    }
}
