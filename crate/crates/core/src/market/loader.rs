//! Scenario config loader.
//!
//! The format is line-oriented `key = value [unit]` with `#` comments.
//! Units are normalized at parse time to bits / Hz / W / seconds; dBm is
//! converted via `W = 10^(dBm/10) / 1000`. Two presets ship with the crate:
//! `desk.cfg` (the default scale used by tests and experiments, chosen so the
//! power-law exponents stay inside [`super::EXPONENT_GUARD`]) and `paper.cfg`
//! (verbatim headline constants, which the guard deliberately rejects for the
//! power operations).

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::market::Scenario;

/// Rescaled default scenario (embedded copy of `configs/desk.cfg`).
pub const DESK_CFG: &str = include_str!("../../../../configs/desk.cfg");
/// Headline constants as published (embedded copy of `configs/paper.cfg`).
pub const PAPER_CFG: &str = include_str!("../../../../configs/paper.cfg");

/// Parse `value [unit]` into a base-unit f64.
pub fn parse_quantity(raw: &str, key: &str) -> Result<f64> {
    let raw = raw.trim();
    let (num_str, unit) = match raw.split_once(char::is_whitespace) {
        Some((n, u)) => (n, u.trim()),
        None => (raw, ""),
    };
    let value: f64 = num_str
        .parse()
        .map_err(|_| Error::config(key, format!("not a number: `{num_str}`")))?;
    let scaled = match unit.to_ascii_lowercase().as_str() {
        "" | "w" | "hz" | "s" | "bit" | "bits" | "j" | "m/s" | "agents/m" | "cycles/bit"
        | "cycles/s" => value,
        "khz" => value * 1e3,
        "mhz" => value * 1e6,
        "ghz" => value * 1e9,
        "mw" => value * 1e-3,
        "uw" => value * 1e-6,
        "dbm" => 10f64.powf(value / 10.0) / 1000.0,
        "ms" => value * 1e-3,
        "us" => value * 1e-6,
        "kbit" | "kbits" => value * 1e3,
        "mbit" | "mbits" => value * 1e6,
        "gbit" | "gbits" => value * 1e9,
        other => return Err(Error::config(key, format!("unknown unit `{other}`"))),
    };
    if !scaled.is_finite() {
        return Err(Error::config(key, "value is not finite"));
    }
    Ok(scaled)
}

/// Set one scenario field addressed by its config key. Shared by the file
/// parser and by `--set key=value` overrides.
pub fn set_key(s: &mut Scenario, key: &str, raw: &str) -> Result<()> {
    let v = parse_quantity(raw, key)?;
    match key {
        "workload" => s.workload = v,
        "alpha" => s.alpha = v,
        "profit_share" => s.profit_share = v,
        "density" => s.density = v,
        "density_max" => s.density_max = v,
        "speed_min" => s.speed_min = v,
        "speed_max" => s.speed_max = v,
        "idle_min" => s.idle_min = v,
        "idle_max" => s.idle_max = v,
        "mobility_factor" => s.mobility_factor = v,
        "mobility_offset" => s.mobility_offset = v,
        "price_cap_ma" => s.price_cap_ma = v,
        "price_cap_fa" => s.price_cap_fa = v,
        "channel.bandwidth_wa" => s.channel.bandwidth_wa = v,
        "channel.noise_wa" => s.channel.noise_wa = v,
        "channel.bandwidth_fa_aa" => s.channel.bandwidth_fa_aa = v,
        "channel.noise_fa_aa" => s.channel.noise_fa_aa = v,
        "channel.gain_wa_ma" => s.channel.gain_wa_ma = v,
        "channel.gain_wa_fa" => s.channel.gain_wa_fa = v,
        "channel.gain_fa_aa" => s.channel.gain_fa_aa = v,
        "channel.t_up" => s.channel.t_up = v,
        "channel.t_k_up" => s.channel.t_k_up = v,
        "channel.t_up_max" => s.channel.t_up_max = v,
        "channel.t_k_up_max" => s.channel.t_k_up_max = v,
        "wa.qoe_weight" => s.wa.qoe_weight = v,
        "wa.energy_weight" => s.wa.energy_weight = v,
        "wa.max_delay" => s.wa.max_delay = v,
        "wa.actuator_time" => s.wa.actuator_time = v,
        "wa.speed" => s.wa.speed = v,
        "ma.cycles_per_bit" => s.ma.compute.cycles_per_bit = v,
        "ma.cpu_speed" => s.ma.compute.cpu_speed = v,
        "ma.power_coeff" => s.ma.compute.power_coeff = v,
        "ma.compute_cost" => s.ma.compute_cost = v,
        "ma.idle_resources" => s.ma.idle_resources = v,
        "ma.speed" => s.ma.speed = v,
        "fa.cycles_per_bit" => s.fa.compute.cycles_per_bit = v,
        "fa.cpu_speed" => s.fa.compute.cpu_speed = v,
        "fa.power_coeff" => s.fa.compute.power_coeff = v,
        "fa.compute_cost" => s.fa.compute_cost = v,
        "fa.tx_cost" => s.fa.tx_cost = v,
        "fa.delay_penalty" => s.fa.delay_penalty = v,
        "aa.cycles_per_bit" => s.aa.compute.cycles_per_bit = v,
        "aa.cpu_speed" => s.aa.compute.cpu_speed = v,
        "aa.power_coeff" => s.aa.compute.power_coeff = v,
        "aa.compute_cost" => s.aa.compute_cost = v,
        "aa.tx_cost" => s.aa.tx_cost = v,
        "aa.delay_penalty" => s.aa.delay_penalty = v,
        "aa.hover_power" => s.aa.hover_power = v,
        other => return Err(Error::config(other, "unknown scenario key")),
    }
    Ok(())
}

const REQUIRED_KEYS: &[&str] = &[
    "workload",
    "alpha",
    "profit_share",
    "channel.bandwidth_wa",
    "channel.noise_wa",
    "channel.t_up",
    "channel.t_k_up",
    "wa.qoe_weight",
    "ma.cpu_speed",
    "fa.cpu_speed",
    "aa.cpu_speed",
];

fn blank_scenario() -> Scenario {
    use crate::market::*;
    let compute = ComputeParams { cycles_per_bit: 1.0, cpu_speed: 1.0, power_coeff: 0.0 };
    Scenario {
        wa: WaParams {
            qoe_weight: 0.0,
            energy_weight: 0.0,
            max_delay: 1.0,
            actuator_time: 0.0,
            speed: 0.0,
        },
        ma: MaParams { compute, compute_cost: 0.0, idle_resources: 1.0, speed: 0.0 },
        fa: FaParams { compute, compute_cost: 0.0, tx_cost: 0.0, delay_penalty: 0.0 },
        aa: AaParams {
            compute,
            compute_cost: 0.0,
            tx_cost: 0.0,
            delay_penalty: 0.0,
            hover_power: 0.0,
        },
        channel: ChannelParams {
            bandwidth_wa: 1.0,
            noise_wa: 1.0,
            bandwidth_fa_aa: 1.0,
            noise_fa_aa: 1.0,
            gain_wa_ma: 1.0,
            gain_wa_fa: 1.0,
            gain_fa_aa: 1.0,
            t_up: 1.0,
            t_k_up: 1.0,
            t_up_max: 1.0,
            t_k_up_max: 1.0,
        },
        workload: 1.0,
        alpha: 0.0,
        density: 1.0,
        density_max: 1.0,
        speed_min: 0.0,
        speed_max: 1.0,
        idle_min: 0.0,
        idle_max: 1.0,
        mobility_factor: 1.0,
        mobility_offset: 0.0,
        profit_share: 0.5,
        price_cap_ma: 1.0,
        price_cap_fa: 1.0,
    }
}

/// Parse a scenario from config text. Validation errors carry the key path.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut s = blank_scenario();
    let mut seen = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "expected `key = value`"))?;
        let key = key.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::config(key, "duplicate key"));
        }
        set_key(&mut s, key, value)?;
    }
    for req in REQUIRED_KEYS {
        if !seen.contains(*req) {
            return Err(Error::config(*req, "required key missing"));
        }
    }
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_scenario(&text)
}

/// The rescaled default scenario. Infallible by construction; covered by tests.
pub fn desk_scenario() -> Scenario {
    parse_scenario(DESK_CFG).expect("embedded desk.cfg must parse")
}

/// Headline constants as published. Loads and validates fine; the power
/// operations on it trip the overflow guard by design.
pub fn paper_scenario() -> Scenario {
    parse_scenario(PAPER_CFG).expect("embedded paper.cfg must parse")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_cfg_parses_and_validates() {
        let s = desk_scenario();
        assert!(s.validate().is_ok());
        assert_eq!(s.channel.bandwidth_wa, 1000.0);
        assert_eq!(s.channel.t_up, 0.5);
    }

    #[test]
    fn paper_cfg_matches_published_constants() {
        let s = paper_scenario();
        assert_eq!(s.workload, 1e7); // 10 Mbit
        assert_eq!(s.wa.qoe_weight, 0.5);
        assert_eq!(s.channel.bandwidth_wa, 1000.0);
        assert_eq!(s.channel.t_up, 0.5);
        assert_eq!(s.channel.t_k_up, 0.1);
        assert_eq!(s.ma.compute.cpu_speed, 1e6);
        assert_eq!(s.ma.compute.power_coeff, 1e-20);
        assert_eq!(s.fa.compute.cpu_speed, 4e6);
        assert_eq!(s.fa.compute.power_coeff, 1.25e-22);
        assert_eq!(s.aa.compute.cpu_speed, 6e6);
        assert_eq!(s.aa.compute.power_coeff, 1.5e-22);
        for p in [&s.ma.compute, &s.fa.compute, &s.aa.compute] {
            assert_eq!(p.cycles_per_bit, 1e4);
        }
        // 1e-4 dBm is within a whisker of 1 mW.
        assert!((s.channel.noise_wa - 1e-3).abs() < 1e-7);
    }

    #[test]
    fn unit_conversions() {
        assert_eq!(parse_quantity("10 Mbit", "k").unwrap(), 1e7);
        assert_eq!(parse_quantity("1 kHz", "k").unwrap(), 1000.0);
        assert_eq!(parse_quantity("0 dBm", "k").unwrap(), 1e-3);
        assert_eq!(parse_quantity("250 ms", "k").unwrap(), 0.25);
        assert_eq!(parse_quantity("3.5", "k").unwrap(), 3.5);
    }

    #[test]
    fn bad_inputs_report_key_paths() {
        assert!(matches!(
            parse_quantity("12 parsec", "channel.t_up"),
            Err(Error::Config { key, .. }) if key == "channel.t_up"
        ));
        let mut s = desk_scenario();
        assert!(set_key(&mut s, "nonsense.key", "1").is_err());
        let err = parse_scenario("workload = 5 bits").unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
    }

    #[test]
    fn overrides_mutate_single_fields() {
        let mut s = desk_scenario();
        set_key(&mut s, "alpha", "0.25").unwrap();
        assert_eq!(s.alpha, 0.25);
        set_key(&mut s, "fa.cpu_speed", "8e6").unwrap();
        assert_eq!(s.fa.compute.cpu_speed, 8e6);
    }
}
