//! Two-regime synthetic households.
//!
//! Every day, hours 6 to 19 follow a sticky binary regime (occupied or not)
//! that is redrawn fairly at 6:00. Consumption is an hour-of-day base load
//! plus an hour-dependent regime amplitude, a temperature response and
//! Gaussian noise. Other hours have only the base load and quieter noise.
//!
//! The first `outage_hours` readings are zero. Min-max scaling maps the
//! lowest reading to 0, so pinning it keeps ordinary hours well above zero,
//! where percentage errors are meaningful.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{ConsumptionSeries, DataError};
use crate::hmm::DUAL_HOURS;
use crate::rng::{stream, stream_id};
use crate::time::Hour;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub days: usize,
    /// Probability of keeping the regime from one hour to the next.
    pub stay: f64,
    /// Noise in the two-regime hours.
    pub noise_sd: f64,
    /// Noise in the other hours.
    pub night_sd: f64,
    pub outage_hours: usize,
    /// kWh per degree above the comfort point.
    pub temp_slope: f64,
    pub comfort_c: f64,
    pub start: Hour,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            days: 90,
            stay: 0.93,
            noise_sd: 0.3,
            night_sd: 0.05,
            outage_hours: 1,
            temp_slope: 0.04,
            comfort_c: 20.0,
            start: Hour::from_ymdh(2013, 6, 1, 0).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticHousehold {
    pub series: ConsumptionSeries,
    pub kwh: Vec<f64>,
    pub temp_c: Vec<f64>,
    /// 1 when occupied; always 1 outside the two-regime hours.
    pub regime: Vec<u8>,
}

/// Base load in kWh by hour of day.
pub fn base_load(hour: u8) -> f64 {
    let h = hour as f64;
    let wave = 0.2 * (std::f64::consts::TAU * (h - 9.0) / 24.0).sin();
    if DUAL_HOURS.contains(&hour) {
        1.2 + wave
    } else {
        0.7 + wave
    }
}

/// Extra kWh drawn while occupied.
pub fn amplitude(hour: u8) -> f64 {
    if !DUAL_HOURS.contains(&hour) {
        return 0.0;
    }
    let h = (hour - DUAL_HOURS.start) as f64;
    0.45 + 0.675 * (1.0 + (std::f64::consts::TAU * (h - 2.5) / 5.0).cos())
}

fn temperature_at(t: usize, day_offset: f64) -> f64 {
    let hour = (t % 24) as f64;
    22.0 + day_offset + 6.0 * (std::f64::consts::TAU * (hour - 9.0) / 24.0).sin()
}

/// Draws one household. The same `(user_id, seed)` always gives the same draw.
pub fn generate(user_id: &str, config: &GeneratorConfig, seed: u64) -> Result<SyntheticHousehold, DataError> {
    draw(user_id, config, seed, None)
}

/// Like [`generate`] but driven by a given temperature record, so several
/// households can share one weather station. Regime and noise draws match
/// those of [`generate`].
pub fn generate_with_temperature(
    user_id: &str,
    config: &GeneratorConfig,
    seed: u64,
    temp_c: &[f64],
) -> Result<SyntheticHousehold, DataError> {
    assert_eq!(
        temp_c.len(),
        config.days * 24,
        "temperature length must cover every hour"
    );
    draw(user_id, config, seed, Some(temp_c))
}

/// The temperature record [`generate`] would use for `user_id`.
pub fn temperature_record(user_id: &str, config: &GeneratorConfig, seed: u64) -> Vec<f64> {
    draw(user_id, config, seed, None)
        .map(|h| h.temp_c)
        .expect("generator output is valid")
}

fn draw(
    user_id: &str,
    config: &GeneratorConfig,
    seed: u64,
    given: Option<&[f64]>,
) -> Result<SyntheticHousehold, DataError> {
    let mut rng = stream(seed, stream_id(&["synthetic", user_id]));
    let day_noise = Normal::new(0.0, config.noise_sd).expect("finite noise");
    let night_noise = Normal::new(0.0, config.night_sd).expect("finite noise");
    let n = config.days * 24;
    let start_hour = config.start.hour_of_day() as usize;
    let mut kwh = Vec::with_capacity(n);
    let mut temp_c = Vec::with_capacity(n);
    let mut regime = Vec::with_capacity(n);
    let mut state = 1u8;
    let mut day_offset = 0.0;
    for i in 0..n {
        let t = i + start_hour;
        let hour = (t % 24) as u8;
        if hour == 0 || i == 0 {
            day_offset = rng.random_range(-4.0..4.0);
        }
        if hour == DUAL_HOURS.start {
            state = rng.random_bool(0.5) as u8;
        } else if DUAL_HOURS.contains(&hour) && !rng.random_bool(config.stay) {
            state = 1 - state;
        }
        let dual = DUAL_HOURS.contains(&hour);
        let occupied = if dual { state } else { 1 };
        let temp = given.map_or_else(|| temperature_at(t, day_offset), |g| g[i]);
        let eps = if dual {
            day_noise.sample(&mut rng)
        } else {
            night_noise.sample(&mut rng)
        };
        let y = base_load(hour)
            + amplitude(hour) * occupied as f64
            + config.temp_slope * (temp - config.comfort_c).max(0.0)
            + eps;
        kwh.push(if i < config.outage_hours { 0.0 } else { y.max(0.05) });
        temp_c.push(temp);
        regime.push(occupied);
    }
    let series = ConsumptionSeries::from_raw(user_id, config.start, &kwh, &temp_c)?;
    Ok(SyntheticHousehold {
        series,
        kwh,
        temp_c,
        regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let cfg = GeneratorConfig {
            days: 3,
            ..Default::default()
        };
        let a = generate("u", &cfg, 5).unwrap();
        let b = generate("u", &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.series.len(), 72);
        assert!(a.regime[..6].iter().all(|&r| r == 1));
        let c = generate("v", &cfg, 5).unwrap();
        assert_ne!(a.kwh, c.kwh);
        let shared = generate_with_temperature("v", &cfg, 5, &a.temp_c).unwrap();
        assert_eq!(shared.temp_c, a.temp_c);
        assert_eq!(shared.regime, c.regime);
        assert_eq!(temperature_record("u", &cfg, 5), a.temp_c);
    }
}
