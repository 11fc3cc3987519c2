//! Synthetic accident / non-accident windows.
//!
//! Non-accident windows share one per-window baseline between the upstream
//! and downstream detectors, with independent per-minute noise. Accident
//! windows follow the same regime up to the case minute; from minute +1 the
//! upstream speed drops and the downstream speed rises so the gap between
//! them grows by `divergence_rate` mi/hr every minute, upstream occupancy
//! rises and downstream volume falls in proportion to that gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::window::{Dataset, TrafficWindow};
use super::{CASE_STEP, STEPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_accident: usize,
    pub n_nonaccident: usize,
    /// mi/hr
    pub speed_mean: f64,
    /// percent
    pub occupancy_mean: f64,
    /// veh/min
    pub volume_mean: f64,
    /// Relative standard deviation of the per-window baseline.
    pub baseline_spread: f64,
    /// Growth of the upstream/downstream speed gap after the accident, mi/hr per minute.
    pub divergence_rate: f64,
    /// Occupancy increase upstream per mi/hr of speed gap.
    pub occupancy_response: f64,
    /// Volume decrease downstream (veh/min) per mi/hr of speed gap.
    pub volume_response: f64,
    /// Per-minute speed noise standard deviation (mi/hr); occupancy and
    /// volume noise scale with their means relative to speed.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_accident: 241,
            n_nonaccident: 6038,
            speed_mean: 50.6,
            occupancy_mean: 15.1,
            volume_mean: 18.6,
            baseline_spread: 0.15,
            divergence_rate: 1.5,
            occupancy_response: 0.5,
            volume_response: 0.3,
            noise_scale: 3.0,
            seed: 2016,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_accident == 0 || self.n_nonaccident == 0 {
            return Err(Error::invalid(format!(
                "generator needs both classes, got {} accident / {} non-accident",
                self.n_accident, self.n_nonaccident
            )));
        }
        let non_negative = [
            ("baseline_spread", self.baseline_spread),
            ("divergence_rate", self.divergence_rate),
            ("occupancy_response", self.occupancy_response),
            ("volume_response", self.volume_response),
            ("noise_scale", self.noise_scale),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("speed_mean", self.speed_mean),
            ("occupancy_mean", self.occupancy_mean),
            ("volume_mean", self.volume_mean),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.occupancy_mean > 100.0 {
            return Err(Error::invalid("occupancy_mean above 100%"));
        }
        Ok(())
    }
}

// Context flag rates: weekday 0.71, am peak 0.12, pm peak 0.13 overall.
const P_WEEKDAY: f64 = 0.71;
const P_AM_GIVEN_WEEKDAY: f64 = 0.12 / 0.71;
const P_PM_GIVEN_WEEKDAY_NOT_AM: f64 = (0.13 / 0.71) / (1.0 - 0.12 / 0.71);
// weather 1..=4 with mean 1.18
const WEATHER_CDF: [f64; 4] = [0.87, 0.96, 0.99, 1.0];

fn sample_context(rng: &mut ChaCha8Rng) -> (u8, bool, bool, bool) {
    let u: f64 = rng.random();
    let weather = WEATHER_CDF.iter().position(|&c| u < c).unwrap_or(3) as u8 + 1;
    let weekday = rng.random_bool(P_WEEKDAY);
    let am = weekday && rng.random_bool(P_AM_GIVEN_WEEKDAY);
    let pm = weekday && !am && rng.random_bool(P_PM_GIVEN_WEEKDAY_NOT_AM);
    (weather, weekday, am, pm)
}

struct Noise {
    speed: Normal<f64>,
    occ: Normal<f64>,
    vol: Normal<f64>,
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated non-negative finite sd")
}

fn make_window(
    cfg: &GeneratorConfig,
    accident: bool,
    noise: &Noise,
    rng: &mut ChaCha8Rng,
) -> TrafficWindow {
    let spread = cfg.baseline_spread;
    let speed_base = (cfg.speed_mean + normal(spread * cfg.speed_mean).sample(rng))
        .clamp(0.4 * cfg.speed_mean, 1.6 * cfg.speed_mean);
    let occ_base =
        (cfg.occupancy_mean + normal(spread * cfg.occupancy_mean).sample(rng)).clamp(0.0, 100.0);
    let vol_base = (cfg.volume_mean + normal(spread * cfg.volume_mean).sample(rng)).max(0.0);

    let mut w = TrafficWindow {
        speed_up: [0.0; STEPS],
        speed_down: [0.0; STEPS],
        occ_up: [0.0; STEPS],
        occ_down: [0.0; STEPS],
        vol_up: [0.0; STEPS],
        vol_down: [0.0; STEPS],
        weather: 1,
        weekday: false,
        am_peak: false,
        pm_peak: false,
        label: u8::from(accident),
    };
    for t in 0..STEPS {
        let gap = if accident && t > CASE_STEP {
            cfg.divergence_rate * (t - CASE_STEP) as f64
        } else {
            0.0
        };
        w.speed_up[t] = (speed_base - 0.5 * gap + noise.speed.sample(rng)).max(0.0);
        w.speed_down[t] = (speed_base + 0.5 * gap + noise.speed.sample(rng)).max(0.0);
        w.occ_up[t] =
            (occ_base + cfg.occupancy_response * gap + noise.occ.sample(rng)).clamp(0.0, 100.0);
        w.occ_down[t] = (occ_base + noise.occ.sample(rng)).clamp(0.0, 100.0);
        w.vol_up[t] = (vol_base + noise.vol.sample(rng)).max(0.0);
        w.vol_down[t] = (vol_base - cfg.volume_response * gap + noise.vol.sample(rng)).max(0.0);
    }
    let (weather, weekday, am, pm) = sample_context(rng);
    w.weather = weather;
    w.weekday = weekday;
    w.am_peak = am;
    w.pm_peak = pm;
    w
}

/// Accident windows first, then non-accident windows.
pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Noise {
        speed: normal(cfg.noise_scale),
        occ: normal(cfg.noise_scale * cfg.occupancy_mean / cfg.speed_mean),
        vol: normal(cfg.noise_scale * cfg.volume_mean / cfg.speed_mean),
    };
    let windows = std::iter::repeat_n(true, cfg.n_accident)
        .chain(std::iter::repeat_n(false, cfg.n_nonaccident))
        .map(|acc| make_window(cfg, acc, &noise, &mut rng))
        .collect();
    Ok(Dataset::new(windows))
}
