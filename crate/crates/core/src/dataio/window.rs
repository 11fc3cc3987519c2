use serde::{Deserialize, Serialize};

use super::{CONTEXT_FEATURES, FEATURES, STEPS, TRAFFIC_FEATURES};
use crate::error::{Error, Result};

pub type Series = [f64; STEPS];

/// One labelled case: 11 one-minute traffic readings at the upstream and
/// downstream detectors (minutes −5…+5 around the case time) plus static
/// context flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficWindow {
    /// mi/hr
    pub speed_up: Series,
    pub speed_down: Series,
    /// percent, 0..=100
    pub occ_up: Series,
    pub occ_down: Series,
    /// veh/min
    pub vol_up: Series,
    pub vol_down: Series,
    /// 1 = sunny … 4 = stormy
    pub weather: u8,
    pub weekday: bool,
    pub am_peak: bool,
    pub pm_peak: bool,
    /// 1 = accident
    pub label: u8,
}

/// Names of the six traffic blocks, in CSV and feature order.
pub const SERIES_NAMES: [&str; 6] = [
    "speed_up",
    "speed_down",
    "occ_up",
    "occ_down",
    "vol_up",
    "vol_down",
];

pub const CONTEXT_NAMES: [&str; CONTEXT_FEATURES] = ["weather", "weekday", "am_peak", "pm_peak"];

impl TrafficWindow {
    pub fn series(&self) -> [&Series; 6] {
        [
            &self.speed_up,
            &self.speed_down,
            &self.occ_up,
            &self.occ_down,
            &self.vol_up,
            &self.vol_down,
        ]
    }

    pub fn series_mut(&mut self) -> [&mut Series; 6] {
        [
            &mut self.speed_up,
            &mut self.speed_down,
            &mut self.occ_up,
            &mut self.occ_down,
            &mut self.vol_up,
            &mut self.vol_down,
        ]
    }

    pub fn context(&self) -> [f64; CONTEXT_FEATURES] {
        [
            f64::from(self.weather),
            f64::from(u8::from(self.weekday)),
            f64::from(u8::from(self.am_peak)),
            f64::from(u8::from(self.pm_peak)),
        ]
    }

    /// Flatten into the 70-value feature layout: each traffic block's 11
    /// values in block order, then weather, weekday, am_peak, pm_peak.
    pub fn to_features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(FEATURES);
        for s in self.series() {
            out.extend_from_slice(s);
        }
        out.extend_from_slice(&self.context());
        out
    }

    /// Inverse of [`to_features`](Self::to_features); the result is validated.
    pub fn from_features(features: &[f64], label: u8) -> Result<Self> {
        if features.len() != FEATURES {
            return Err(Error::shape(
                "from_features",
                format!("{FEATURES} values"),
                features.len(),
            ));
        }
        let mut w = TrafficWindow {
            speed_up: [0.0; STEPS],
            speed_down: [0.0; STEPS],
            occ_up: [0.0; STEPS],
            occ_down: [0.0; STEPS],
            vol_up: [0.0; STEPS],
            vol_down: [0.0; STEPS],
            weather: 0,
            weekday: false,
            am_peak: false,
            pm_peak: false,
            label,
        };
        for (s, chunk) in w.series_mut().into_iter().zip(features.chunks_exact(STEPS)) {
            s.copy_from_slice(chunk);
        }
        let ctx = &features[TRAFFIC_FEATURES * STEPS..];
        if !(1..=4).any(|k| ctx[0] == f64::from(k)) {
            return Err(Error::invalid(format!(
                "weather: {} is not one of 1..=4",
                ctx[0]
            )));
        }
        w.weather = ctx[0] as u8;
        let mut flags = [false; 3];
        for (i, (flag, &v)) in flags.iter_mut().zip(&ctx[1..]).enumerate() {
            *flag = match v {
                0.0 => false,
                1.0 => true,
                _ => {
                    return Err(Error::invalid(format!(
                        "{}: {v} is not 0 or 1",
                        CONTEXT_NAMES[i + 1]
                    )))
                }
            };
        }
        [w.weekday, w.am_peak, w.pm_peak] = flags;
        w.validate()?;
        Ok(w)
    }

    /// Returns `(column, message)` for the first violated invariant.
    pub fn check(&self) -> std::result::Result<(), (String, String)> {
        for (name, s) in SERIES_NAMES.iter().zip(self.series()) {
            for (t, &v) in s.iter().enumerate() {
                let col = || format!("{name}_{t}");
                if !v.is_finite() {
                    return Err((col(), format!("non-finite value {v}")));
                }
                if v < 0.0 {
                    return Err((col(), format!("negative value {v}")));
                }
                if name.starts_with("occ") && v > 100.0 {
                    return Err((col(), format!("occupancy {v} outside [0,100]")));
                }
            }
        }
        if !(1..=4).contains(&self.weather) {
            return Err((
                "weather".into(),
                format!("weather {} outside 1..=4", self.weather),
            ));
        }
        if self.am_peak && self.pm_peak {
            return Err(("pm_peak".into(), "am_peak and pm_peak both set".into()));
        }
        if (self.am_peak || self.pm_peak) && !self.weekday {
            return Err(("weekday".into(), "peak flag set on a weekend".into()));
        }
        if self.label > 1 {
            return Err((
                "label".into(),
                format!("label {} not in {{0,1}}", self.label),
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check()
            .map_err(|(column, message)| Error::invalid(format!("{column}: {message}")))
    }
}

/// A collection of windows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub windows: Vec<TrafficWindow>,
}

impl Dataset {
    pub fn new(windows: Vec<TrafficWindow>) -> Self {
        Dataset { windows }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.windows.iter().map(|w| w.label).collect()
    }

    /// (accident, non-accident) counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.windows.iter().filter(|w| w.label == 1).count();
        (pos, self.len() - pos)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        indices
            .iter()
            .map(|&i| {
                self.windows.get(i).cloned().ok_or_else(|| {
                    Error::invalid(format!("index {i} out of range for {} windows", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Dataset::new)
    }

    /// Per-feature means in [`TrafficWindow::to_features`] order, averaged
    /// over timesteps for the traffic blocks: 6 block means then 4 context means.
    pub fn feature_means(&self) -> [f64; TRAFFIC_FEATURES + CONTEXT_FEATURES] {
        let mut acc = [0.0; TRAFFIC_FEATURES + CONTEXT_FEATURES];
        if self.is_empty() {
            return acc;
        }
        for w in &self.windows {
            for (a, s) in acc.iter_mut().zip(w.series()) {
                *a += s.iter().sum::<f64>() / STEPS as f64;
            }
            for (a, c) in acc[TRAFFIC_FEATURES..].iter_mut().zip(w.context()) {
                *a += c;
            }
        }
        acc.iter_mut().for_each(|a| *a /= self.len() as f64);
        acc
    }
}

/// Numeric samples in the 70-value feature layout (typically scaled).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl FeatureDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, features: Vec<f64>, label: u8) {
        self.features.push(features);
        self.labels.push(label);
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (pos, self.len() - pos)
    }
}
