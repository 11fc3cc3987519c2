use serde::{Deserialize, Serialize};

use super::window::{Dataset, FeatureDataset, TrafficWindow};
use super::{CONTEXT_FEATURES, FEATURES, STEPS, STEP_DIM, TRAFFIC_FEATURES};
use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Per-coordinate min/max over the 70-value feature layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_scaler(train: &Dataset) -> Result<ScalerParams> {
    if train.is_empty() {
        return Err(Error::invalid("cannot fit scaler on an empty dataset"));
    }
    let mut min = vec![f64::INFINITY; FEATURES];
    let mut max = vec![f64::NEG_INFINITY; FEATURES];
    for w in &train.windows {
        for (i, v) in w.to_features().into_iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    Ok(ScalerParams { min, max })
}

impl ScalerParams {
    pub fn validate(&self) -> Result<()> {
        if self.min.len() != FEATURES || self.max.len() != FEATURES {
            return Err(Error::shape(
                "scaler",
                format!("{FEATURES} coordinates"),
                format!("min {} / max {}", self.min.len(), self.max.len()),
            ));
        }
        for i in 0..FEATURES {
            let (lo, hi) = (self.min[i], self.max[i]);
            if !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(Error::invalid(format!(
                    "scaler coordinate {i}: min {lo} max {hi}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_constant(&self, i: usize) -> bool {
        self.max[i] == self.min[i]
    }

    pub fn constant_coordinates(&self) -> Vec<usize> {
        (0..self.min.len())
            .filter(|&i| self.is_constant(i))
            .collect()
    }

    /// Min-max scale a 70-value feature vector. Constant coordinates map to
    /// 0; values outside the fitted range are not clipped.
    pub fn scale_features(&self, features: &[f64]) -> Result<Vector> {
        if features.len() != self.min.len() {
            return Err(Error::shape(
                "scale_features",
                format!("{} coordinates", self.min.len()),
                format!("{} values", features.len()),
            ));
        }
        Ok(features
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if self.is_constant(i) {
                    0.0
                } else {
                    (x - self.min[i]) / (self.max[i] - self.min[i])
                }
            })
            .collect())
    }

    pub fn scale_window(&self, w: &TrafficWindow) -> Result<Vector> {
        self.validate()?;
        self.scale_features(&w.to_features())
    }

    pub fn scale_dataset(&self, ds: &Dataset) -> Result<FeatureDataset> {
        self.validate()?;
        let mut out = FeatureDataset::default();
        for w in &ds.windows {
            out.push(self.scale_features(&w.to_features())?, w.label);
        }
        Ok(out)
    }
}

/// Scale a window and lay it out as 11 timestep vectors of
/// `[speed_up, speed_down, occ_up, occ_down, vol_up, vol_down, weather,
/// weekday, am_peak, pm_peak]`.
pub fn apply_scaler(s: &ScalerParams, w: &TrafficWindow) -> Result<Vec<Vector>> {
    let scaled = s.scale_window(w)?;
    Ok(features_to_steps(&scaled))
}

/// Re-arrange a 70-value feature vector into 11 timestep vectors of length 10.
pub fn features_to_steps(features: &[f64]) -> Vec<Vector> {
    let packed = pack_features(features);
    packed.chunks_exact(STEP_DIM).map(<[f64]>::to_vec).collect()
}

/// Same as [`features_to_steps`] but as one `11 × 10` row-major buffer.
pub(crate) fn pack_features(features: &[f64]) -> Vec<f64> {
    debug_assert_eq!(features.len(), FEATURES);
    let blocks = TRAFFIC_FEATURES;
    let context = &features[blocks * STEPS..];
    let mut out = Vec::with_capacity(STEPS * STEP_DIM);
    for t in 0..STEPS {
        for b in 0..blocks {
            out.push(features[b * STEPS + t]);
        }
        out.extend_from_slice(&context[..CONTEXT_FEATURES]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::window::fixtures::flat_window;
    use proptest::prelude::*;

    #[test]
    fn single_window_is_all_constant() {
        let s = fit_scaler(&Dataset::new(vec![flat_window(50.0, 0)])).unwrap();
        assert_eq!(s.constant_coordinates().len(), FEATURES);
        let steps = apply_scaler(&s, &flat_window(70.0, 1)).unwrap();
        assert!(steps.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn min_max_from_two_windows() {
        let s = fit_scaler(&Dataset::new(vec![
            flat_window(40.0, 0),
            flat_window(60.0, 1),
        ]))
        .unwrap();
        assert_eq!((s.min[0], s.max[0]), (40.0, 60.0));
        assert!(s.is_constant(2 * STEPS));
        let scaled = s.scale_window(&flat_window(50.0, 0)).unwrap();
        assert_eq!(scaled[0], 0.5);
        assert_eq!(s.scale_window(&flat_window(40.0, 0)).unwrap()[0], 0.0);
        assert_eq!(s.scale_window(&flat_window(60.0, 0)).unwrap()[0], 1.0);
    }

    #[test]
    fn out_of_range_passes_through() {
        let mut s = ScalerParams {
            min: vec![0.0; FEATURES],
            max: vec![100.0; FEATURES],
        };
        s.min[66] = 1.0;
        s.max[66] = 4.0;
        let scaled = s.scale_features(&[120.0; FEATURES]).unwrap();
        assert!((scaled[0] - 1.2).abs() < 1e-15);
        let mid = s.scale_features(&[50.0; FEATURES]).unwrap();
        assert_eq!(mid[5], 0.5);
    }

    #[test]
    fn step_layout() {
        let mut w = flat_window(50.0, 0);
        for t in 0..STEPS {
            w.speed_up[t] = t as f64;
            w.vol_down[t] = 100.0 + t as f64;
        }
        w.weather = 2;
        let steps = features_to_steps(&w.to_features());
        assert_eq!(steps.len(), STEPS);
        assert_eq!(steps[4].len(), STEP_DIM);
        assert_eq!(steps[4][0], 4.0);
        assert_eq!(steps[4][5], 104.0);
        assert_eq!(&steps[9][6..], &[2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn scaler_validation() {
        assert!(fit_scaler(&Dataset::default()).is_err());
        let bad = ScalerParams {
            min: vec![0.0; 3],
            max: vec![1.0; 3],
        };
        assert!(apply_scaler(&bad, &flat_window(1.0, 0)).is_err());
    }

    proptest! {
        #[test]
        fn fit_set_scales_into_unit_interval(speeds in prop::collection::vec(0.0..120.0f64, 1..20)) {
            let ds = Dataset::new(speeds.iter().enumerate().map(|(i, &s)| {
                let mut w = flat_window(s, 0);
                w.occ_up[i % STEPS] = s / 2.0;
                w
            }).collect());
            let s = fit_scaler(&ds).unwrap();
            for w in &ds.windows {
                for v in s.scale_window(w).unwrap() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
