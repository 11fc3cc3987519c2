//! Loss, the mini-batch training loop, and thresholded prediction.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{
    pack_features, FeatureDataset, ScalerParams, TrafficWindow, FEATURES, STEPS, STEP_DIM,
};
use crate::error::{Error, Result};
use crate::evaluation::{default_threshold_grid, threshold_sweep, validate_grid};
use crate::numerics::{clip_global_norm, AdamState};
use crate::recurrent::{forward_packed, GradientBuffer, NetworkParams, NetworkSpec};

const P_CLAMP: f64 = 1e-12;

/// Binary cross-entropy with `p` clamped to `[1e-12, 1 - 1e-12]`.
pub fn binary_crossentropy(p: f64, y: u8) -> f64 {
    let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Threshold used when the validation slice lacks one of the classes.
pub const FALLBACK_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per mini-batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Maximum global L2 norm of a batch gradient.
    pub clip_norm: f64,
    pub seed: u64,
    pub threshold_grid: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2500,
            batch_size: 2000,
            learning_rate: AdamState::DEFAULT_LEARNING_RATE,
            clip_norm: 5.0,
            seed: 7,
            threshold_grid: default_threshold_grid(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return Err(Error::invalid(format!(
                "clip_norm must be positive, got {}",
                self.clip_norm
            )));
        }
        validate_grid(&self.threshold_grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub scaler: ScalerParams,
    pub threshold: f64,
    /// Mean loss of every epoch.
    pub training_log: Vec<f64>,
}

impl TrainedModel {
    /// Probability for an already-scaled 70-value feature vector.
    pub fn predict_features(&self, features: &[f64]) -> Result<f64> {
        if features.len() != FEATURES {
            return Err(Error::shape(
                "predict",
                format!("{FEATURES} features"),
                features.len(),
            ));
        }
        Ok(forward_packed(
            &self.params,
            &pack_features(features),
            STEPS,
        ))
    }
}

/// Train a network on a scaled (and usually SMOTE-balanced) dataset.
///
/// The last 10% of the shuffled samples are held out from gradient steps
/// and used only to pick the decision threshold.
pub fn train(
    data: &FeatureDataset,
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    scaler: ScalerParams,
) -> Result<TrainedModel> {
    cfg.validate()?;
    spec.validate()?;
    if spec.input_dim != STEP_DIM {
        return Err(Error::shape(
            "train",
            format!("input_dim {STEP_DIM}"),
            spec.input_dim,
        ));
    }
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if data.features.len() != data.labels.len() {
        return Err(Error::shape(
            "train",
            data.features.len(),
            data.labels.len(),
        ));
    }
    if let Some(i) = data.labels.iter().position(|&l| l > 1) {
        return Err(Error::invalid(format!(
            "label {} at {i} is not binary",
            data.labels[i]
        )));
    }
    if let Some(i) = data.features.iter().position(|f| f.len() != FEATURES) {
        return Err(Error::shape(
            "train",
            format!("{FEATURES} features"),
            format!("{} at row {i}", data.features[i].len()),
        ));
    }
    if cfg.batch_size > data.len() {
        return Err(Error::invalid(format!(
            "batch_size {} exceeds training set size {}",
            cfg.batch_size,
            data.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = NetworkParams::init(spec, rng.next_u64());

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = data.len() / 10;
    let (mut fit, val) = {
        let (a, b) = order.split_at(data.len() - n_val);
        (a.to_vec(), b.to_vec())
    };
    let packed: Vec<Vec<f64>> = data.features.iter().map(|f| pack_features(f)).collect();
    let batch = cfg.batch_size.min(fit.len());

    let mut flat = params.flatten();
    let mut adam = AdamState::new(flat.len(), cfg.learning_rate);
    let mut buffer = GradientBuffer::new(spec);
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        fit.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in fit.chunks(batch).enumerate() {
            let mut batch_loss = 0.0;
            for &i in chunk {
                batch_loss += buffer.add(&params, &packed[i], STEPS, data.labels[i]);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: b + 1,
                });
            }
            epoch_loss += batch_loss;
            let mut grads = buffer.take_mean();
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam.step(&mut flat, &grads)?;
            params.assign_flat(&flat)?;
        }
        let mean = epoch_loss / fit.len() as f64;
        debug!("epoch {} loss {mean:.6}", epoch + 1);
        log.push(mean);
    }
    info!(
        "trained {} epochs, final loss {:.6}",
        cfg.epochs,
        log.last().copied().unwrap_or(f64::NAN)
    );

    let val_scores: Vec<f64> = val
        .iter()
        .map(|&i| forward_packed(&params, &packed[i], STEPS))
        .collect();
    let val_labels: Vec<u8> = val.iter().map(|&i| data.labels[i]).collect();
    let has_both = val_labels.contains(&0) && val_labels.contains(&1);
    let threshold = if has_both {
        threshold_sweep(&val_scores, &val_labels, &cfg.threshold_grid)?.0
    } else {
        info!("validation slice lacks a class; using threshold {FALLBACK_THRESHOLD}");
        FALLBACK_THRESHOLD
    };

    Ok(TrainedModel {
        spec: spec.clone(),
        params,
        scaler,
        threshold,
        training_log: log,
    })
}

pub fn predict(model: &TrainedModel, window: &TrafficWindow) -> Result<f64> {
    window.validate()?;
    let scaled = model.scaler.scale_window(window)?;
    model.predict_features(&scaled)
}

/// 1 iff the predicted probability reaches the model threshold.
pub fn classify(model: &TrainedModel, window: &TrafficWindow) -> Result<u8> {
    Ok(u8::from(predict(model, window)? >= model.threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::features_to_steps;
    use crate::dataio::{fit_scaler, Dataset};
    use crate::recurrent::{forward_sequence, CellKind};

    /// Accident windows carry a constant upstream/downstream speed gap.
    fn toy(gap: f64, n_each: usize) -> Dataset {
        let mut windows = Vec::new();
        for i in 0..2 * n_each {
            let accident = i < n_each;
            let base = 40.0 + (i % 7) as f64 * 3.0;
            let g = if accident { gap } else { 0.0 };
            let mut w = crate::dataio::TrafficWindow {
                speed_up: [base - g / 2.0; STEPS],
                speed_down: [base + g / 2.0; STEPS],
                occ_up: [10.0 + (i % 3) as f64; STEPS],
                occ_down: [10.0; STEPS],
                vol_up: [18.0; STEPS],
                vol_down: [18.0 + (i % 5) as f64; STEPS],
                weather: 1 + (i % 4) as u8,
                weekday: i % 2 == 0,
                am_peak: false,
                pm_peak: i % 6 == 0,
                label: u8::from(accident),
            };
            w.speed_up[0] += 0.1 * (i % 4) as f64;
            windows.push(w);
        }
        Dataset::new(windows)
    }

    fn small_cfg(epochs: usize, batch: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: batch,
            learning_rate: 0.01,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn crossentropy_values() {
        assert!((binary_crossentropy(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((binary_crossentropy(0.9, 0) - std::f64::consts::LN_10).abs() < 1e-9);
        assert!(binary_crossentropy(1.0, 1) < 2e-12);
        assert!(binary_crossentropy(0.0, 1).is_finite());
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let l = binary_crossentropy(i as f64 / 100.0, 1);
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn separable_toy_reaches_full_training_accuracy() {
        let raw = toy(30.0, 50);
        let scaler = fit_scaler(&raw).unwrap();
        let data = scaler.scale_dataset(&raw).unwrap();
        let spec = NetworkSpec::new(CellKind::Lstm, vec![8], STEP_DIM).unwrap();
        let model = train(&data, &spec, &small_cfg(200, 16), scaler).unwrap();
        for w in &raw.windows {
            assert_eq!(classify(&model, w).unwrap(), w.label);
        }
        let n = model.training_log.len();
        assert!(model.training_log[n - 1] < model.training_log[0]);
    }

    #[test]
    fn gru_learns_toy_too() {
        let raw = toy(30.0, 30);
        let scaler = fit_scaler(&raw).unwrap();
        let data = scaler.scale_dataset(&raw).unwrap();
        let spec = NetworkSpec::new(CellKind::Gru, vec![6], STEP_DIM).unwrap();
        let model = train(&data, &spec, &small_cfg(150, 16), scaler).unwrap();
        let correct = raw
            .windows
            .iter()
            .filter(|w| classify(&model, w).unwrap() == w.label)
            .count();
        assert_eq!(correct, raw.len());
    }

    #[test]
    fn single_class_degenerate() {
        let mut raw = toy(0.0, 20);
        for w in &mut raw.windows {
            w.label = 0;
        }
        let scaler = fit_scaler(&raw).unwrap();
        let data = scaler.scale_dataset(&raw).unwrap();
        let spec = NetworkSpec::new(CellKind::Lstm, vec![4], STEP_DIM).unwrap();
        let model = train(&data, &spec, &small_cfg(30, 8), scaler).unwrap();
        assert_eq!(model.threshold, FALLBACK_THRESHOLD);
        for w in &raw.windows {
            assert!(predict(&model, w).unwrap() <= 0.5);
        }
        assert!(model.training_log.last().unwrap() < &model.training_log[0]);
    }

    #[test]
    fn deterministic_and_input_untouched() {
        let raw = toy(20.0, 15);
        let scaler = fit_scaler(&raw).unwrap();
        let data = scaler.scale_dataset(&raw).unwrap();
        let before = data.clone();
        let spec = NetworkSpec::new(CellKind::Gru, vec![4, 3], STEP_DIM).unwrap();
        let a = train(&data, &spec, &small_cfg(5, 7), scaler.clone()).unwrap();
        let b = train(&data, &spec, &small_cfg(5, 7), scaler.clone()).unwrap();
        assert_eq!(a, b);
        assert_eq!(data, before);
        let c = train(
            &data,
            &spec,
            &TrainConfig {
                seed: 12,
                ..small_cfg(5, 7)
            },
            scaler,
        )
        .unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn predict_composes_scaler_and_network() {
        let raw = toy(10.0, 5);
        let scaler = fit_scaler(&raw).unwrap();
        let spec = NetworkSpec::new(CellKind::Lstm, vec![3], STEP_DIM).unwrap();
        let model = TrainedModel {
            params: NetworkParams::init(&spec, 5),
            spec: spec.clone(),
            scaler: scaler.clone(),
            threshold: 0.5,
            training_log: vec![],
        };
        for w in &raw.windows {
            let manual = forward_sequence(
                &spec,
                &model.params,
                &features_to_steps(&scaler.scale_window(w).unwrap()),
            )
            .unwrap();
            let p = predict(&model, w).unwrap();
            assert_eq!(p, manual);
            assert_eq!(p, predict(&model, w).unwrap());
            assert_eq!(classify(&model, w).unwrap(), u8::from(p >= 0.5));
        }
    }

    #[test]
    fn zero_model_boundary() {
        let raw = toy(10.0, 2);
        let scaler = fit_scaler(&raw).unwrap();
        let spec = NetworkSpec::new(CellKind::Lstm, vec![3], STEP_DIM).unwrap();
        let mut model = TrainedModel {
            params: NetworkParams::zeros(&spec),
            spec,
            scaler,
            threshold: 0.5,
            training_log: vec![],
        };
        let w = &raw.windows[0];
        assert_eq!(predict(&model, w).unwrap(), 0.5);
        assert_eq!(classify(&model, w).unwrap(), 1);
        model.threshold = 0.99;
        assert_eq!(classify(&model, w).unwrap(), 0);
    }

    #[test]
    fn bad_inputs() {
        let raw = toy(10.0, 3);
        let scaler = fit_scaler(&raw).unwrap();
        let data = scaler.scale_dataset(&raw).unwrap();
        let spec = NetworkSpec::new(CellKind::Lstm, vec![3], STEP_DIM).unwrap();
        assert!(train(
            &FeatureDataset::default(),
            &spec,
            &small_cfg(1, 1),
            scaler.clone()
        )
        .is_err());
        assert!(train(&data, &spec, &small_cfg(1, 100), scaler.clone()).is_err());
        assert!(train(&data, &spec, &small_cfg(0, 1), scaler.clone()).is_err());
        let wrong = NetworkSpec::new(CellKind::Lstm, vec![3], 4).unwrap();
        assert!(train(&data, &wrong, &small_cfg(1, 1), scaler).is_err());
    }
}
