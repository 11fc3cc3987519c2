//! Versioned JSON model checkpoints.
//!
//! Serialization is canonical: struct field order is fixed and floats are
//! written in shortest round-trip form, so save → load → save reproduces
//! the file byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{ScalerParams, FEATURES, STEP_DIM};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::recurrent::{NetworkParams, NetworkSpec};
use crate::training::TrainedModel;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs_run: usize,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub spec: NetworkSpec,
    pub threshold: f64,
    pub metadata: TrainingMetadata,
    pub scaler: ScalerParams,
    pub params: NetworkParams,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl ModelCheckpoint {
    pub fn from_model(model: &TrainedModel, seed: u64) -> Self {
        ModelCheckpoint {
            format_version: CHECKPOINT_VERSION,
            spec: model.spec.clone(),
            threshold: model.threshold,
            metadata: TrainingMetadata {
                seed,
                epochs_run: model.training_log.len(),
                final_loss: model.training_log.last().copied().unwrap_or(0.0),
            },
            scaler: model.scaler.clone(),
            params: model.params.clone(),
        }
    }

    pub fn into_model(self) -> TrainedModel {
        TrainedModel {
            spec: self.spec,
            params: self.params,
            scaler: self.scaler,
            threshold: self.threshold,
            training_log: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: self.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if self.spec.input_dim != STEP_DIM {
            return Err(Error::shape(
                "checkpoint",
                format!("input_dim {STEP_DIM}"),
                self.spec.input_dim,
            ));
        }
        self.params.validate(&self.spec)?;
        if self.params.flatten().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("checkpoint contains non-finite parameters"));
        }
        self.scaler.validate()?;
        debug_assert_eq!(self.scaler.min.len(), FEATURES);
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!(
                "checkpoint threshold {} outside (0,1)",
                self.threshold
            )));
        }
        if !self.metadata.final_loss.is_finite() {
            return Err(Error::invalid("checkpoint final_loss is not finite"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // check the version before the full schema so old files get a clear error
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.format_version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: probe.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let ck: ModelCheckpoint = serde_json::from_str(text)?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        fsutil::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fsutil::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrent::CellKind;

    fn sample(kind: CellKind) -> ModelCheckpoint {
        let spec = NetworkSpec::new(kind, vec![3, 2], STEP_DIM).unwrap();
        let scaler = ScalerParams {
            min: (0..FEATURES).map(|i| i as f64 * 0.1).collect(),
            max: (0..FEATURES).map(|i| i as f64 * 0.1 + 1.0 / 3.0).collect(),
        };
        let model = TrainedModel {
            params: NetworkParams::init(&spec, 17),
            spec,
            scaler,
            threshold: 0.37,
            training_log: vec![0.7, 0.1 + 0.2],
        };
        ModelCheckpoint::from_model(&model, 5)
    }

    #[test]
    fn text_roundtrip_is_byte_identical() {
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let ck = sample(kind);
            let a = ck.to_json().unwrap();
            let back = ModelCheckpoint::from_json(&a).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_json().unwrap(), a);
        }
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let ck = sample(CellKind::Gru);
        ck.save(&p).unwrap();
        let first = std::fs::read(&p).unwrap();
        ModelCheckpoint::load(&p).unwrap().save(&p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), first);
    }

    #[test]
    fn rejects_bad_documents() {
        let ck = sample(CellKind::Lstm);
        let json = ck.to_json().unwrap();
        let v2 = json.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(
            ModelCheckpoint::from_json(&v2),
            Err(Error::CheckpointVersion {
                found: 2,
                expected: 1
            })
        ));
        let bad_threshold = json.replacen("\"threshold\": 0.37", "\"threshold\": 1.5", 1);
        assert!(ModelCheckpoint::from_json(&bad_threshold).is_err());
        let extra = json.replacen("{", "{\n  \"surprise\": 1,", 1);
        assert!(ModelCheckpoint::from_json(&extra).is_err());
        let mut wrong = ck.clone();
        wrong.spec.layer_widths = vec![3, 3];
        assert!(ModelCheckpoint::from_json(&wrong.to_json().unwrap()).is_err());
        assert!(ModelCheckpoint::from_json("not json").is_err());
    }
}
