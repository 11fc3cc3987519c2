//! Run configuration: a flat `key = value` file with dotted section keys.
//!
//! ```text
//! # comments start with '#'
//! network.cell = gru
//! network.layers = 16, 8
//! train.epochs = 300
//! ```
//!
//! Unset keys keep their defaults. Layer widths and epochs default per
//! cell kind to the reference architectures.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::dataio::{GeneratorConfig, STEP_DIM};
use crate::error::{Error, Result};
use crate::evaluation::{default_threshold_grid, validate_grid};
use crate::fsutil;
use crate::numerics::ActivationKind;
use crate::recurrent::{CellKind, NetworkSpec};
use crate::sampling::SmoteConfig;
use crate::training::TrainConfig;

pub const LSTM_LAYERS: [usize; 9] = [30, 50, 60, 80, 50, 40, 30, 20, 10];
pub const GRU_LAYERS: [usize; 9] = [50, 70, 90, 110, 100, 80, 60, 40, 20];
pub const LSTM_EPOCHS: usize = 2500;
pub const GRU_EPOCHS: usize = 4000;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.65;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub cell: CellKind,
    pub layers: Vec<usize>,
    pub activation: ActivationKind,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub smote: SmoteConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::for_cell(CellKind::Lstm)
    }
}

pub fn default_layers(cell: CellKind) -> Vec<usize> {
    match cell {
        CellKind::Lstm => LSTM_LAYERS.to_vec(),
        CellKind::Gru => GRU_LAYERS.to_vec(),
    }
}

pub fn default_epochs(cell: CellKind) -> usize {
    match cell {
        CellKind::Lstm => LSTM_EPOCHS,
        CellKind::Gru => GRU_EPOCHS,
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| {
        Error::invalid(format!(
            "config line {line}: cannot parse '{value}' for {key}"
        ))
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| parse_value(key, v.trim(), line))
        .collect()
}

impl RunConfig {
    pub fn for_cell(cell: CellKind) -> Self {
        RunConfig {
            generator: GeneratorConfig::default(),
            cell,
            layers: default_layers(cell),
            activation: ActivationKind::Tanh,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            split_seed: 1,
            smote: SmoteConfig::default(),
            train: TrainConfig {
                epochs: default_epochs(cell),
                ..TrainConfig::default()
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| {
                Error::invalid(format!("config line {line}: expected 'key = value'"))
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if let Some((_, first)) = entries.get(&k) {
                return Err(Error::invalid(format!(
                    "config line {line}: {k} already set on line {first}"
                )));
            }
            entries.insert(k, (v, line));
        }

        // cell kind decides the remaining defaults
        let cell = match entries.get("network.cell") {
            Some((v, line)) => parse_value("network.cell", v, *line)?,
            None => CellKind::Lstm,
        };
        let mut cfg = RunConfig::for_cell(cell);
        for (key, (v, line)) in &entries {
            let (k, line) = (key.as_str(), *line);
            let g = &mut cfg.generator;
            match k {
                "network.cell" => {}
                "network.layers" => cfg.layers = parse_list(k, v, line)?,
                "network.activation" => cfg.activation = parse_value(k, v, line)?,
                "generator.n_accident" => g.n_accident = parse_value(k, v, line)?,
                "generator.n_nonaccident" => g.n_nonaccident = parse_value(k, v, line)?,
                "generator.speed_mean" => g.speed_mean = parse_value(k, v, line)?,
                "generator.occupancy_mean" => g.occupancy_mean = parse_value(k, v, line)?,
                "generator.volume_mean" => g.volume_mean = parse_value(k, v, line)?,
                "generator.baseline_spread" => g.baseline_spread = parse_value(k, v, line)?,
                "generator.divergence_rate" => g.divergence_rate = parse_value(k, v, line)?,
                "generator.occupancy_response" => g.occupancy_response = parse_value(k, v, line)?,
                "generator.volume_response" => g.volume_response = parse_value(k, v, line)?,
                "generator.noise_scale" => g.noise_scale = parse_value(k, v, line)?,
                "generator.seed" => g.seed = parse_value(k, v, line)?,
                "split.train_fraction" => cfg.train_fraction = parse_value(k, v, line)?,
                "split.seed" => cfg.split_seed = parse_value(k, v, line)?,
                "smote.k_neighbors" => cfg.smote.k_neighbors = parse_value(k, v, line)?,
                "smote.target_ratio" => cfg.smote.target_ratio = parse_value(k, v, line)?,
                "smote.seed" => cfg.smote.seed = parse_value(k, v, line)?,
                "train.epochs" => cfg.train.epochs = parse_value(k, v, line)?,
                "train.batch_size" => cfg.train.batch_size = parse_value(k, v, line)?,
                "train.learning_rate" => cfg.train.learning_rate = parse_value(k, v, line)?,
                "train.clip_norm" => cfg.train.clip_norm = parse_value(k, v, line)?,
                "train.seed" => cfg.train.seed = parse_value(k, v, line)?,
                "threshold.grid" => {
                    cfg.train.threshold_grid = if v == "default" {
                        default_threshold_grid()
                    } else {
                        parse_list(k, v, line)?
                    }
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "config line {line}: unknown key '{k}'"
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fsutil::read_to_string(path)?)
    }

    /// Load `path` if given, otherwise defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Replace every seed with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.generator.seed = seed;
        self.split_seed = seed;
        self.smote.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.network_spec()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "split.train_fraction must lie in (0,1), got {}",
                self.train_fraction
            )));
        }
        self.train.validate()?;
        validate_grid(&self.train.threshold_grid)
    }

    pub fn network_spec(&self) -> Result<NetworkSpec> {
        Ok(NetworkSpec::new(self.cell, self.layers.clone(), STEP_DIM)?
            .with_activation(self.activation))
    }

    /// Canonical text form; `parse(render())` yields the same config.
    pub fn render(&self) -> String {
        let g = &self.generator;
        let join = |v: &[usize]| {
            v.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        };
        let grid = self
            .train
            .threshold_grid
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "network.cell = {}\n\
             network.layers = {}\n\
             network.activation = {}\n\
             generator.n_accident = {}\n\
             generator.n_nonaccident = {}\n\
             generator.speed_mean = {}\n\
             generator.occupancy_mean = {}\n\
             generator.volume_mean = {}\n\
             generator.baseline_spread = {}\n\
             generator.divergence_rate = {}\n\
             generator.occupancy_response = {}\n\
             generator.volume_response = {}\n\
             generator.noise_scale = {}\n\
             generator.seed = {}\n\
             split.train_fraction = {}\n\
             split.seed = {}\n\
             smote.k_neighbors = {}\n\
             smote.target_ratio = {}\n\
             smote.seed = {}\n\
             train.epochs = {}\n\
             train.batch_size = {}\n\
             train.learning_rate = {}\n\
             train.clip_norm = {}\n\
             train.seed = {}\n\
             threshold.grid = {}\n",
            self.cell,
            join(&self.layers),
            self.activation.name(),
            g.n_accident,
            g.n_nonaccident,
            g.speed_mean,
            g.occupancy_mean,
            g.volume_mean,
            g.baseline_spread,
            g.divergence_rate,
            g.occupancy_response,
            g.volume_response,
            g.noise_scale,
            g.seed,
            self.train_fraction,
            self.split_seed,
            self.smote.k_neighbors,
            self.smote.target_ratio,
            self.smote.seed,
            self.train.epochs,
            self.train.batch_size,
            self.train.learning_rate,
            self.train.clip_norm,
            self.train.seed,
            grid,
        )
    }
}
