//! Window schema, CSV files, scaling, splitting and synthetic data.

mod csv_io;
mod generator;
mod raw;
mod scaler;
mod split;
mod window;

pub use csv_io::{dataset_header, load_csv, load_windows, read_windows, save_csv, write_windows};
pub use generator::{generate_synthetic, GeneratorConfig};
pub use raw::{
    aggregate_to_minutes, load_raw_csv, read_raw_csv, MinuteAggregate, RawDetectorReading,
    RAW_HEADER,
};
pub(crate) use scaler::pack_features;
pub use scaler::{apply_scaler, features_to_steps, fit_scaler, ScalerParams};
pub use split::{split, split_indices};
pub use window::{Dataset, FeatureDataset, Series, TrafficWindow, CONTEXT_NAMES, SERIES_NAMES};

/// One-minute timesteps per window (minutes −5…+5).
pub const STEPS: usize = 11;
/// Index of the case minute within a window.
pub const CASE_STEP: usize = 5;
/// Traffic series per timestep: speed, occupancy, volume at two detectors.
pub const TRAFFIC_FEATURES: usize = 6;
/// Static context values: weather, weekday, am_peak, pm_peak.
pub const CONTEXT_FEATURES: usize = 4;
/// Length of the flattened feature vector.
pub const FEATURES: usize = TRAFFIC_FEATURES * STEPS + CONTEXT_FEATURES;
/// Length of each per-timestep network input.
pub const STEP_DIM: usize = TRAFFIC_FEATURES + CONTEXT_FEATURES;
