//! Traffic accident detection from 11-minute loop-detector windows.
//!
//! Pipeline: synthetic or CSV windows ([`dataio`]) → min-max scaling →
//! SMOTE balancing ([`sampling`]) → stacked LSTM/GRU network trained with
//! Adam on binary cross-entropy ([`recurrent`], [`training`]) → threshold,
//! detection rate, false-alarm rate and ROC/AUC ([`evaluation`]).

pub mod cli;
pub mod dataio;
pub mod error;
pub mod evaluation;
mod fsutil;
pub mod numerics;
pub mod recurrent;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
pub use recurrent::{CellKind, NetworkParams, NetworkSpec};
pub use training::{classify, predict, train, TrainConfig, TrainedModel};
