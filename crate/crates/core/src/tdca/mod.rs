//! Task-discriminant component analysis.
//!
//! Calibration stacks each trial with delayed copies of itself, appends its
//! projection onto the sine/cosine subspace of its own stimulus frequency,
//! and learns one spatial filter bank shared by all classes via multi-class
//! Fisher discriminant analysis. Decoding correlates the filtered features of
//! a test trial against each class template.

mod augment;
mod decode;
mod eigen;
mod fit;
mod model_io;
mod objective;
mod projection;

pub use augment::{augment_delays, augment_secondary, AugmentedTrial};
pub use decode::{classify, classify_among, pearson, score, CorrelationVector, TargetDecision};
pub use eigen::{generalized_symmetric_eigen, GeneralizedEigen};
pub use fit::{fit, CalibrationSet, FitDiagnostics, ScatterMatrices, TdcaModel};
pub use model_io::{TdcaModelFile, MODEL_SCHEMA_VERSION};
pub use objective::{direct_sum_objective, DirectSumScatter};
pub use projection::{class_projection, ProjectionMatrix};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::SignalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdcaConfig {
    /// Number of delayed copies stacked under the original trial.
    pub delay_count: usize,
    pub n_harmonics: usize,
    /// Columns of the spatial filter bank that are kept.
    pub subspace_dim: usize,
    pub class_freqs_hz: Vec<f64>,
}

impl TdcaConfig {
    pub const DEFAULT_SUBSPACE_DIM: usize = 8;

    pub fn new(class_freqs_hz: Vec<f64>) -> Self {
        Self {
            delay_count: 2,
            n_harmonics: 5,
            subspace_dim: Self::DEFAULT_SUBSPACE_DIM,
            class_freqs_hz,
        }
    }

    pub fn feature_rows(&self, n_channels: usize) -> usize {
        (self.delay_count + 1) * n_channels
    }

    pub fn validate(&self, n_channels: usize, n_samples: usize) -> Result<(), TdcaError> {
        if self.class_freqs_hz.is_empty() {
            return Err(TdcaError::InvalidConfig("no class frequencies".into()));
        }
        if self.delay_count >= n_samples {
            return Err(TdcaError::DelayTooLong {
                delay: self.delay_count,
                n_samples,
            });
        }
        let rows = self.feature_rows(n_channels);
        if self.subspace_dim < 1 || self.subspace_dim > rows {
            return Err(TdcaError::InvalidConfig(format!(
                "subspace_dim {} outside 1..={rows}",
                self.subspace_dim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TdcaError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("delay {delay} must be shorter than the epoch ({n_samples} samples)")]
    DelayTooLong { delay: usize, n_samples: usize },
    #[error("reference at {freq_hz} Hz has rank {rank}, expected {expected}")]
    RankDeficient { freq_hz: f64, rank: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("class {class} has {count} calibration trials, need at least 2")]
    InsufficientTrials { class: usize, count: usize },
    #[error("invalid calibration set: {0}")]
    InvalidCalibration(String),
    #[error("trial does not match model: {0}")]
    ConfigMismatch(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("model format: {0}")]
    Format(String),
}
