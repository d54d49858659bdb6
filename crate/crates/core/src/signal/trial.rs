use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SignalError;

/// Sampling geometry shared by every trial of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub n_channels: usize,
    pub sample_rate_hz: f64,
    pub epoch_len_samples: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            n_channels: 8,
            sample_rate_hz: 250.0,
            epoch_len_samples: 250,
        }
    }
}

impl AcquisitionConfig {
    pub fn new(n_channels: usize, sample_rate_hz: f64, epoch_len_samples: usize) -> Result<Self, SignalError> {
        let cfg = Self {
            n_channels,
            sample_rate_hz,
            epoch_len_samples,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.n_channels < 1 {
            return Err(SignalError::InvalidConfig("n_channels must be >= 1".into()));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(SignalError::InvalidConfig("sample_rate_hz must be positive".into()));
        }
        if self.epoch_len_samples < 2 {
            return Err(SignalError::InvalidConfig("epoch_len_samples must be >= 2".into()));
        }
        Ok(())
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }
}

/// One multi-channel epoch, channels in rows and time in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EegTrial {
    samples: DMatrix<f64>,
    config: AcquisitionConfig,
    pub true_class: Option<usize>,
}

impl EegTrial {
    pub fn new(
        samples: DMatrix<f64>,
        config: AcquisitionConfig,
        true_class: Option<usize>,
    ) -> Result<Self, SignalError> {
        config.validate()?;
        if samples.nrows() != config.n_channels || samples.ncols() != config.epoch_len_samples {
            return Err(SignalError::ShapeMismatch {
                expected: (config.n_channels, config.epoch_len_samples),
                actual: (samples.nrows(), samples.ncols()),
            });
        }
        if let Some((idx, _)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let nrows = samples.nrows();
            return Err(SignalError::NonFinite {
                channel: idx % nrows,
                sample: idx / nrows,
            });
        }
        Ok(Self {
            samples,
            config,
            true_class,
        })
    }

    pub fn zeros(config: AcquisitionConfig) -> Self {
        Self {
            samples: DMatrix::zeros(config.n_channels, config.epoch_len_samples),
            config,
            true_class: None,
        }
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn config(&self) -> &AcquisitionConfig {
        &self.config
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn into_samples(self) -> DMatrix<f64> {
        self.samples
    }

    /// Same trial with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: &self.samples * factor,
            config: self.config,
            true_class: self.true_class,
        }
    }

    /// Replaces the sample matrix, keeping metadata. Shape and finiteness are
    /// re-checked.
    pub fn with_samples(&self, samples: DMatrix<f64>) -> Result<Self, SignalError> {
        Self::new(samples, self.config, self.true_class)
    }

    pub fn to_file(&self) -> TrialFile {
        TrialFile {
            schema_version: TRIAL_SCHEMA_VERSION,
            sample_rate_hz: self.config.sample_rate_hz,
            n_channels: self.config.n_channels,
            samples: self.samples.row_iter().map(|r| r.iter().copied().collect()).collect(),
            true_class: self.true_class,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("trial serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, SignalError> {
        let file: TrialFile = serde_json::from_str(text).map_err(|e| SignalError::Format(e.to_string()))?;
        file.into_trial()
    }
}

pub const TRIAL_SCHEMA_VERSION: u32 = 1;

/// JSON container for a single trial.
///
/// ```json
/// {"schema_version":1,"sample_rate_hz":250.0,"n_channels":2,
///  "samples":[[0.1,0.2],[0.3,0.4]],"true_class":0}
/// ```
///
/// `samples` is indexed `[channel][time]`; the epoch length is the length of
/// the inner arrays, which must all agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFile {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub sample_rate_hz: f64,
    pub n_channels: usize,
    pub samples: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_class: Option<usize>,
}

fn default_schema_version() -> u32 {
    TRIAL_SCHEMA_VERSION
}

impl TrialFile {
    pub fn into_trial(self) -> Result<EegTrial, SignalError> {
        if self.schema_version != TRIAL_SCHEMA_VERSION {
            return Err(SignalError::Format(format!(
                "unsupported trial schema_version {}",
                self.schema_version
            )));
        }
        if self.samples.len() != self.n_channels {
            return Err(SignalError::Format(format!(
                "n_channels is {} but samples has {} rows",
                self.n_channels,
                self.samples.len()
            )));
        }
        let n_p = self.samples.first().map_or(0, Vec::len);
        if let Some(ch) = self.samples.iter().position(|r| r.len() != n_p) {
            return Err(SignalError::Format(format!(
                "channel {ch} has {} samples, expected {n_p}",
                self.samples[ch].len()
            )));
        }
        let config = AcquisitionConfig::new(self.n_channels, self.sample_rate_hz, n_p)?;
        let samples = DMatrix::from_fn(self.n_channels, n_p, |r, c| self.samples[r][c]);
        EegTrial::new(samples, config, self.true_class)
    }
}
