use std::path::{Path, PathBuf};

use bci_core::langmodel::Smoothing;
use bci_core::paradigm::{ParadigmPrefs, DEFAULT_BAND_HZ, DEFAULT_MIN_SEP_HZ};
use bci_core::signal::{AcquisitionConfig, Preprocessor};
use bci_gateway::GatewayConfig;
use serde::{Deserialize, Serialize};

use crate::engine::{SessionSettings, DEFAULT_MARGIN_THRESHOLD};

/// The `--config` file of `bci serve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub acquisition: AcquisitionConfig,
    pub band_hz: (f64, f64),
    pub min_sep_hz: f64,
    /// Decision-margin confirmation threshold.
    pub threshold: f64,
    pub gateway: GatewayConfig,
    pub language: String,
    /// Decoder model written by `bci calibrate`.
    pub model: Option<PathBuf>,
    pub synthesize_gaze_snr_db: Option<f64>,
    pub preprocessor: Option<Preprocessor>,
    /// One `<session id>.jsonl` event log per session when set.
    pub log_dir: Option<PathBuf>,
    pub lm_order: usize,
    pub lm_smoothing: Smoothing,
    pub max_blocks: usize,
    pub seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            acquisition: AcquisitionConfig::default(),
            band_hz: DEFAULT_BAND_HZ,
            min_sep_hz: DEFAULT_MIN_SEP_HZ,
            threshold: DEFAULT_MARGIN_THRESHOLD,
            gateway: GatewayConfig::default(),
            language: "en".into(),
            model: None,
            synthesize_gaze_snr_db: None,
            preprocessor: Some(Preprocessor::default()),
            log_dir: None,
            lm_order: 3,
            lm_smoothing: Smoothing::Laplace,
            max_blocks: 40,
            seed: 0,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.acquisition.validate().map_err(|e| e.to_string())?;
        if !(cfg.band_hz.0 > 0.0 && cfg.band_hz.0 < cfg.band_hz.1 && cfg.min_sep_hz > 0.0) {
            return Err(format!(
                "invalid band {:?} / min_sep_hz {}",
                cfg.band_hz, cfg.min_sep_hz
            ));
        }
        if cfg.threshold.is_nan() || cfg.threshold < 0.0 {
            return Err("threshold must be >= 0".into());
        }
        Ok(cfg)
    }

    pub fn settings(&self) -> SessionSettings {
        SessionSettings {
            language: self.language.clone(),
            margin_threshold: self.threshold,
            paradigm: ParadigmPrefs {
                band_hz: self.band_hz,
                min_sep_hz: self.min_sep_hz,
                ..ParadigmPrefs::default()
            },
            max_blocks: self.max_blocks,
            synthesize_gaze_snr_db: self.synthesize_gaze_snr_db,
            seed: self.seed,
            preprocessor: self.preprocessor.clone(),
        }
    }
}
