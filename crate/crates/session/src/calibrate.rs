use bci_core::paradigm::{allocate_frequencies, band_capacity};
use bci_core::signal::{
    synthesize_trial, AcquisitionConfig, EegTrial, PreprocessError, Preprocessor, SignalError, StimulusSpec,
};
use bci_core::tdca::{classify, fit, CalibrationSet, TdcaConfig, TdcaError, TdcaModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationPlan {
    pub acquisition: AcquisitionConfig,
    pub class_freqs_hz: Vec<f64>,
    pub trials_per_class: usize,
    pub snr_db: f64,
    pub delay_count: usize,
    pub n_harmonics: usize,
    pub seed: u64,
    /// Applied to every calibration trial; decoding must use the same chain.
    pub preprocessor: Option<Preprocessor>,
}

impl Default for CalibrationPlan {
    fn default() -> Self {
        Self {
            acquisition: AcquisitionConfig::default(),
            class_freqs_hz: model_grid((8.0, 15.8), 0.2),
            trials_per_class: 4,
            snr_db: 10.0,
            delay_count: 2,
            n_harmonics: 5,
            seed: 1,
            preprocessor: Some(Preprocessor::default()),
        }
    }
}

/// Every frequency a paradigm over `band` with spacing `min_sep` can use.
pub fn model_grid(band: (f64, f64), min_sep: f64) -> Vec<f64> {
    let n = band_capacity(band, min_sep);
    allocate_frequencies(n, band, min_sep).unwrap_or_default()
}

/// Seed of trial `i` of class `class` in a calibration run.
fn trial_seed(seed: u64, class: usize, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((class as u64) << 32 | i as u64)
}

pub fn synthetic_calibration(plan: &CalibrationPlan) -> Result<CalibrationSet, TdcaError> {
    let spec = StimulusSpec::new(plan.class_freqs_hz.clone(), plan.acquisition.n_channels, plan.snr_db);
    let mut trials = Vec::with_capacity(plan.class_freqs_hz.len() * plan.trials_per_class);
    for i in 0..plan.trials_per_class {
        for c in 0..plan.class_freqs_hz.len() {
            let t = synthesize_trial(&spec, &plan.acquisition, c, trial_seed(plan.seed, c, i))?;
            trials.push(preprocess(plan.preprocessor.as_ref(), t)?);
        }
    }
    CalibrationSet::new(trials, plan.class_freqs_hz.len())
}

pub fn preprocess(pre: Option<&Preprocessor>, trial: EegTrial) -> Result<EegTrial, TdcaError> {
    match pre {
        None => Ok(trial),
        Some(p) => p.run(&trial).map_err(|e| match e {
            PreprocessError::Signal(s) => TdcaError::Signal(s),
            PreprocessError::Artifact(r) => TdcaError::InvalidCalibration(format!("artifact: {r:?}")),
        }),
    }
}

pub fn calibrate(plan: &CalibrationPlan) -> Result<TdcaModel, TdcaError> {
    let calib = synthetic_calibration(plan)?;
    let cfg = TdcaConfig {
        delay_count: plan.delay_count,
        n_harmonics: plan.n_harmonics,
        ..TdcaConfig::new(plan.class_freqs_hz.clone())
    };
    fit(&calib, &cfg)
}

/// A trial of a subject gazing at `freq_hz`, for a model whose grid contains
/// that frequency.
pub fn gaze_trial(model: &TdcaModel, freq_hz: f64, snr_db: f64, seed: u64) -> Result<EegTrial, SignalError> {
    let freqs = &model.config.class_freqs_hz;
    let class = freqs
        .iter()
        .position(|f| (f - freq_hz).abs() < 1e-6)
        .ok_or_else(|| SignalError::InvalidStimulus(format!("{freq_hz} Hz is not on the model grid")))?;
    let spec = StimulusSpec::new(freqs.clone(), model.acquisition.n_channels, snr_db);
    synthesize_trial(&spec, &model.acquisition, class, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub trials: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Fits once per SNR on `trials_per_class` trials per class and scores
/// `test_trials` held-out trials spread evenly over the classes.
pub fn snr_sweep(base: &CalibrationPlan, snrs_db: &[f64], test_trials: usize) -> Result<Vec<SweepPoint>, TdcaError> {
    let n_classes = base.class_freqs_hz.len();
    let mut out = Vec::new();
    for &snr in snrs_db {
        let plan = CalibrationPlan {
            snr_db: snr,
            ..base.clone()
        };
        let model = calibrate(&plan)?;
        let spec = StimulusSpec::new(plan.class_freqs_hz.clone(), plan.acquisition.n_channels, snr);
        let mut correct = 0;
        for t in 0..test_trials {
            let class = t % n_classes;
            let raw = synthesize_trial(&spec, &plan.acquisition, class, trial_seed(!plan.seed, class, t))?;
            let trial = preprocess(plan.preprocessor.as_ref(), raw)?;
            if classify(&model, &trial)?.decided_class == class {
                correct += 1;
            }
        }
        out.push(SweepPoint {
            snr_db: snr,
            trials: test_trials,
            correct,
            accuracy: correct as f64 / test_trials.max(1) as f64,
        });
    }
    Ok(out)
}
