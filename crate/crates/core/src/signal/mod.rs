//! Acquisition-side signal handling: trial containers, sinusoidal reference
//! signals, synthetic SSVEP generation and the preprocessing chain
//! (line-noise notch, band-pass, amplitude artifact rejection).

mod artifact;
mod filter;
pub(crate) mod reference;
mod synth;
mod trial;

pub use artifact::{reject_artifacts, ArtifactHit, ArtifactReport};
pub use filter::{bandpass_filter, notch_filter, Biquad, EdgePadding, FilterCascade, PreprocessError, Preprocessor};
pub use reference::{make_reference, ReferenceMatrix};
pub use synth::{synthesize_trial, NoiseMix, StimulusSpec};
pub use trial::{AcquisitionConfig, EegTrial, TrialFile, TRIAL_SCHEMA_VERSION};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("invalid acquisition config: {0}")]
    InvalidConfig(String),
    #[error("sample matrix is {actual:?}, config expects {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("non-finite sample at channel {channel}, index {sample}")]
    NonFinite { channel: usize, sample: usize },
    #[error("harmonic {harmonic} of {freq_hz} Hz is at or above Nyquist ({nyquist_hz} Hz)")]
    Aliasing {
        harmonic: usize,
        freq_hz: f64,
        nyquist_hz: f64,
    },
    #[error("invalid filter band: {0}")]
    InvalidBand(String),
    #[error("invalid stimulus spec: {0}")]
    InvalidStimulus(String),
    #[error("trial format: {0}")]
    Format(String),
}
