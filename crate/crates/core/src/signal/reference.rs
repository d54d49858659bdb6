use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{AcquisitionConfig, SignalError};

/// Stacked sine/cosine harmonics of one stimulus frequency, time in rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMatrix {
    pub stimulus_freq_hz: f64,
    pub n_harmonics: usize,
    pub values: DMatrix<f64>,
}

/// Builds the `N_p × 2N_h` reference for `freq_hz`.
///
/// Row `k` (0-based) samples time `(k + 1) / f_s`. Columns come in pairs per
/// harmonic `h = 1..=N_h`: `sin(2π h f t)` then `cos(2π h f t)`.
pub fn make_reference(
    freq_hz: f64,
    config: &AcquisitionConfig,
    n_harmonics: usize,
) -> Result<ReferenceMatrix, SignalError> {
    config.validate()?;
    check_harmonics(freq_hz, config, n_harmonics, true)?;
    Ok(ReferenceMatrix {
        stimulus_freq_hz: freq_hz,
        n_harmonics,
        values: reference_values(freq_hz, config.sample_rate_hz, config.epoch_len_samples, n_harmonics),
    })
}

/// Rejects a frequency whose highest harmonic reaches Nyquist. With
/// `strict == false` a harmonic exactly at Nyquist is let through so callers
/// can report it as a rank deficiency instead.
pub(crate) fn check_harmonics(
    freq_hz: f64,
    config: &AcquisitionConfig,
    n_harmonics: usize,
    strict: bool,
) -> Result<(), SignalError> {
    if n_harmonics == 0 {
        return Err(SignalError::InvalidConfig("n_harmonics must be >= 1".into()));
    }
    if !(freq_hz.is_finite() && freq_hz > 0.0) {
        return Err(SignalError::InvalidConfig(format!(
            "stimulus frequency must be positive, got {freq_hz}"
        )));
    }
    let nyquist = config.nyquist_hz();
    for h in 1..=n_harmonics {
        let f = freq_hz * h as f64;
        let bad = if strict { f >= nyquist } else { f > nyquist };
        if bad {
            return Err(SignalError::Aliasing {
                harmonic: h,
                freq_hz,
                nyquist_hz: nyquist,
            });
        }
    }
    Ok(())
}

pub(crate) fn reference_values(
    freq_hz: f64,
    sample_rate_hz: f64,
    n_samples: usize,
    n_harmonics: usize,
) -> DMatrix<f64> {
    DMatrix::from_fn(n_samples, 2 * n_harmonics, |k, col| {
        let h = (col / 2 + 1) as f64;
        let t = (k + 1) as f64 / sample_rate_hz;
        let phase = 2.0 * PI * h * freq_hz * t;
        if col % 2 == 0 {
            phase.sin()
        } else {
            phase.cos()
        }
    })
}
