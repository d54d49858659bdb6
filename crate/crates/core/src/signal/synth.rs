use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AcquisitionConfig, EegTrial, SignalError};

const LINE_FREQ_HZ: f64 = 50.0;
/// Visual pathway latency used to give each class its own response phase.
const RESPONSE_LATENCY_S: f64 = 0.14;

/// Relative power of the three noise components before SNR scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMix {
    pub white: f64,
    pub pink: f64,
    pub line: f64,
}

impl Default for NoiseMix {
    fn default() -> Self {
        Self {
            white: 0.6,
            pink: 0.3,
            line: 0.1,
        }
    }
}

/// Forward model for synthetic SSVEP trials.
///
/// Each source carries the harmonic series of the attended stimulus with a
/// source-specific phase offset; `mixing` (`N_ch × n_sources`, µV) projects
/// the sources onto the scalp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    pub class_freqs_hz: Vec<f64>,
    pub harmonic_amplitudes: Vec<f64>,
    pub mixing: DMatrix<f64>,
    pub snr_db: f64,
    #[serde(default)]
    pub noise: NoiseMix,
}

impl StimulusSpec {
    /// Occipital-style two-source mixing for `n_channels` electrodes.
    pub fn default_mixing(n_channels: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n_channels, 2, |ch, src| {
            let x = if n_channels > 1 {
                ch as f64 / (n_channels - 1) as f64
            } else {
                0.5
            };
            match src {
                0 => 1.0 + 2.0 * (1.0 - (2.0 * x - 1.0).powi(2)),
                _ => 0.8 * (2.0 * x - 1.0),
            }
        })
    }

    pub fn new(class_freqs_hz: Vec<f64>, n_channels: usize, snr_db: f64) -> Self {
        Self {
            class_freqs_hz,
            harmonic_amplitudes: vec![1.0, 0.5, 0.25],
            mixing: Self::default_mixing(n_channels),
            snr_db,
            noise: NoiseMix::default(),
        }
    }

    pub fn validate(&self, config: &AcquisitionConfig) -> Result<(), SignalError> {
        if self.class_freqs_hz.is_empty() {
            return Err(SignalError::InvalidStimulus("no class frequencies".into()));
        }
        for (i, a) in self.class_freqs_hz.iter().enumerate() {
            if !(a.is_finite() && *a > 0.0) {
                return Err(SignalError::InvalidStimulus(format!(
                    "class {i} frequency {a} is not positive"
                )));
            }
            if self.class_freqs_hz[..i].iter().any(|b| b == a) {
                return Err(SignalError::InvalidStimulus(format!("class frequency {a} Hz repeated")));
            }
        }
        if !self.harmonic_amplitudes.iter().any(|a| *a > 0.0) {
            return Err(SignalError::InvalidStimulus(
                "at least one harmonic amplitude must be positive".into(),
            ));
        }
        if self.mixing.nrows() != config.n_channels || self.mixing.ncols() == 0 {
            return Err(SignalError::InvalidStimulus(format!(
                "mixing is {}x{}, expected {} rows",
                self.mixing.nrows(),
                self.mixing.ncols(),
                config.n_channels
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(SignalError::InvalidStimulus("snr_db must be finite".into()));
        }
        let n = self.noise;
        if [n.white, n.pink, n.line].iter().any(|w| *w < 0.0) || n.white + n.pink + n.line <= 0.0 {
            return Err(SignalError::InvalidStimulus(
                "noise mix weights must be non-negative with positive sum".into(),
            ));
        }
        Ok(())
    }
}

/// Generates one trial of a subject attending class `class_idx`.
///
/// Noise is rescaled from its realized power so that the ratio of the
/// channel-mean signal power to the channel-mean noise power equals
/// `snr_db` for every seed. Harmonics at or above Nyquist are dropped.
pub fn synthesize_trial(
    spec: &StimulusSpec,
    config: &AcquisitionConfig,
    class_idx: usize,
    seed: u64,
) -> Result<EegTrial, SignalError> {
    config.validate()?;
    spec.validate(config)?;
    let freq = *spec.class_freqs_hz.get(class_idx).ok_or_else(|| {
        SignalError::InvalidStimulus(format!(
            "class {class_idx} out of range for {} classes",
            spec.class_freqs_hz.len()
        ))
    })?;
    let n_ch = config.n_channels;
    let n_p = config.epoch_len_samples;
    let fs = config.sample_rate_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_src = spec.mixing.ncols();
    let latency_phase = -2.0 * PI * freq * RESPONSE_LATENCY_S;
    let sources = DMatrix::from_fn(n_src, n_p, |s, k| {
        let t = (k + 1) as f64 / fs;
        spec.harmonic_amplitudes
            .iter()
            .enumerate()
            .filter(|(h, _)| freq * ((*h + 1) as f64) < fs / 2.0)
            .map(|(h, amp)| {
                let h = (h + 1) as f64;
                let phase = h * latency_phase + s as f64 * PI / 3.0;
                amp * (2.0 * PI * h * freq * t + phase).sin()
            })
            .sum::<f64>()
    });
    let signal = &spec.mixing * sources;

    let white = gaussian_matrix(&mut rng, n_ch, n_p);
    let pink = pink_matrix(&mut rng, n_ch, n_p);
    let line_phases: Vec<f64> = (0..n_ch).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    // Line interference is omitted when 50 Hz is not representable.
    let line = DMatrix::from_fn(n_ch, n_p, |ch, k| {
        if LINE_FREQ_HZ < fs / 2.0 {
            (2.0 * PI * LINE_FREQ_HZ * (k + 1) as f64 / fs + line_phases[ch]).sin()
        } else {
            0.0
        }
    });

    let mix = spec.noise;
    let mut noise = DMatrix::zeros(n_ch, n_p);
    for (component, weight) in [(&white, mix.white), (&pink, mix.pink), (&line, mix.line)] {
        let p = mean_power(component);
        if weight > 0.0 && p > 0.0 {
            noise += component * (weight / p).sqrt();
        }
    }

    let signal_power = mean_power(&signal);
    let noise_power = mean_power(&noise);
    let target_noise_power = signal_power / 10f64.powf(spec.snr_db / 10.0);
    let scale = if noise_power > 0.0 {
        (target_noise_power / noise_power).sqrt()
    } else {
        0.0
    };
    let samples = signal + noise * scale;
    EegTrial::new(samples, *config, Some(class_idx))
}

fn mean_power(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.iter().map(|v| v * v).sum::<f64>() / m.len() as f64
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// 1/f noise via a three-pole shelving filter on white noise, with burn-in
/// so the output starts in steady state.
fn pink_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let burn_in = 512;
    let mut out = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
        for k in 0..burn_in + cols {
            let w: f64 = rng.sample(StandardNormal);
            b0 = 0.99765 * b0 + w * 0.099_046;
            b1 = 0.963 * b1 + w * 0.296_516_4;
            b2 = 0.57 * b2 + w * 1.052_691_3;
            if k >= burn_in {
                out[(r, k - burn_in)] = b0 + b1 + b2 + w * 0.1848;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(snr: f64) -> StimulusSpec {
        StimulusSpec::new(vec![9.0, 11.0, 13.0, 15.0], 8, snr)
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = AcquisitionConfig::default();
        let a = synthesize_trial(&spec(0.0), &cfg, 2, 77).unwrap();
        let b = synthesize_trial(&spec(0.0), &cfg, 2, 77).unwrap();
        assert_eq!(a.samples().as_slice(), b.samples().as_slice());
        let c = synthesize_trial(&spec(0.0), &cfg, 2, 78).unwrap();
        assert_ne!(a.samples().as_slice(), c.samples().as_slice());
    }

    #[test]
    fn class_out_of_range() {
        let cfg = AcquisitionConfig::default();
        assert!(synthesize_trial(&spec(0.0), &cfg, 4, 1).is_err());
    }

    #[test]
    fn duplicate_frequencies_rejected() {
        let mut s = spec(0.0);
        s.class_freqs_hz = vec![9.0, 9.0];
        assert!(s.validate(&AcquisitionConfig::default()).is_err());
        let mut s = spec(0.0);
        s.harmonic_amplitudes = vec![0.0, 0.0];
        assert!(s.validate(&AcquisitionConfig::default()).is_err());
    }

    #[test]
    fn realized_snr_matches_target() {
        let cfg = AcquisitionConfig::default();
        for snr in [-10.0, 0.0, 20.0] {
            let s = spec(snr);
            let clean = {
                let mut quiet = s.clone();
                quiet.snr_db = 300.0;
                synthesize_trial(&quiet, &cfg, 1, 5).unwrap()
            };
            let noisy = synthesize_trial(&s, &cfg, 1, 5).unwrap();
            let noise = noisy.samples() - clean.samples();
            let measured = 10.0 * (mean_power(clean.samples()) / mean_power(&noise)).log10();
            assert!((measured - snr).abs() < 1e-6, "{measured} vs {snr}");
        }
    }
}
