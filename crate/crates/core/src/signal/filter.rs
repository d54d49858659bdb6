use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{reject_artifacts, AcquisitionConfig, ArtifactReport, EegTrial, SignalError};

/// Normalized second-order section (`a0 == 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn normalized(b0: f64, b1: f64, b2: f64, a0: f64, a1: f64, a2: f64) -> Self {
        Self {
            b0: b0 / a0,
            b1: b1 / a0,
            b2: b2 / a0,
            a1: a1 / a0,
            a2: a2 / a0,
        }
    }

    pub fn notch(center_hz: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * center_hz / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = w0.cos();
        Self::normalized(1.0, -2.0 * c, 1.0, 1.0 + alpha, -2.0 * c, 1.0 - alpha)
    }

    pub fn lowpass(cutoff_hz: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = w0.cos();
        Self::normalized(
            (1.0 - c) / 2.0,
            1.0 - c,
            (1.0 - c) / 2.0,
            1.0 + alpha,
            -2.0 * c,
            1.0 - alpha,
        )
    }

    pub fn highpass(cutoff_hz: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = w0.cos();
        Self::normalized(
            (1.0 + c) / 2.0,
            -(1.0 + c),
            (1.0 + c) / 2.0,
            1.0 + alpha,
            -2.0 * c,
            1.0 - alpha,
        )
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / fs;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num_re = self.b0 + self.b1 * c1 + self.b2 * c2;
        let num_im = self.b1 * s1 + self.b2 * s2;
        let den_re = 1.0 + self.a1 * c1 + self.a2 * c2;
        let den_im = self.a1 * s1 + self.a2 * s2;
        ((num_re * num_re + num_im * num_im) / (den_re * den_re + den_im * den_im)).sqrt()
    }

    /// Largest pole magnitude.
    fn pole_radius(&self) -> f64 {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc < 0.0 {
            self.a2.sqrt()
        } else {
            let s = disc.sqrt();
            ((-self.a1 + s) / 2.0).abs().max(((-self.a1 - s) / 2.0).abs())
        }
    }

    /// Decay time constant in samples.
    pub fn time_constant(&self) -> f64 {
        let r = self.pole_radius();
        if r <= 0.0 {
            0.0
        } else {
            -1.0 / r.ln()
        }
    }
}

/// How a channel is extended past its ends before forward-backward filtering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgePadding {
    /// Point reflection about the end sample (`2·x[0] − x[i]`).
    OddReflect,
    /// Continuation with the two-term recurrence of a sinusoid at `freq_hz`,
    /// so a tone at that frequency extends without a phase break.
    Resonant { freq_hz: f64, fs: f64 },
}

/// Series of biquads applied forward-backward for zero phase.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCascade {
    sections: Vec<Biquad>,
    padding: EdgePadding,
}

// Butterworth section Qs for a 4th-order response.
const BUTTER4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_6];

impl FilterCascade {
    pub fn new(sections: Vec<Biquad>) -> Self {
        Self {
            sections,
            padding: EdgePadding::OddReflect,
        }
    }

    pub fn with_padding(mut self, padding: EdgePadding) -> Self {
        self.padding = padding;
        self
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Notch whose combined forward-backward response stays within 1 dB of
    /// unity outside `center ± center / q`.
    pub fn notch(center_hz: f64, q: f64, fs: f64) -> Self {
        // Each pass is twice as selective so the squared response meets the
        // guard band.
        Self::new(vec![Biquad::notch(center_hz, 2.0 * q, fs)])
            .with_padding(EdgePadding::Resonant { freq_hz: center_hz, fs })
    }

    /// 4th-order Butterworth high-pass followed by 4th-order Butterworth
    /// low-pass.
    pub fn bandpass(lo_hz: f64, hi_hz: f64, fs: f64) -> Self {
        let mut sections = Vec::with_capacity(4);
        sections.extend(BUTTER4_Q.iter().map(|q| Biquad::highpass(lo_hz, *q, fs)));
        sections.extend(BUTTER4_Q.iter().map(|q| Biquad::lowpass(hi_hz, *q, fs)));
        Self::new(sections)
    }

    /// Magnitude of the zero-phase (forward-backward) response.
    pub fn zero_phase_magnitude(&self, freq_hz: f64, fs: f64) -> f64 {
        self.sections.iter().map(|s| s.magnitude(freq_hz, fs).powi(2)).product()
    }

    pub fn pad_len(&self, n: usize) -> usize {
        let tau = self.sections.iter().map(Biquad::time_constant).fold(0.0, f64::max);
        ((3.0 * tau).ceil() as usize).min(n.saturating_sub(1))
    }

    fn run(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        let mut level = first;
        for s in &self.sections {
            // Start in the steady state for a constant input equal to the
            // first sample.
            let y_ss = s.dc_gain() * level;
            let mut z1 = (s.b1 + s.b2) * level - (s.a1 + s.a2) * y_ss;
            let mut z2 = s.b2 * level - s.a2 * y_ss;
            level = y_ss;
            for v in x.iter_mut() {
                let input = *v;
                let y = s.b0 * input + z1;
                z1 = s.b1 * input - s.a1 * y + z2;
                z2 = s.b2 * input - s.a2 * y;
                *v = y;
            }
        }
    }

    fn padded(&self, x: &[f64], pad: usize) -> Vec<f64> {
        let n = x.len();
        let mut buf = Vec::with_capacity(n + 2 * pad);
        match self.padding {
            EdgePadding::OddReflect => {
                buf.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
                buf.extend_from_slice(x);
                buf.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
            }
            EdgePadding::Resonant { freq_hz, fs } => {
                let c = 2.0 * (2.0 * PI * freq_hz / fs).cos();
                let continue_from = |a: f64, b: f64| {
                    // a is the sample nearest the edge, b the one before it.
                    let (mut prev, mut cur) = (b, a);
                    (0..pad)
                        .map(|_| {
                            let next = c * cur - prev;
                            prev = cur;
                            cur = next;
                            next
                        })
                        .collect::<Vec<f64>>()
                };
                let second = |i: usize| if n > 1 { x[i] } else { x[0] };
                let mut left = continue_from(x[0], second(1));
                left.reverse();
                buf.extend(left);
                buf.extend_from_slice(x);
                buf.extend(continue_from(x[n - 1], second(n.saturating_sub(2))));
            }
        }
        buf
    }

    /// Zero-phase filtering of one channel.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len(n);
        let mut buf = self.padded(x, pad);
        self.run(&mut buf);
        buf.reverse();
        self.run(&mut buf);
        buf.reverse();
        buf[pad..pad + n].to_vec()
    }

    pub fn apply(&self, trial: &EegTrial) -> Result<EegTrial, SignalError> {
        let src = trial.samples();
        let mut out = DMatrix::zeros(src.nrows(), src.ncols());
        for (r, row) in src.row_iter().enumerate() {
            let x: Vec<f64> = row.iter().copied().collect();
            for (c, v) in self.filtfilt(&x).into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        trial.with_samples(out)
    }
}

/// Removes line interference at `center_hz`.
pub fn notch_filter(trial: &EegTrial, center_hz: f64, q: f64) -> Result<EegTrial, SignalError> {
    let fs = trial.config().sample_rate_hz;
    if !(center_hz > 0.0 && center_hz < fs / 2.0) {
        return Err(SignalError::InvalidBand(format!(
            "notch center {center_hz} Hz outside (0, {})",
            fs / 2.0
        )));
    }
    if !(q.is_finite() && q > 0.0) {
        return Err(SignalError::InvalidBand(format!("notch q must be positive, got {q}")));
    }
    FilterCascade::notch(center_hz, q, fs).apply(trial)
}

pub fn bandpass_filter(trial: &EegTrial, lo_hz: f64, hi_hz: f64) -> Result<EegTrial, SignalError> {
    let fs = trial.config().sample_rate_hz;
    if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0) {
        return Err(SignalError::InvalidBand(format!(
            "need 0 < lo < hi < {}, got ({lo_hz}, {hi_hz})",
            fs / 2.0
        )));
    }
    FilterCascade::bandpass(lo_hz, hi_hz, fs).apply(trial)
}

/// The fixed preprocessing chain applied before calibration and decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub notch_hz: Option<f64>,
    pub notch_q: f64,
    pub band_hz: Option<(f64, f64)>,
    pub artifact_peak_uv: Option<f64>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self {
            notch_hz: Some(50.0),
            notch_q: 10.0,
            band_hz: Some((6.0, 90.0)),
            artifact_peak_uv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PreprocessError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("trial rejected: {0:?}")]
    Artifact(ArtifactReport),
}

impl Preprocessor {
    /// Steps that cannot be realized at this sampling rate are skipped.
    pub fn for_config(&self, config: &AcquisitionConfig) -> Self {
        let nyq = config.nyquist_hz();
        Self {
            notch_hz: self.notch_hz.filter(|f| *f < nyq),
            notch_q: self.notch_q,
            band_hz: self
                .band_hz
                .map(|(lo, hi)| (lo, hi.min(0.9 * nyq)))
                .filter(|(lo, hi)| lo < hi),
            artifact_peak_uv: self.artifact_peak_uv,
        }
    }

    pub fn run(&self, trial: &EegTrial) -> Result<EegTrial, PreprocessError> {
        let plan = self.for_config(trial.config());
        let mut out = trial.clone();
        if let Some(peak) = plan.artifact_peak_uv {
            out = reject_artifacts(&out, peak).map_err(PreprocessError::Artifact)?;
        }
        if let Some(center) = plan.notch_hz {
            out = notch_filter(&out, center, plan.notch_q)?;
        }
        if let Some((lo, hi)) = plan.band_hz {
            out = bandpass_filter(&out, lo, hi)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, cfg: AcquisitionConfig) -> EegTrial {
        let m = DMatrix::from_fn(cfg.n_channels, cfg.epoch_len_samples, |_, k| {
            (2.0 * PI * freq * (k + 1) as f64 / cfg.sample_rate_hz + 0.3).sin()
        });
        EegTrial::new(m, cfg, None).unwrap()
    }

    fn rms(m: &DMatrix<f64>) -> f64 {
        (m.iter().map(|v| v * v).sum::<f64>() / m.len() as f64).sqrt()
    }

    fn ratio(input: &EegTrial, output: &EegTrial) -> f64 {
        rms(output.samples()) / rms(input.samples())
    }

    #[test]
    fn notch_removes_line_tone() {
        let cfg = AcquisitionConfig::new(2, 250.0, 250).unwrap();
        let x = tone(50.0, cfg);
        let y = notch_filter(&x, 50.0, 10.0).unwrap();
        assert!(ratio(&x, &y) <= 0.03, "ratio {}", ratio(&x, &y));
    }

    #[test]
    fn notch_keeps_alpha_tone() {
        let cfg = AcquisitionConfig::new(2, 250.0, 250).unwrap();
        let x = tone(10.0, cfg);
        let y = notch_filter(&x, 50.0, 10.0).unwrap();
        assert!(ratio(&x, &y) >= 0.95);
    }

    #[test]
    fn zero_in_zero_out() {
        let t = EegTrial::zeros(AcquisitionConfig::default());
        assert_eq!(notch_filter(&t, 50.0, 10.0).unwrap(), t);
        assert_eq!(bandpass_filter(&t, 6.0, 90.0).unwrap(), t);
    }

    #[test]
    fn bandpass_tones() {
        let cfg = AcquisitionConfig::new(1, 250.0, 250).unwrap();
        let pass = tone(10.0, cfg);
        assert!(ratio(&pass, &bandpass_filter(&pass, 6.0, 90.0).unwrap()) >= 0.95);
        let stop = tone(2.0, cfg);
        let r = ratio(&stop, &bandpass_filter(&stop, 6.0, 90.0).unwrap());
        assert!(20.0 * r.log10() <= -20.0, "2 Hz attenuation {} dB", 20.0 * r.log10());
    }

    #[test]
    fn notch_response_bounds() {
        let fs = 250.0;
        for q in [5.0, 10.0, 30.0] {
            let f = FilterCascade::notch(50.0, q, fs);
            assert!(20.0 * f.zero_phase_magnitude(50.0, fs).log10() <= -30.0);
            let guard = 50.0 / q;
            let mut freq = 0.25;
            while freq < fs / 2.0 {
                if (freq - 50.0).abs() > guard {
                    let db = 20.0 * f.zero_phase_magnitude(freq, fs).log10();
                    assert!(db.abs() <= 1.0, "q={q} f={freq}: {db} dB");
                }
                freq += 0.25;
            }
        }
    }

    #[test]
    fn bandpass_response_bounds() {
        let fs = 250.0;
        let (lo, hi) = (6.0, 90.0);
        let f = FilterCascade::bandpass(lo, hi, fs);
        let stop_hi = (2.0 * hi).min(0.95 * fs / 2.0);
        assert!(20.0 * f.zero_phase_magnitude(lo / 2.0, fs).log10() <= -20.0);
        assert!(20.0 * f.zero_phase_magnitude(stop_hi, fs).log10() <= -20.0);
    }

    proptest::proptest! {
        #[test]
        fn filters_are_linear(
            xs in proptest::collection::vec(-50.0f64..50.0, 64),
            ys in proptest::collection::vec(-50.0f64..50.0, 64),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let fs = 250.0;
            for f in [FilterCascade::notch(50.0, 10.0, fs), FilterCascade::bandpass(6.0, 90.0, fs)] {
                let mixed: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
                let lhs = f.filtfilt(&mixed);
                let fx = f.filtfilt(&xs);
                let fy = f.filtfilt(&ys);
                let scale = lhs.iter().map(|v| v.abs()).fold(1.0, f64::max);
                for i in 0..lhs.len() {
                    let rhs = a * fx[i] + b * fy[i];
                    proptest::prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * scale);
                }
            }
        }

        #[test]
        fn preprocessing_preserves_shape(seed in 0u64..1000) {
            let cfg = AcquisitionConfig::default();
            let spec = crate::signal::StimulusSpec::new(vec![9.0, 11.0], cfg.n_channels, 0.0);
            let t = crate::signal::synthesize_trial(&spec, &cfg, (seed % 2) as usize, seed).unwrap();
            let out = Preprocessor::default().run(&t).unwrap();
            proptest::prop_assert_eq!(out.samples().shape(), t.samples().shape());
            proptest::prop_assert!(out.samples().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn invalid_bands() {
        let t = EegTrial::zeros(AcquisitionConfig::default());
        assert!(notch_filter(&t, 0.0, 10.0).is_err());
        assert!(notch_filter(&t, 125.0, 10.0).is_err());
        assert!(notch_filter(&t, 50.0, 0.0).is_err());
        assert!(bandpass_filter(&t, 10.0, 5.0).is_err());
        assert!(bandpass_filter(&t, 6.0, 130.0).is_err());
    }
}
