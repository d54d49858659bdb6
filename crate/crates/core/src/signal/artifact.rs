use serde::{Deserialize, Serialize};

use super::EegTrial;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHit {
    pub channel: usize,
    pub sample: usize,
    pub value_uv: f64,
}

/// Why a trial was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactReport {
    pub peak_uv: f64,
    /// Offending channels, ascending, without duplicates.
    pub channels: Vec<usize>,
    pub hits: Vec<ArtifactHit>,
}

/// Amplitude-threshold rejection: accepted iff every `|sample| <= peak_uv`.
pub fn reject_artifacts(trial: &EegTrial, peak_uv: f64) -> Result<EegTrial, ArtifactReport> {
    let x = trial.samples();
    let mut hits = Vec::new();
    for ch in 0..x.nrows() {
        for k in 0..x.ncols() {
            let v = x[(ch, k)];
            if v.abs() > peak_uv {
                hits.push(ArtifactHit {
                    channel: ch,
                    sample: k,
                    value_uv: v,
                });
            }
        }
    }
    if hits.is_empty() {
        return Ok(trial.clone());
    }
    let mut channels: Vec<usize> = hits.iter().map(|h| h.channel).collect();
    channels.dedup();
    Err(ArtifactReport {
        peak_uv,
        channels,
        hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize_trial, AcquisitionConfig, StimulusSpec};

    #[test]
    fn zero_trial_accepted() {
        let t = EegTrial::zeros(AcquisitionConfig::default());
        assert!(reject_artifacts(&t, 100.0).is_ok());
    }

    #[test]
    fn boundary_plus_one() {
        let cfg = AcquisitionConfig::default();
        let mut m = EegTrial::zeros(cfg).into_samples();
        m[(3, 17)] = 101.0;
        m[(2, 5)] = 100.0;
        let t = EegTrial::new(m, cfg, None).unwrap();
        let report = reject_artifacts(&t, 100.0).unwrap_err();
        assert_eq!(report.channels, vec![3]);
        assert_eq!(report.hits.len(), 1);
        assert_eq!(report.hits[0].sample, 17);
    }

    #[test]
    fn blink_transient_rejected() {
        let cfg = AcquisitionConfig::default();
        let spec = StimulusSpec::new(vec![9.0, 11.0], cfg.n_channels, 10.0);
        let t = synthesize_trial(&spec, &cfg, 0, 3).unwrap();
        assert!(reject_artifacts(&t, 100.0).is_ok());
        // 500 µV half-sine blink over 200 ms, strongest frontally.
        let mut m = t.samples().clone();
        let (start, len) = (100, 50);
        for ch in 0..cfg.n_channels {
            let gain = 1.0 - ch as f64 / cfg.n_channels as f64;
            for k in 0..len {
                let shape = (std::f64::consts::PI * k as f64 / len as f64).sin();
                m[(ch, start + k)] += 500.0 * gain * shape;
            }
        }
        let blinked = t.with_samples(m).unwrap();
        let report = reject_artifacts(&blinked, 100.0).unwrap_err();
        assert!(report.channels.contains(&0));
    }
}
