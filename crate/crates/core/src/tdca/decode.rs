use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::augment::{concat_projected, stack_delays};
use super::{TdcaError, TdcaModel};
use crate::signal::EegTrial;

/// Per-class correlation scores for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationVector {
    pub scores: Vec<f64>,
    /// Classes whose score was forced to 0 because a filtered signal had no
    /// variance.
    pub zero_variance: Vec<bool>,
}

impl CorrelationVector {
    pub fn any_zero_variance(&self) -> bool {
        self.zero_variance.iter().any(|z| *z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDecision {
    pub scores: Vec<f64>,
    pub decided_class: usize,
    pub decided_freq_hz: f64,
    /// Best minus runner-up score; 2.0 when there is a single candidate.
    pub margin: f64,
    /// The best score was shared; the lowest class index won.
    pub tie: bool,
    pub zero_variance: bool,
}

impl TargetDecision {
    /// Argmax over `scores` restricted to `candidates` (all classes when
    /// `None`).
    pub fn from_scores(scores: &[f64], freqs_hz: &[f64], candidates: Option<&[usize]>) -> Result<Self, TdcaError> {
        let all: Vec<usize> = (0..scores.len()).collect();
        let mut cands: Vec<usize> = candidates.map_or(all, <[usize]>::to_vec);
        cands.sort_unstable();
        cands.dedup();
        if cands.is_empty() {
            return Err(TdcaError::InvalidConfig("no candidate classes".into()));
        }
        if let Some(bad) = cands.iter().find(|c| **c >= scores.len() || **c >= freqs_hz.len()) {
            return Err(TdcaError::InvalidConfig(format!("candidate class {bad} out of range")));
        }
        let mut best = cands[0];
        for &c in &cands[1..] {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        let runner_up = cands
            .iter()
            .filter(|c| **c != best)
            .map(|c| scores[*c])
            .fold(f64::NEG_INFINITY, f64::max);
        let (margin, tie) = if runner_up.is_finite() {
            (scores[best] - runner_up, runner_up == scores[best])
        } else {
            (2.0, false)
        };
        Ok(Self {
            scores: scores.to_vec(),
            decided_class: best,
            decided_freq_hz: freqs_hz[best],
            margin,
            tie,
            zero_variance: false,
        })
    }
}

/// Pearson correlation of two equally sized matrices taken as flat vectors.
/// `None` when either side has zero variance.
pub fn pearson(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
    debug_assert_eq!(a.shape(), b.shape());
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= f64::MIN_POSITIVE || sbb <= f64::MIN_POSITIVE {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn check_trial(model: &TdcaModel, trial: &EegTrial) -> Result<(), TdcaError> {
    let acq = &model.acquisition;
    let got = trial.config();
    if got.n_channels != acq.n_channels
        || got.epoch_len_samples != acq.epoch_len_samples
        || got.sample_rate_hz != acq.sample_rate_hz
    {
        return Err(TdcaError::ConfigMismatch(format!(
            "trial is {} ch x {} samples at {} Hz, model expects {} ch x {} samples at {} Hz",
            got.n_channels,
            got.epoch_len_samples,
            got.sample_rate_hz,
            acq.n_channels,
            acq.epoch_len_samples,
            acq.sample_rate_hz
        )));
    }
    Ok(())
}

/// Correlates the filtered features of `trial` against every class template.
pub fn score(model: &TdcaModel, trial: &EegTrial) -> Result<CorrelationVector, TdcaError> {
    check_trial(model, trial)?;
    let x = stack_delays(trial.samples(), model.config.delay_count)?;
    let wt = model.filters.transpose();
    let filtered = &wt * &x;
    let mut scores = Vec::with_capacity(model.n_classes());
    let mut zero_variance = Vec::with_capacity(model.n_classes());
    for (proj, template) in model.projections.iter().zip(&model.filtered_templates) {
        // Wᵀ[X̃, X̃P] = [WᵀX̃, (WᵀX̃)P]
        let features = concat_projected(&filtered, &proj.right_apply(&filtered));
        match pearson(&features, template) {
            Some(r) => {
                scores.push(r);
                zero_variance.push(false);
            }
            None => {
                scores.push(0.0);
                zero_variance.push(true);
            }
        }
    }
    Ok(CorrelationVector { scores, zero_variance })
}

pub fn classify(model: &TdcaModel, trial: &EegTrial) -> Result<TargetDecision, TdcaError> {
    classify_among(model, trial, None)
}

/// Like [`classify`] but only `candidates` may win, e.g. the classes shown on
/// the current stimulus page.
pub fn classify_among(
    model: &TdcaModel,
    trial: &EegTrial,
    candidates: Option<&[usize]>,
) -> Result<TargetDecision, TdcaError> {
    let cv = score(model, trial)?;
    let mut d = TargetDecision::from_scores(&cv.scores, &model.config.class_freqs_hz, candidates)?;
    d.zero_variance = cv.any_zero_variance();
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_margin() {
        let d = TargetDecision::from_scores(&[0.1, 0.9, 0.3], &[8.0, 9.0, 10.0], None).unwrap();
        assert_eq!(d.decided_class, 1);
        assert_eq!(d.decided_freq_hz, 9.0);
        assert!((d.margin - 0.6).abs() < 1e-12);
        assert!(!d.tie);
    }

    #[test]
    fn exact_tie_goes_to_lowest_index() {
        let d = TargetDecision::from_scores(&[0.5, 0.5], &[8.0, 9.0], None).unwrap();
        assert_eq!(d.decided_class, 0);
        assert!(d.tie);
        assert_eq!(d.margin, 0.0);
    }

    #[test]
    fn restricted_candidates() {
        let d = TargetDecision::from_scores(&[0.1, 0.9, 0.3], &[8.0, 9.0, 10.0], Some(&[0, 2])).unwrap();
        assert_eq!(d.decided_class, 2);
        assert!((d.margin - 0.2).abs() < 1e-12);
        let single = TargetDecision::from_scores(&[0.1, 0.9], &[8.0, 9.0], Some(&[0])).unwrap();
        assert_eq!(single.margin, 2.0);
        assert!(TargetDecision::from_scores(&[0.1], &[8.0], Some(&[3])).is_err());
    }

    #[test]
    fn pearson_basics() {
        let a = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &(-&a)).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&a, &(&a * 1e3)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&a, &DMatrix::zeros(1, 4)), None);
    }
}
