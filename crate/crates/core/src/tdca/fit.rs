use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::augment::{concat_projected, stack_delays};
use super::projection::projection_for_class;
use super::{generalized_symmetric_eigen, ProjectionMatrix, TdcaConfig, TdcaError};
use crate::signal::{AcquisitionConfig, EegTrial};

/// Labeled trials for individual calibration.
#[derive(Debug, Clone)]
pub struct CalibrationSet {
    pub trials: Vec<EegTrial>,
    /// Smallest per-class trial count (repetitions of the full stimulus set).
    pub n_blocks: usize,
    pub n_classes: usize,
    pub n_trials: usize,
}

impl CalibrationSet {
    /// Every trial must carry `true_class < n_classes`, all trials must share
    /// one acquisition config and every class needs at least two trials.
    pub fn new(trials: Vec<EegTrial>, n_classes: usize) -> Result<Self, TdcaError> {
        let first = trials
            .first()
            .ok_or_else(|| TdcaError::InvalidCalibration("no trials".into()))?;
        let config = *first.config();
        let mut counts = vec![0usize; n_classes];
        for (i, t) in trials.iter().enumerate() {
            if *t.config() != config {
                return Err(TdcaError::InvalidCalibration(format!(
                    "trial {i} has a different acquisition config"
                )));
            }
            let class = t
                .true_class
                .ok_or_else(|| TdcaError::InvalidCalibration(format!("trial {i} has no class label")))?;
            if class >= n_classes {
                return Err(TdcaError::InvalidCalibration(format!(
                    "trial {i} labeled {class}, only {n_classes} classes"
                )));
            }
            counts[class] += 1;
        }
        if let Some((class, &count)) = counts.iter().enumerate().find(|(_, c)| **c < 2) {
            return Err(TdcaError::InsufficientTrials { class, count });
        }
        Ok(Self {
            n_blocks: counts.iter().copied().min().unwrap_or(0),
            n_classes,
            n_trials: trials.len(),
            trials,
        })
    }

    pub fn acquisition(&self) -> &AcquisitionConfig {
        self.trials[0].config()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Ridge added to the within-class scatter diagonal.
    pub regularization: f64,
    /// Set when the within-class scatter had (numerically) zero trace and
    /// the ridge had to be scaled from the between-class scatter instead.
    pub within_scatter_degenerate: bool,
    /// All generalized eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

/// Calibrated decoder. Immutable after [`fit`].
#[derive(Debug, Clone)]
pub struct TdcaModel {
    /// `(l+1)·N_ch × subspace_dim`, columns by descending eigenvalue.
    pub filters: DMatrix<f64>,
    /// Class-mean augmented features `[X̄ᵢ, X̄ᵢ·Pᵢ]`, one per class.
    pub templates: Vec<DMatrix<f64>>,
    pub projections: Vec<ProjectionMatrix>,
    pub config: TdcaConfig,
    pub acquisition: AcquisitionConfig,
    pub diagnostics: FitDiagnostics,
    /// `Wᵀ·template` per class, cached for scoring.
    pub(crate) filtered_templates: Vec<DMatrix<f64>>,
}

impl TdcaModel {
    pub fn n_classes(&self) -> usize {
        self.templates.len()
    }

    /// Assembles a model from stored parts, rebuilding the projectors.
    pub fn from_parts(
        filters: DMatrix<f64>,
        templates: Vec<DMatrix<f64>>,
        config: TdcaConfig,
        acquisition: AcquisitionConfig,
        diagnostics: FitDiagnostics,
    ) -> Result<Self, TdcaError> {
        config.validate(acquisition.n_channels, acquisition.epoch_len_samples)?;
        let rows = config.feature_rows(acquisition.n_channels);
        if filters.shape() != (rows, config.subspace_dim) {
            return Err(TdcaError::DimensionMismatch(format!(
                "filters are {:?}, expected ({rows}, {})",
                filters.shape(),
                config.subspace_dim
            )));
        }
        if templates.len() != config.class_freqs_hz.len() {
            return Err(TdcaError::DimensionMismatch(format!(
                "{} templates for {} classes",
                templates.len(),
                config.class_freqs_hz.len()
            )));
        }
        let expected = (rows, 2 * acquisition.epoch_len_samples);
        if let Some(bad) = templates.iter().position(|t| t.shape() != expected) {
            return Err(TdcaError::DimensionMismatch(format!(
                "template {bad} is {:?}, expected {expected:?}",
                templates[bad].shape()
            )));
        }
        let projections = build_projections(&config, &acquisition)?;
        let wt = filters.transpose();
        let filtered_templates = templates.iter().map(|t| &wt * t).collect();
        Ok(Self {
            filters,
            templates,
            projections,
            config,
            acquisition,
            diagnostics,
            filtered_templates,
        })
    }
}

pub(crate) fn build_projections(
    config: &TdcaConfig,
    acquisition: &AcquisitionConfig,
) -> Result<Vec<ProjectionMatrix>, TdcaError> {
    config
        .class_freqs_hz
        .iter()
        .enumerate()
        .map(|(i, f)| projection_for_class(i, *f, acquisition, config.n_harmonics))
        .collect()
}

/// Delay-augmented calibration data with class statistics.
pub(crate) struct CalibrationFeatures {
    pub projections: Vec<ProjectionMatrix>,
    /// `X̃ⱼ` per trial.
    pub augmented: Vec<DMatrix<f64>>,
    pub labels: Vec<usize>,
    /// Class means of `X̃`.
    pub class_means: Vec<DMatrix<f64>>,
    /// Mean of `X̃` over all trials.
    pub grand_mean: DMatrix<f64>,
}

impl CalibrationFeatures {
    pub fn prepare(calib: &CalibrationSet, cfg: &TdcaConfig) -> Result<Self, TdcaError> {
        let acq = *calib.acquisition();
        cfg.validate(acq.n_channels, acq.epoch_len_samples)?;
        if cfg.class_freqs_hz.len() != calib.n_classes {
            return Err(TdcaError::InvalidConfig(format!(
                "config lists {} frequencies, calibration has {} classes",
                cfg.class_freqs_hz.len(),
                calib.n_classes
            )));
        }
        let projections = build_projections(cfg, &acq)?;
        let rows = cfg.feature_rows(acq.n_channels);
        let n_p = acq.epoch_len_samples;

        let mut augmented = Vec::with_capacity(calib.n_trials);
        let mut labels = Vec::with_capacity(calib.n_trials);
        let mut sums = vec![DMatrix::zeros(rows, n_p); calib.n_classes];
        let mut counts = vec![0usize; calib.n_classes];
        let mut grand = DMatrix::zeros(rows, n_p);
        for t in &calib.trials {
            let class = t.true_class.expect("validated by CalibrationSet");
            let x = stack_delays(t.samples(), cfg.delay_count)?;
            sums[class] += &x;
            grand += &x;
            counts[class] += 1;
            augmented.push(x);
            labels.push(class);
        }
        let class_means = sums.into_iter().zip(&counts).map(|(s, c)| s / *c as f64).collect();
        Ok(Self {
            projections,
            augmented,
            labels,
            class_means,
            grand_mean: grand / calib.n_trials as f64,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.class_means.len()
    }

    /// Between-class deviation `[Aᵢ, Aᵢ·Pᵢ]` with `Aᵢ = X̄ᵢ − X̄`. The grand
    /// mean is viewed through each class projector so that the augmented
    /// scatter equals the direct-sum form `Aᵢ (I + Pᵢ) Aᵢᵀ` exactly.
    pub fn between_block(&self, class: usize) -> DMatrix<f64> {
        let a = &self.class_means[class] - &self.grand_mean;
        let ap = self.projections[class].right_apply(&a);
        concat_projected(&a, &ap)
    }

    /// Within-class deviation `X_a⁽ʲ⁾ − X̄_a^{c(j)}`.
    pub fn within_block(&self, trial: usize) -> DMatrix<f64> {
        let class = self.labels[trial];
        let xa = self.augmented_features(trial);
        xa - self.template(class)
    }

    pub fn augmented_features(&self, trial: usize) -> DMatrix<f64> {
        let x = &self.augmented[trial];
        let xp = self.projections[self.labels[trial]].right_apply(x);
        concat_projected(x, &xp)
    }

    pub fn template(&self, class: usize) -> DMatrix<f64> {
        let m = &self.class_means[class];
        concat_projected(m, &self.projections[class].right_apply(m))
    }
}

/// Between- and within-class scatter of the augmented features.
#[derive(Debug, Clone)]
pub struct ScatterMatrices {
    pub between: DMatrix<f64>,
    pub within: DMatrix<f64>,
}

impl ScatterMatrices {
    pub(crate) fn from_features(f: &CalibrationFeatures) -> Self {
        let rows = f.grand_mean.nrows();
        let mut between = DMatrix::zeros(rows, rows);
        for c in 0..f.n_classes() {
            let m = f.between_block(c);
            between += &m * m.transpose();
        }
        between /= f.n_classes() as f64;
        let mut within = DMatrix::zeros(rows, rows);
        for j in 0..f.augmented.len() {
            let e = f.within_block(j);
            within += &e * e.transpose();
        }
        within /= f.augmented.len() as f64;
        Self { between, within }
    }

    pub fn compute(calib: &CalibrationSet, cfg: &TdcaConfig) -> Result<Self, TdcaError> {
        Ok(Self::from_features(&CalibrationFeatures::prepare(calib, cfg)?))
    }

    /// `tr(Wᵀ S_b W) / tr(Wᵀ S_w W)`.
    pub fn trace_ratio(&self, w: &DMatrix<f64>) -> f64 {
        let wt = w.transpose();
        (&wt * &self.between * w).trace() / (&wt * &self.within * w).trace()
    }

    /// Ridge for the within-class scatter and whether it had to fall back.
    pub fn regularization(&self) -> (f64, bool) {
        let dim = self.within.nrows() as f64;
        let within = self.within.trace() / dim;
        let between = self.between.trace() / dim;
        if within > 1e-12 * between && within > 0.0 {
            (1e-6 * within, false)
        } else if between > 0.0 {
            (1e-6 * between, true)
        } else {
            (1e-6, true)
        }
    }
}

/// Learns the shared spatial filter bank and class templates.
pub fn fit(calib: &CalibrationSet, cfg: &TdcaConfig) -> Result<TdcaModel, TdcaError> {
    let features = CalibrationFeatures::prepare(calib, cfg)?;
    let scatter = ScatterMatrices::from_features(&features);
    let (eps, degenerate) = scatter.regularization();
    let dim = scatter.within.nrows();
    let within_reg = &scatter.within + DMatrix::identity(dim, dim) * eps;
    let eig = generalized_symmetric_eigen(&scatter.between, &within_reg)?;
    let filters = eig.vectors.columns(0, cfg.subspace_dim).into_owned();
    if filters.iter().any(|v| !v.is_finite()) {
        return Err(TdcaError::Numerical("non-finite spatial filter".into()));
    }
    let templates: Vec<DMatrix<f64>> = (0..features.n_classes()).map(|c| features.template(c)).collect();
    let wt = filters.transpose();
    let filtered_templates = templates.iter().map(|t| &wt * t).collect();
    Ok(TdcaModel {
        filters,
        templates,
        projections: features.projections,
        config: cfg.clone(),
        acquisition: *calib.acquisition(),
        diagnostics: FitDiagnostics {
            regularization: eps,
            within_scatter_degenerate: degenerate,
            eigenvalues: eig.values,
        },
        filtered_templates,
    })
}
