//! Second route to the Fisher objective.
//!
//! Because every projector is symmetric and idempotent,
//! `[A, A·P]·[A, A·P]ᵀ = A·(I + P)·Aᵀ`. Stacking the un-augmented deviations
//! side by side and block-diagonalizing the projectors gives numerator and
//! denominator matrices that never materialize the `2·N_p`-wide features.
//! Meant for small instances: the direct sums are `N·N_p` square.

use nalgebra::DMatrix;

use super::fit::CalibrationFeatures;
use super::{CalibrationSet, TdcaConfig, TdcaError};

#[derive(Debug, Clone)]
pub struct DirectSumScatter {
    /// `H_b (P_b + I) H_bᵀ`.
    pub between: DMatrix<f64>,
    /// `H_w (P_w + I) H_wᵀ`.
    pub within: DMatrix<f64>,
}

impl DirectSumScatter {
    pub fn trace_ratio(&self, w: &DMatrix<f64>) -> f64 {
        let wt = w.transpose();
        (&wt * &self.between * w).trace() / (&wt * &self.within * w).trace()
    }
}

fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), b.shape()).copy_from(*b);
        at += b.nrows();
    }
    out
}

fn hstack(blocks: &[DMatrix<f64>], scale: f64) -> DMatrix<f64> {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), b.shape()).copy_from(&(b * scale));
        at += b.ncols();
    }
    out
}

/// Builds `H_b`, `H_w` from un-augmented deviations and the direct sums
/// `P_b = ⊕ᵢ Pᵢ` (one per class) and `P_w = ⊕ⱼ P_{c(j)}` (one per trial).
pub fn direct_sum_objective(calib: &CalibrationSet, cfg: &TdcaConfig) -> Result<DirectSumScatter, TdcaError> {
    let f = CalibrationFeatures::prepare(calib, cfg)?;
    let n_c = f.n_classes();
    let n_t = f.augmented.len();

    let between_dev: Vec<DMatrix<f64>> = (0..n_c).map(|c| &f.class_means[c] - &f.grand_mean).collect();
    let h_b = hstack(&between_dev, 1.0 / (n_c as f64).sqrt());
    let p_b = block_diag(&f.projections.iter().map(|p| &p.values).collect::<Vec<_>>());

    let within_dev: Vec<DMatrix<f64>> = (0..n_t)
        .map(|j| &f.augmented[j] - &f.class_means[f.labels[j]])
        .collect();
    let h_w = hstack(&within_dev, 1.0 / (n_t as f64).sqrt());
    let p_w = block_diag(&f.labels.iter().map(|&c| &f.projections[c].values).collect::<Vec<_>>());

    let eye_b = DMatrix::identity(p_b.nrows(), p_b.ncols());
    let eye_w = DMatrix::identity(p_w.nrows(), p_w.ncols());
    Ok(DirectSumScatter {
        between: &h_b * (p_b + eye_b) * h_b.transpose(),
        within: &h_w * (p_w + eye_w) * h_w.transpose(),
    })
}
