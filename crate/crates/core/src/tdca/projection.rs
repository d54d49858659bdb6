use nalgebra::DMatrix;

use super::TdcaError;
use crate::signal::reference::{check_harmonics, reference_values};
use crate::signal::AcquisitionConfig;

/// Orthogonal projector `P = Q·Qᵀ` onto the span of a class reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub class_idx: usize,
    /// `N_p × N_p`.
    pub values: DMatrix<f64>,
    /// Orthonormal basis of the reference span, `N_p × 2N_h`. Empty when the
    /// projector was supplied directly.
    pub q_factor: DMatrix<f64>,
}

/// Relative size below which an `R` diagonal entry counts as zero.
const RANK_TOL: f64 = 1e-8;

impl ProjectionMatrix {
    /// Wraps an explicit projector without a basis.
    pub fn from_values(class_idx: usize, values: DMatrix<f64>) -> Self {
        let n = values.nrows();
        Self {
            class_idx,
            values,
            q_factor: DMatrix::zeros(n, 0),
        }
    }

    pub(crate) fn from_basis(class_idx: usize, q: DMatrix<f64>) -> Self {
        Self {
            class_idx,
            values: &q * q.transpose(),
            q_factor: q,
        }
    }

    /// `x · P`, using the thin basis when available.
    pub fn right_apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if self.q_factor.ncols() > 0 {
            (x * &self.q_factor) * self.q_factor.transpose()
        } else {
            x * &self.values
        }
    }

    pub fn rank(&self) -> usize {
        self.q_factor.ncols()
    }
}

/// Builds the projector for stimulus `freq_hz` from the thin QR factor of its
/// sine/cosine reference.
pub fn class_projection(
    freq_hz: f64,
    config: &AcquisitionConfig,
    n_harmonics: usize,
) -> Result<ProjectionMatrix, TdcaError> {
    projection_for_class(0, freq_hz, config, n_harmonics)
}

pub(crate) fn projection_for_class(
    class_idx: usize,
    freq_hz: f64,
    config: &AcquisitionConfig,
    n_harmonics: usize,
) -> Result<ProjectionMatrix, TdcaError> {
    config.validate()?;
    check_harmonics(freq_hz, config, n_harmonics, false)?;
    let expected = 2 * n_harmonics;
    let y = reference_values(freq_hz, config.sample_rate_hz, config.epoch_len_samples, n_harmonics);
    if y.nrows() < expected {
        return Err(TdcaError::RankDeficient {
            freq_hz,
            rank: y.nrows(),
            expected,
        });
    }
    let qr = y.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..expected).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let rank = diag.iter().filter(|d| **d > RANK_TOL * max).count();
    if rank < expected {
        return Err(TdcaError::RankDeficient {
            freq_hz,
            rank,
            expected,
        });
    }
    Ok(ProjectionMatrix::from_basis(class_idx, qr.q()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(fs: f64, n_p: usize) -> AcquisitionConfig {
        AcquisitionConfig::new(1, fs, n_p).unwrap()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    #[test]
    fn trace_is_twice_harmonics() {
        for n_h in 1..=5 {
            let p = class_projection(10.0, &cfg(250.0, 250), n_h).unwrap();
            assert!((p.values.trace() - 2.0 * n_h as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn fixes_its_own_range() {
        let c = cfg(250.0, 200);
        let p = class_projection(11.3, &c, 3).unwrap();
        let y = reference_values(11.3, 250.0, 200, 3);
        // Rows of Yᵀ live in the column space, so YᵀP = Yᵀ.
        let yt = y.transpose();
        assert!(max_abs(&(&yt * &p.values - &yt)) < 1e-9);
        assert!(max_abs(&(&p.values * &p.values - &p.values)) < 1e-9);
        assert!(max_abs(&(&p.values - p.values.transpose())) < 1e-9);
    }

    /// Orthonormal basis by modified Gram-Schmidt, independent of the QR path.
    fn gram_schmidt(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for c in cols {
            let mut v = c.clone();
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
        basis
    }

    #[test]
    fn annihilates_orthogonal_complement() {
        let (fs, n_p, n_h, f) = (250.0, 120, 3, 9.7);
        let p = class_projection(f, &cfg(fs, n_p), n_h).unwrap();
        let y = reference_values(f, fs, n_p, n_h);
        let cols: Vec<Vec<f64>> = (0..y.ncols()).map(|j| y.column(j).iter().copied().collect()).collect();
        let basis = gram_schmidt(&cols);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let mut v: Vec<f64> = (0..n_p).map(|_| rng.random_range(-1.0..1.0)).collect();
            // Two passes for numerical orthogonality.
            for _ in 0..2 {
                for b in &basis {
                    let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
                }
            }
            let row = DMatrix::from_row_slice(1, n_p, &v);
            assert!((row * &p.values).norm() < 1e-9);
        }
    }

    #[test]
    fn nyquist_harmonic_is_rank_deficient() {
        // Second harmonic of 62.5 Hz sits exactly at 125 Hz.
        let err = class_projection(62.5, &cfg(250.0, 250), 2).unwrap_err();
        assert!(matches!(
            err,
            TdcaError::RankDeficient {
                rank: 3,
                expected: 4,
                ..
            }
        ));
        let err = class_projection(70.0, &cfg(250.0, 250), 2).unwrap_err();
        assert!(matches!(err, TdcaError::Signal(_)));
    }

    #[test]
    fn right_apply_matches_dense() {
        let p = class_projection(12.0, &cfg(250.0, 64), 2).unwrap();
        let x = DMatrix::from_fn(3, 64, |r, c| ((r * 7 + c * 3) % 11) as f64 - 5.0);
        assert!(max_abs(&(p.right_apply(&x) - &x * &p.values)) < 1e-12);
    }
}
