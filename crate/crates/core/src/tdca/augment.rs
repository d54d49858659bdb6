use nalgebra::DMatrix;

use super::{ProjectionMatrix, TdcaError};
use crate::signal::EegTrial;

/// Trial stacked with its delayed copies, `(l+1)·N_ch × N_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTrial {
    pub values: DMatrix<f64>,
    pub source: Option<usize>,
}

/// Block `d` (0..=l) holds the trial advanced by `d` samples with the last
/// `d` columns zero-filled. The same padding is used for calibration and test
/// trials.
pub fn augment_delays(trial: &EegTrial, delay: usize) -> Result<AugmentedTrial, TdcaError> {
    Ok(AugmentedTrial {
        values: stack_delays(trial.samples(), delay)?,
        source: None,
    })
}

pub(crate) fn stack_delays(x: &DMatrix<f64>, delay: usize) -> Result<DMatrix<f64>, TdcaError> {
    let (n_ch, n_p) = x.shape();
    if delay >= n_p {
        return Err(TdcaError::DelayTooLong { delay, n_samples: n_p });
    }
    let mut out = DMatrix::zeros((delay + 1) * n_ch, n_p);
    for d in 0..=delay {
        out.view_mut((d * n_ch, 0), (n_ch, n_p - d))
            .copy_from(&x.view((0, d), (n_ch, n_p - d)));
    }
    Ok(out)
}

/// `[X̃, X̃·P]`, shape `(l+1)·N_ch × 2·N_p`.
pub fn augment_secondary(aug: &AugmentedTrial, proj: &ProjectionMatrix) -> Result<DMatrix<f64>, TdcaError> {
    let x = &aug.values;
    if x.ncols() != proj.values.nrows() {
        return Err(TdcaError::DimensionMismatch(format!(
            "augmented trial has {} samples, projection is {}x{}",
            x.ncols(),
            proj.values.nrows(),
            proj.values.ncols()
        )));
    }
    Ok(concat_projected(x, &(x * &proj.values)))
}

pub(crate) fn concat_projected(x: &DMatrix<f64>, xp: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, n_p) = x.shape();
    let mut out = DMatrix::zeros(rows, 2 * n_p);
    out.view_mut((0, 0), (rows, n_p)).copy_from(x);
    out.view_mut((0, n_p), (rows, n_p)).copy_from(xp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::AcquisitionConfig;

    fn trial(rows: usize, data: &[f64]) -> EegTrial {
        let cols = data.len() / rows;
        let cfg = AcquisitionConfig::new(rows, 100.0, cols).unwrap();
        EegTrial::new(DMatrix::from_row_slice(rows, cols, data), cfg, None).unwrap()
    }

    #[test]
    fn zero_delay_is_identity() {
        let t = trial(2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(&augment_delays(&t, 0).unwrap().values, t.samples());
    }

    #[test]
    fn single_shift_zero_fill() {
        let t = trial(1, &[1.0, 2.0, 3.0, 4.0]);
        let a = augment_delays(&t, 1).unwrap();
        assert_eq!(
            a.values,
            DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 3.0, 4.0, 0.0])
        );
    }

    #[test]
    fn delay_must_be_shorter_than_epoch() {
        let t = trial(1, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            augment_delays(&t, 3),
            Err(TdcaError::DelayTooLong { delay: 3, n_samples: 3 })
        ));
        assert!(augment_delays(&t, 2).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn blocks_are_padded_shifts(data in proptest::collection::vec(-10.0f64..10.0, 2 * 9)) {
            let t = trial(2, &data);
            let l = 2;
            let a = augment_delays(&t, l).unwrap();
            let x = t.samples();
            for d in 0..=l {
                for ch in 0..2 {
                    for k in 0..9 {
                        let expected = if k + d < 9 { x[(ch, k + d)] } else { 0.0 };
                        proptest::prop_assert_eq!(a.values[(d * 2 + ch, k)], expected);
                    }
                }
            }
            // The first block is the untouched trial.
            proptest::prop_assert_eq!(a.values.rows(0, 2).into_owned(), x.clone());
        }
    }

    #[test]
    fn secondary_with_identity_and_zero() {
        let t = trial(1, &[1.0, -2.0, 3.0]);
        let aug = augment_delays(&t, 1).unwrap();
        let eye = ProjectionMatrix::from_values(0, DMatrix::identity(3, 3));
        let xa = augment_secondary(&aug, &eye).unwrap();
        assert_eq!(xa.columns(0, 3), xa.columns(3, 3));
        let zero = ProjectionMatrix::from_values(0, DMatrix::zeros(3, 3));
        let xa = augment_secondary(&aug, &zero).unwrap();
        assert!(xa.columns(3, 3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn secondary_matches_explicit_product() {
        // Rank-2 projector onto span{e1+e2, e3} in R^4.
        let s = 0.5;
        let p = DMatrix::from_row_slice(
            4,
            4,
            &[s, s, 0.0, 0.0, s, s, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        );
        let x = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 2.0, 7.0]);
        let aug = AugmentedTrial {
            values: x.clone(),
            source: None,
        };
        let xa = augment_secondary(&aug, &ProjectionMatrix::from_values(0, p)).unwrap();
        // Hand-multiplied right half.
        let expected = [1.5, 1.5, 3.0, 0.0, -0.25, -0.25, 2.0, 0.0];
        for r in 0..2 {
            for c in 0..4 {
                assert_eq!(xa[(r, c)], x[(r, c)]);
                assert!((xa[(r, 4 + c)] - expected[r * 4 + c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn secondary_dimension_mismatch() {
        let aug = AugmentedTrial {
            values: DMatrix::zeros(2, 5),
            source: None,
        };
        let p = ProjectionMatrix::from_values(0, DMatrix::identity(4, 4));
        assert!(matches!(
            augment_secondary(&aug, &p),
            Err(TdcaError::DimensionMismatch(_))
        ));
    }
}
