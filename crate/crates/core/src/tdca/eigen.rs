use nalgebra::{DMatrix, SymmetricEigen};

use super::TdcaError;

/// Solution of `A w = λ B w` for symmetric `A` and symmetric positive
/// definite `B`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Columns match `values`; normalized so `Wᵀ B W = I`.
    pub vectors: DMatrix<f64>,
}

/// Reduces to a standard symmetric problem through the Cholesky factor of
/// `b`: `C = L⁻¹ A L⁻ᵀ`, `W = L⁻ᵀ V`.
pub fn generalized_symmetric_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GeneralizedEigen, TdcaError> {
    let n = a.nrows();
    if a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(TdcaError::DimensionMismatch(format!(
            "generalized eigenproblem needs square matrices of equal size, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| TdcaError::Numerical("within-class scatter is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| TdcaError::Numerical("singular Cholesky factor".into()))?;
    let c = &l_inv * a * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let back = l_inv.transpose();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut w = &back * eig.eigenvectors.column(src);
        // Fix the sign: largest-magnitude entry positive.
        let pivot = w
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            w.neg_mut();
        }
        vectors.set_column(dst, &w);
    }
    Ok(GeneralizedEigen { values, vectors })
}
