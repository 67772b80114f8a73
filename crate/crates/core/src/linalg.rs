use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Systems whose condition estimate exceeds this are reported as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Cholesky factor of a symmetric positive-definite matrix.
pub(crate) struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    condition_estimate: f64,
}

impl SpdFactor {
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }
}

/// Factors `a`, failing when it is not numerically positive definite.
///
/// The condition estimate is `(max L_ii / min L_ii)^2`, a lower bound on the
/// 2-norm condition number that reliably flags rank deficiency.
pub(crate) fn spd_factor(a: DMatrix<f64>) -> Result<SpdFactor> {
    let n = a.nrows();
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::Singular(format!("{n}x{n} system is not positive definite"))
    })?;
    let diag = chol.l_dirty().diagonal();
    let max = diag.iter().copied().fold(0.0f64, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let condition_estimate = if min > 0.0 { (max / min).powi(2) } else { f64::INFINITY };
    if condition_estimate.is_nan() || condition_estimate > MAX_CONDITION {
        return Err(Error::Singular(format!(
            "{n}x{n} system has condition estimate {condition_estimate:.3e} (limit {MAX_CONDITION:.0e})"
        )));
    }
    Ok(SpdFactor {
        chol,
        condition_estimate,
    })
}
