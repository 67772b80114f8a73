//! Least squares, ridge (primal and dual) and kernel ridge solvers,
//! prediction, k-fold cross-validation of the ridge penalty, and error metrics.
//!
//! Every solve goes through a Cholesky factorization with a condition
//! estimate; no matrix is ever explicitly inverted.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{check_finite, cross_kernel, relative_asymmetry, KernelSpec};
use crate::linalg::spd_factor;
use crate::par::{map_indexed, Parallelism};

/// Relative residual-norm threshold below which a column is treated as
/// linearly dependent on the columns before it.
pub const RANK_TOLERANCE: f64 = 1e-7;

/// Largest tolerated relative asymmetry of a kernel matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMode {
    Ols,
    RidgePrimal,
    RidgeDual,
    KernelRidge,
}

impl FitMode {
    pub fn name(self) -> &'static str {
        match self {
            FitMode::Ols => "ols",
            FitMode::RidgePrimal => "ridge_primal",
            FitMode::RidgeDual => "ridge_dual",
            FitMode::KernelRidge => "kernel_ridge",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitDiagnostics {
    /// Condition estimate of the factored system, when one was factored.
    pub condition_estimate: Option<f64>,
    /// Number of columns (primal) or observations (dual) in the solved system.
    pub rank: usize,
    /// Columns dropped as linearly dependent by the rank-revealing solver.
    pub dropped_columns: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub mode: FitMode,
    /// Primal weights `w` (OLS and ridge primal).
    pub weights: Option<DVector<f64>>,
    /// Dual coefficients `alpha` (ridge dual and kernel ridge).
    pub dual_coefficients: Option<DVector<f64>>,
    pub lambda: f64,
    /// Training inputs kept for dual-mode prediction from a raw design.
    pub training_design: Option<DMatrix<f64>>,
    /// Kernel used to build cross-kernels for kernel-ridge prediction.
    pub kernel: Option<KernelSpec>,
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    fn primal(mode: FitMode, w: DVector<f64>, lambda: f64, diagnostics: FitDiagnostics) -> Self {
        FitResult {
            mode,
            weights: Some(w),
            dual_coefficients: None,
            lambda,
            training_design: None,
            kernel: None,
            diagnostics,
        }
    }

    /// Attaches the training design and kernel so a kernel-ridge fit can
    /// predict from raw inputs.
    pub fn with_training_reference(mut self, x: DMatrix<f64>, kernel: KernelSpec) -> Self {
        self.training_design = Some(x);
        self.kernel = Some(kernel);
        self
    }
}

fn check_xy(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::input("design matrix is empty"));
    }
    if x.nrows() != y.len() {
        return Err(Error::input(format!(
            "design has {} rows but there are {} responses",
            x.nrows(),
            y.len()
        )));
    }
    check_finite(x, "design matrix")?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("responses contain non-finite values"));
    }
    Ok(())
}

fn check_lambda(lambda: f64, allow_zero: bool) -> Result<()> {
    let ok = lambda.is_finite() && (lambda > 0.0 || (allow_zero && lambda == 0.0));
    if ok {
        Ok(())
    } else if allow_zero {
        Err(Error::config(format!("lambda must be nonnegative, got {lambda}")))
    } else {
        Err(Error::config(format!("lambda must be positive, got {lambda}")))
    }
}

fn solve_normal_equations(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<(DVector<f64>, FitDiagnostics)> {
    let mut a = x.transpose() * x;
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let factor = spd_factor(a).map_err(|e| match e {
        Error::Singular(msg) if lambda == 0.0 => Error::Singular(format!(
            "X^T X cannot be inverted ({msg}); the covariates exhibit perfect multicollinearity. \
             Use a positive ridge penalty"
        )),
        other => other,
    })?;
    let w = factor.solve_vec(&(x.transpose() * y));
    Ok((
        w,
        FitDiagnostics {
            condition_estimate: Some(factor.condition_estimate()),
            rank: x.ncols(),
            dropped_columns: Vec::new(),
        },
    ))
}

/// Ordinary least squares from the normal equations `X^T X w = X^T y`.
pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    check_xy(x, y)?;
    let (w, diag) = solve_normal_equations(x, y, 0.0)?;
    Ok(FitResult::primal(FitMode::Ols, w, 0.0, diag))
}

/// Ridge primal `(X^T X + lambda I_D) w = X^T y`.
pub fn fit_ridge_primal(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<FitResult> {
    check_lambda(lambda, true)?;
    check_xy(x, y)?;
    let (w, diag) = solve_normal_equations(x, y, lambda)?;
    Ok(FitResult::primal(FitMode::RidgePrimal, w, lambda, diag))
}

/// Ridge dual `(X X^T + lambda I_N) alpha = y`; implied weights are `X^T alpha`.
pub fn fit_ridge_dual(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<FitResult> {
    check_lambda(lambda, false)?;
    check_xy(x, y)?;
    let gram = x * x.transpose();
    let (alpha, diag) = solve_dual(gram, y, lambda)?;
    Ok(FitResult {
        mode: FitMode::RidgeDual,
        weights: None,
        dual_coefficients: Some(alpha),
        lambda,
        training_design: Some(x.clone()),
        kernel: None,
        diagnostics: diag,
    })
}

fn solve_dual(mut k: DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<(DVector<f64>, FitDiagnostics)> {
    let n = k.nrows();
    for i in 0..n {
        k[(i, i)] += lambda;
    }
    let factor = spd_factor(k)?;
    let alpha = factor.solve_vec(y);
    Ok((
        alpha,
        FitDiagnostics {
            condition_estimate: Some(factor.condition_estimate()),
            rank: n,
            dropped_columns: Vec::new(),
        },
    ))
}

/// Kernel ridge regression `(K + lambda I) alpha = y`.
pub fn fit_kernel_ridge(k: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<FitResult> {
    check_lambda(lambda, false)?;
    if !k.is_square() || k.nrows() == 0 {
        return Err(Error::input(format!(
            "kernel matrix must be square and non-empty, got {:?}",
            k.shape()
        )));
    }
    if k.nrows() != y.len() {
        return Err(Error::input(format!(
            "kernel matrix is {}x{} but there are {} responses",
            k.nrows(),
            k.ncols(),
            y.len()
        )));
    }
    check_finite(k, "kernel matrix")?;
    let asym = relative_asymmetry(k);
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::input(format!(
            "kernel matrix is not symmetric (relative asymmetry {asym:.3e})"
        )));
    }
    let (alpha, diag) = solve_dual(k.clone(), y, lambda)?;
    Ok(FitResult {
        mode: FitMode::KernelRidge,
        weights: None,
        dual_coefficients: Some(alpha),
        lambda,
        training_design: None,
        kernel: None,
        diagnostics: diag,
    })
}

/// Least squares with rank-revealing column screening.
///
/// Columns are visited left to right; a column whose residual after
/// projecting out the kept columns has norm at most `tol` times its own norm
/// is dropped and gets a zero weight. The kept columns are solved through
/// their thin QR factorization. This is the unpenalized fit used when the
/// normal equations are singular, e.g. more random features than data.
pub fn fit_least_squares_rank_revealing(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tol: f64,
) -> Result<FitResult> {
    check_xy(x, y)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::config(format!("rank tolerance must be positive, got {tol}")));
    }
    let n = x.nrows();
    let mut q: Vec<DVector<f64>> = Vec::new();
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm0 = col.norm();
        let mut v = col;
        let mut coeffs = vec![0.0; q.len()];
        // Two passes of modified Gram-Schmidt keep the basis orthogonal.
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dot(&v);
                v.axpy(-c, qi, 1.0);
                coeffs[i] += c;
            }
        }
        let resid = v.norm();
        if norm0 > 0.0 && resid > tol * norm0 && q.len() < n {
            coeffs.push(resid);
            q.push(v / resid);
            r_cols.push(coeffs);
            kept.push(j);
        } else {
            dropped.push(j);
        }
    }
    if kept.is_empty() {
        return Err(Error::Singular("every column is numerically zero".into()));
    }
    let k = kept.len();
    let qty: Vec<f64> = q.iter().map(|qi| qi.dot(y)).collect();
    // Back-substitution on the upper-triangular R (column j holds r_cols[j]).
    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = qty[i];
        for (jj, b) in beta.iter().enumerate().skip(i + 1) {
            s -= r_cols[jj][i] * b;
        }
        beta[i] = s / r_cols[i][i];
    }
    let mut w = DVector::zeros(x.ncols());
    for (slot, b) in kept.iter().zip(beta) {
        w[*slot] = b;
    }
    Ok(FitResult::primal(
        FitMode::Ols,
        w,
        0.0,
        FitDiagnostics {
            condition_estimate: None,
            rank: k,
            dropped_columns: dropped,
        },
    ))
}

/// Input to [`predict`].
#[derive(Clone, Copy, Debug)]
pub enum PredictInput<'a> {
    /// Raw covariates (or features) for new points.
    Design(&'a DMatrix<f64>),
    /// Cross-kernel `k(X_new, X_train)`, one row per new point.
    CrossKernel(&'a DMatrix<f64>),
}

/// Primal modes: `y_hat = X_new w`. Dual modes: `y_hat = k(X_new, X_train) alpha`.
pub fn predict(fit: &FitResult, input: PredictInput<'_>) -> Result<DVector<f64>> {
    match fit.mode {
        FitMode::Ols | FitMode::RidgePrimal => {
            let w = fit.weights.as_ref().ok_or_else(|| Error::input("fit has no weights"))?;
            match input {
                PredictInput::Design(x) => {
                    if x.ncols() != w.len() {
                        return Err(Error::input(format!(
                            "model expects {} columns, got {}",
                            w.len(),
                            x.ncols()
                        )));
                    }
                    Ok(x * w)
                }
                PredictInput::CrossKernel(_) => Err(Error::input(
                    "primal fits predict from a design matrix, not a cross-kernel",
                )),
            }
        }
        FitMode::RidgeDual | FitMode::KernelRidge => {
            let alpha = fit
                .dual_coefficients
                .as_ref()
                .ok_or_else(|| Error::input("fit has no dual coefficients"))?;
            let cross = match input {
                PredictInput::CrossKernel(k) => k.clone(),
                PredictInput::Design(x) => {
                    let train = fit.training_design.as_ref().ok_or_else(|| {
                        Error::input("dual prediction from a design needs the training design")
                    })?;
                    if x.ncols() != train.ncols() {
                        return Err(Error::input(format!(
                            "model expects {} columns, got {}",
                            train.ncols(),
                            x.ncols()
                        )));
                    }
                    match (fit.mode, fit.kernel) {
                        (FitMode::RidgeDual, _) => x * train.transpose(),
                        (_, Some(spec)) => cross_kernel(&spec, x, train)?,
                        (_, None) => {
                            return Err(Error::input(
                                "kernel ridge prediction from a design needs the kernel spec",
                            ))
                        }
                    }
                }
            };
            if cross.ncols() != alpha.len() {
                return Err(Error::input(format!(
                    "cross-kernel has {} columns but the fit has {} dual coefficients",
                    cross.ncols(),
                    alpha.len()
                )));
            }
            Ok(cross * alpha)
        }
    }
}

/// Mean squared error.
pub fn mse(y: &DVector<f64>, y_hat: &DVector<f64>) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::input(format!(
            "length mismatch: {} vs {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::input("cannot take the MSE of empty vectors"));
    }
    Ok(y.iter().zip(y_hat.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// 25 log-spaced penalties from `1e-3` to `1e3`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..25).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 24.0)).collect()
}

pub const DEFAULT_CV_FOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub lambda_grid: Vec<f64>,
    /// Held-out MSE, one row per penalty and one column per fold.
    pub fold_mse: DMatrix<f64>,
    pub best_lambda: f64,
    pub k: usize,
    pub seed: Option<u64>,
    /// Held-out indices of each fold.
    pub folds: Vec<Vec<usize>>,
}

impl CvReport {
    pub fn mean_mse(&self) -> Vec<f64> {
        self.fold_mse.row_iter().map(|r| r.mean()).collect()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Shuffles `0..n` once and splits it into `k` contiguous folds whose sizes
/// differ by at most one.
pub fn kfold_assignment<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::input(format!(
            "{n} observations cannot fill {k} folds with at least one point each"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    x.select_rows(rows)
}

fn select_entries(y: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]))
}

/// Chooses the ridge penalty by k-fold cross-validation.
///
/// Each fold is solved through whichever of the primal and dual systems is
/// smaller; both give the same predictions. The best penalty minimizes the
/// mean held-out MSE; ties go to the larger penalty.
pub fn kfold_cv_lambda<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda_grid: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<CvReport> {
    kfold_cv_lambda_with(x, y, lambda_grid, k, rng, Parallelism::default())
}

/// Training covariates and responses, then held-out ones.
type FoldSplit = (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>);

pub fn kfold_cv_lambda_with<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda_grid: &[f64],
    k: usize,
    rng: &mut R,
    par: Parallelism,
) -> Result<CvReport> {
    check_xy(x, y)?;
    if lambda_grid.is_empty() {
        return Err(Error::config("lambda grid is empty"));
    }
    for &l in lambda_grid {
        check_lambda(l, false)?;
    }
    let folds = kfold_assignment(x.nrows(), k, rng)?;
    let splits: Vec<FoldSplit> = folds
        .iter()
        .map(|held| {
            let mut mask = vec![true; x.nrows()];
            for &i in held {
                mask[i] = false;
            }
            let train: Vec<usize> = (0..x.nrows()).filter(|&i| mask[i]).collect();
            (
                select_rows(x, &train),
                select_entries(y, &train),
                select_rows(x, held),
                select_entries(y, held),
            )
        })
        .collect();
    let rows: Vec<Result<Vec<f64>>> = map_indexed(lambda_grid.len(), par, |g| {
        splits
            .iter()
            .map(|(xt, yt, xh, yh)| {
                let lambda = lambda_grid[g];
                let fit = if xt.ncols() <= xt.nrows() {
                    fit_ridge_primal(xt, yt, lambda)?
                } else {
                    fit_ridge_dual(xt, yt, lambda)?
                };
                mse(yh, &predict(&fit, PredictInput::Design(xh))?)
            })
            .collect()
    });
    let mut fold_mse = DMatrix::zeros(lambda_grid.len(), k);
    for (g, row) in rows.into_iter().enumerate() {
        for (f, v) in row?.into_iter().enumerate() {
            fold_mse[(g, f)] = v;
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for (g, &lambda) in lambda_grid.iter().enumerate() {
        let mean = fold_mse.row(g).mean();
        best = match best {
            None => Some((mean, lambda)),
            Some((bm, bl)) if mean < bm || (mean == bm && lambda > bl) => Some((mean, lambda)),
            keep => keep,
        };
    }
    Ok(CvReport {
        lambda_grid: lambda_grid.to_vec(),
        fold_mse,
        best_lambda: best.expect("grid is non-empty").1,
        k,
        seed: None,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_problem(seed: u64, n: usize, d: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut r = rng(seed);
        let x = DMatrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| r.random_range(-2.0..2.0));
        (x, y)
    }

    #[test]
    fn ols_identity_design_interpolates() {
        let x = DMatrix::identity(5, 5);
        let y = DVector::from_vec(vec![3.0, -1.0, 0.5, 2.0, 7.0]);
        let fit = fit_ols(&x, &y).unwrap();
        assert!((fit.weights.as_ref().unwrap() - &y).amax() < 1e-14);
        let yhat = predict(&fit, PredictInput::Design(&x)).unwrap();
        assert!((yhat - &y).amax() < 1e-14);
    }

    #[test]
    fn ols_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 - 2.0).collect();
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let y = DVector::from_fn(10, |i, _| 2.0 * xs[i] + 1.0);
        let w = fit_ols(&x, &y).unwrap().weights.unwrap();
        assert!((w[0] - 1.0).abs() < 1e-10 && (w[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn ols_matches_pseudoinverse_oracle() {
        let (x, y) = random_problem(1, 30, 4);
        let w = fit_ols(&x, &y).unwrap().weights.unwrap();
        let oracle = x.clone().pseudo_inverse(1e-14).unwrap() * &y;
        assert!((&w - &oracle).norm() / oracle.norm() < 1e-9);
    }

    #[test]
    fn ols_reports_multicollinearity() {
        // Third column is 3 * first + 2 * second.
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 3.0 + 2.0 * i as f64,
        });
        let y = DVector::from_fn(6, |i, _| i as f64);
        match fit_ols(&x, &y) {
            Err(Error::Singular(msg)) => assert!(msg.contains("multicollinearity")),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn ridge_zero_equals_ols() {
        let (x, y) = random_problem(2, 20, 3);
        let a = fit_ols(&x, &y).unwrap().weights.unwrap();
        let b = fit_ridge_primal(&x, &y, 0.0).unwrap().weights.unwrap();
        assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn huge_penalty_shrinks_to_zero() {
        let (x, y) = random_problem(3, 20, 3);
        let w = fit_ridge_primal(&x, &y, 1e12).unwrap().weights.unwrap();
        assert!(w.norm() < 1e-6);
    }

    #[test]
    fn wide_design_primal_matches_dual() {
        let (x, y) = random_problem(4, 20, 50);
        let (xn, _) = random_problem(5, 7, 50);
        let p = fit_ridge_primal(&x, &y, 0.1).unwrap();
        let d = fit_ridge_dual(&x, &y, 0.1).unwrap();
        let yp = predict(&p, PredictInput::Design(&xn)).unwrap();
        let yd = predict(&d, PredictInput::Design(&xn)).unwrap();
        assert!((yp - yd).amax() < 1e-8);
    }

    #[test]
    fn dual_single_observation_closed_form() {
        let x = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]);
        let y = DVector::from_vec(vec![4.0]);
        let alpha = fit_ridge_dual(&x, &y, 0.3).unwrap().dual_coefficients.unwrap();
        let expected = 4.0 / (x.row(0).norm_squared() + 0.3);
        assert!((alpha[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn strong_duality_weights_agree() {
        let (x, y) = random_problem(6, 25, 6);
        let w = fit_ridge_primal(&x, &y, 0.5).unwrap().weights.unwrap();
        let alpha = fit_ridge_dual(&x, &y, 0.5).unwrap().dual_coefficients.unwrap();
        let implied = x.transpose() * alpha;
        assert!((&implied - &w).norm() / w.norm() < 1e-8);
    }

    #[test]
    fn dual_rejects_nonpositive_lambda() {
        let (x, y) = random_problem(7, 5, 2);
        assert!(matches!(fit_ridge_dual(&x, &y, 0.0), Err(Error::Config(_))));
        assert!(matches!(fit_ridge_primal(&x, &y, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn linear_kernel_ridge_equals_dual() {
        let (x, y) = random_problem(8, 15, 4);
        let k = &x * x.transpose();
        let a = fit_kernel_ridge(&k, &y, 0.7).unwrap().dual_coefficients.unwrap();
        let b = fit_ridge_dual(&x, &y, 0.7).unwrap().dual_coefficients.unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn kernel_ridge_interpolates_as_lambda_vanishes() {
        // Well-separated points keep the SE Gram matrix well conditioned.
        let x = DMatrix::from_fn(8, 1, |i, _| i as f64 * 1.5);
        let spec = KernelSpec::squared_exponential(1.0, 0.5);
        let k = crate::kernels::gram_matrix(&spec, &x).unwrap().entries;
        let y = DVector::from_fn(8, |i, _| (i as f64).sin());
        let fit = fit_kernel_ridge(&k, &y, 1e-12).unwrap();
        let yhat = predict(&fit, PredictInput::CrossKernel(&k)).unwrap();
        assert!((yhat - y).amax() < 1e-6);
    }

    #[test]
    fn kernel_ridge_rejects_asymmetric() {
        let mut k = DMatrix::identity(3, 3);
        k[(0, 1)] = 0.1;
        let y = DVector::zeros(3);
        assert!(matches!(fit_kernel_ridge(&k, &y, 1.0), Err(Error::Input(_))));
    }

    #[test]
    fn kernel_prediction_with_zero_similarity_is_zero() {
        let k = DMatrix::identity(3, 3) * 2.0;
        let fit = fit_kernel_ridge(&k, &DVector::from_vec(vec![1.0, 2.0, 3.0]), 1.0).unwrap();
        let yhat = predict(&fit, PredictInput::CrossKernel(&DMatrix::zeros(1, 3))).unwrap();
        assert_eq!(yhat[0], 0.0);
    }

    #[test]
    fn kernel_ridge_predicts_from_design_with_reference() {
        let (x, y) = random_problem(9, 12, 2);
        let spec = KernelSpec::squared_exponential(1.0, 0.8);
        let k = crate::kernels::gram_matrix(&spec, &x).unwrap().entries;
        let fit = fit_kernel_ridge(&k, &y, 0.2).unwrap();
        assert!(predict(&fit, PredictInput::Design(&x)).is_err());
        let fit = fit.with_training_reference(x.clone(), spec);
        let a = predict(&fit, PredictInput::Design(&x)).unwrap();
        let b = predict(&fit, PredictInput::CrossKernel(&k)).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn predict_shape_errors() {
        let (x, y) = random_problem(10, 10, 3);
        let fit = fit_ols(&x, &y).unwrap();
        assert!(predict(&fit, PredictInput::Design(&DMatrix::zeros(2, 4))).is_err());
        assert!(predict(&fit, PredictInput::CrossKernel(&DMatrix::zeros(2, 10))).is_err());
        let mut dual = fit_ridge_dual(&x, &y, 1.0).unwrap();
        dual.training_design = None;
        assert!(predict(&dual, PredictInput::Design(&x)).is_err());
    }

    #[test]
    fn primal_dual_prediction_parity() {
        for seed in 0..20 {
            let (x, y) = random_problem(100 + seed, 18, 5);
            let (xn, _) = random_problem(200 + seed, 6, 5);
            let p = fit_ridge_primal(&x, &y, 1.0).unwrap();
            let d = fit_ridge_dual(&x, &y, 1.0).unwrap();
            let diff = (predict(&p, PredictInput::Design(&xn)).unwrap()
                - predict(&d, PredictInput::Design(&xn)).unwrap())
            .amax();
            assert!(diff < 1e-8);
        }
    }

    #[test]
    fn shrinkage_is_monotone() {
        for seed in 0..10 {
            let (x, y) = random_problem(300 + seed, 30, 6);
            let norms: Vec<f64> = default_lambda_grid()
                .iter()
                .map(|&l| fit_ridge_primal(&x, &y, l).unwrap().weights.unwrap().norm())
                .collect();
            assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn rank_revealing_matches_ols_on_full_rank() {
        let (x, y) = random_problem(11, 30, 5);
        let a = fit_ols(&x, &y).unwrap().weights.unwrap();
        let b = fit_least_squares_rank_revealing(&x, &y, RANK_TOLERANCE).unwrap();
        assert!((a - b.weights.unwrap()).amax() < 1e-10);
        assert_eq!(b.diagnostics.rank, 5);
    }

    #[test]
    fn rank_revealing_drops_dependent_columns() {
        let (base, y) = random_problem(12, 10, 3);
        let x = DMatrix::from_fn(10, 5, |i, j| match j {
            3 => base[(i, 0)] + base[(i, 1)],
            4 => 2.0 * base[(i, 2)],
            _ => base[(i, j)],
        });
        let fit = fit_least_squares_rank_revealing(&x, &y, RANK_TOLERANCE).unwrap();
        assert_eq!(fit.diagnostics.dropped_columns, vec![3, 4]);
        let full = fit_ols(&base, &y).unwrap();
        let a = predict(&fit, PredictInput::Design(&x)).unwrap();
        let b = predict(&full, PredictInput::Design(&base)).unwrap();
        assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn rank_revealing_interpolates_wide_design() {
        let (x, y) = random_problem(13, 8, 20);
        let fit = fit_least_squares_rank_revealing(&x, &y, RANK_TOLERANCE).unwrap();
        assert_eq!(fit.diagnostics.rank, 8);
        let yhat = predict(&fit, PredictInput::Design(&x)).unwrap();
        assert!((yhat - y).amax() < 1e-9);
    }

    #[test]
    fn mse_examples() {
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(mse(&DVector::zeros(2), &DVector::from_element(2, 1.0)).unwrap(), 1.0);
        assert!(mse(&y, &DVector::zeros(3)).is_err());
        let (_, a) = random_problem(14, 50, 1);
        let (_, b) = random_problem(15, 50, 1);
        let mut naive = 0.0;
        for i in 0..50 {
            naive += (a[i] - b[i]).powi(2);
        }
        assert!((mse(&a, &b).unwrap() - naive / 50.0).abs() < 1e-12);
    }

    #[test]
    fn cv_singleton_grid_and_determinism() {
        let (x, y) = random_problem(16, 30, 3);
        let r = kfold_cv_lambda(&x, &y, &[0.7], 5, &mut rng(1)).unwrap();
        assert_eq!(r.best_lambda, 0.7);
        let grid = default_lambda_grid();
        let a = kfold_cv_lambda(&x, &y, &grid, 5, &mut rng(2)).unwrap();
        let b = kfold_cv_lambda(&x, &y, &grid, 5, &mut rng(2)).unwrap();
        assert_eq!(a, b);
        let c = kfold_cv_lambda_with(&x, &y, &grid, 5, &mut rng(2), Parallelism::Sequential).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn cv_folds_partition_indices() {
        let folds = kfold_assignment(23, 5, &mut rng(3)).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
        assert!(matches!(kfold_assignment(3, 5, &mut rng(0)), Err(Error::Input(_))));
        assert!(matches!(kfold_assignment(10, 1, &mut rng(0)), Err(Error::Config(_))));
    }

    #[test]
    fn cv_ties_break_toward_larger_lambda() {
        // Zero design: every penalty yields w = 0 and identical errors.
        let x = DMatrix::zeros(10, 2);
        let y = DVector::from_fn(10, |i, _| i as f64);
        let r = kfold_cv_lambda(&x, &y, &[0.1, 1.0, 10.0], 5, &mut rng(4)).unwrap();
        assert_eq!(r.best_lambda, 10.0);
    }
}
