//! Frequency samplers for shift-invariant kernels.
//!
//! Each sampler returns a [`FrequencyMatrix`] whose rows are frequencies
//! `w_j` such that `E[cos(w^T (x - z))] = k(x - z) / k(0)`. The kernel's
//! output scale is never folded into the frequencies; see
//! [`KernelSpec::output_scale`].

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Cauchy, ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::features::{feature_map, FeatureMatrix};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::special::{cauchy_quantile, laplace_quantile, normal_quantile};

/// How a frequency matrix was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Iid,
    Qmc,
    Orf,
    Leverage,
    NonstationaryPair,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Iid => "iid",
            Provenance::Qmc => "qmc",
            Provenance::Orf => "orf",
            Provenance::Leverage => "leverage",
            Provenance::NonstationaryPair => "nonstationary-pair",
        }
    }
}

/// `m x d` matrix of sampled frequencies, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyMatrix {
    omega: DMatrix<f64>,
    provenance: Provenance,
    column_weights: Option<DVector<f64>>,
    seed: Option<u64>,
}

impl FrequencyMatrix {
    /// Wraps explicit frequencies, e.g. draws from a discrete spectral measure.
    pub fn new(omega: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if provenance == Provenance::Leverage {
            return Err(Error::input(
                "leverage frequency matrices carry column weights; use with_column_weights",
            ));
        }
        Self::build(omega, provenance, None)
    }

    /// Leverage-resampled frequencies with their importance weights.
    pub fn with_column_weights(omega: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        if weights.len() != omega.nrows() {
            return Err(Error::input(format!(
                "{} column weights for {} frequencies",
                weights.len(),
                omega.nrows()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::input("column weights must be positive and finite"));
        }
        Self::build(omega, Provenance::Leverage, Some(weights))
    }

    fn build(
        omega: DMatrix<f64>,
        provenance: Provenance,
        column_weights: Option<DVector<f64>>,
    ) -> Result<Self> {
        if omega.nrows() == 0 || omega.ncols() == 0 {
            return Err(Error::input("frequency matrix must be non-empty"));
        }
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("frequency matrix has non-finite entries"));
        }
        Ok(FrequencyMatrix {
            omega,
            provenance,
            column_weights,
            seed: None,
        })
    }

    /// Records the seed of the generator that produced the draw.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn column_weights(&self) -> Option<&DVector<f64>> {
        self.column_weights.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Number of frequencies `m`.
    pub fn len(&self) -> usize {
        self.omega.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.omega.ncols()
    }

    /// First `m` frequencies (and their weights).
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return Err(Error::input(format!(
                "cannot take {m} of {} frequencies",
                self.len()
            )));
        }
        Ok(FrequencyMatrix {
            omega: self.omega.rows(0, m).into_owned(),
            provenance: self.provenance,
            column_weights: self.column_weights.as_ref().map(|w| w.rows(0, m).into_owned()),
            seed: self.seed,
        })
    }
}

fn check_shape(m: usize, d: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::input("number of frequencies m must be at least 1"));
    }
    if d == 0 {
        return Err(Error::input("dimension d must be at least 1"));
    }
    Ok(())
}

fn samplable(spec: &KernelSpec) -> Result<()> {
    spec.validate()?;
    if spec.family == KernelFamily::Polynomial {
        return Err(Error::UnsupportedFamily(
            "polynomial kernel has no spectral density; it is not shift-invariant".into(),
        ));
    }
    Ok(())
}

/// I.i.d. draws from the family's spectral density.
///
/// * SE: `N(0, 1/l^2)` per coordinate.
/// * Cauchy kernel: Laplace(0, 1) per coordinate.
/// * Laplacian kernel: Cauchy(0, sigma) per coordinate.
/// * Matérn: multivariate Student-t with `2 nu` degrees of freedom,
///   `w = z / (l sqrt(u))`, `z ~ N(0, I)`, `u ~ chi^2(2 nu) / (2 nu)`.
pub fn sample_frequencies_iid<R: Rng + ?Sized>(
    spec: &KernelSpec,
    m: usize,
    d: usize,
    rng: &mut R,
) -> Result<FrequencyMatrix> {
    samplable(spec)?;
    check_shape(m, d)?;
    let mut omega = DMatrix::zeros(m, d);
    match spec.family {
        KernelFamily::SquaredExponential => {
            let inv = 1.0 / spec.lengthscale;
            for i in 0..m {
                for j in 0..d {
                    let z: f64 = StandardNormal.sample(rng);
                    omega[(i, j)] = z * inv;
                }
            }
        }
        KernelFamily::Cauchy => {
            for i in 0..m {
                for j in 0..d {
                    let u: f64 = rng.random();
                    omega[(i, j)] = laplace_quantile(u.max(f64::MIN_POSITIVE));
                }
            }
        }
        KernelFamily::Laplacian => {
            let dist = Cauchy::new(0.0, spec.sigma).map_err(|e| Error::config(e.to_string()))?;
            for i in 0..m {
                for j in 0..d {
                    omega[(i, j)] = dist.sample(rng);
                }
            }
        }
        KernelFamily::Matern => {
            let dof = 2.0 * spec.smoothness;
            let chi = ChiSquared::new(dof).map_err(|e| Error::config(e.to_string()))?;
            for i in 0..m {
                let u = chi.sample(rng) / dof;
                let scale = 1.0 / (spec.lengthscale * u.sqrt());
                for j in 0..d {
                    let z: f64 = StandardNormal.sample(rng);
                    omega[(i, j)] = z * scale;
                }
            }
        }
        KernelFamily::Polynomial => unreachable!("rejected above"),
    }
    FrequencyMatrix::build(omega, Provenance::Iid, None)
}

/// First twenty primes, one Halton base per dimension.
const PRIMES: [u64; 20] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
];

pub const MAX_HALTON_DIM: usize = PRIMES.len();

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut factor = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv_base;
    }
    value
}

/// `m x d` Halton points in `(0, 1)^d`, starting at index 1 so the origin is skipped.
pub fn halton_points(m: usize, d: usize) -> Result<DMatrix<f64>> {
    check_shape(m, d)?;
    if d > MAX_HALTON_DIM {
        return Err(Error::UnsupportedDimension(format!(
            "Halton sequence supports at most {MAX_HALTON_DIM} dimensions, got {d}"
        )));
    }
    Ok(DMatrix::from_fn(m, d, |i, j| radical_inverse(i as u64 + 1, PRIMES[j])))
}

/// Quasi-Monte Carlo frequencies: Halton points pushed through the
/// coordinate-wise quantile of the spectral density. Deterministic.
pub fn sample_frequencies_qmc(spec: &KernelSpec, m: usize, d: usize) -> Result<FrequencyMatrix> {
    samplable(spec)?;
    let quantile: Box<dyn Fn(f64) -> f64> = match spec.family {
        KernelFamily::SquaredExponential => {
            let inv = 1.0 / spec.lengthscale;
            Box::new(move |u| normal_quantile(u) * inv)
        }
        KernelFamily::Cauchy => Box::new(laplace_quantile),
        KernelFamily::Laplacian => {
            let scale = spec.sigma;
            Box::new(move |u| cauchy_quantile(u, scale))
        }
        KernelFamily::Matern => {
            return Err(Error::UnsupportedFamily(
                "Matérn spectral density has no coordinate-wise quantile for QMC".into(),
            ))
        }
        KernelFamily::Polynomial => unreachable!("rejected above"),
    };
    let omega = halton_points(m, d)?.map(quantile);
    FrequencyMatrix::build(omega, Provenance::Qmc, None)
}

/// Orthogonal random features for the SE kernel.
///
/// Built from `ceil(m / d)` independent `d x d` blocks. For each block a
/// Gaussian `G` is QR-factored to an orthogonal `O` (sign-corrected so it is
/// Haar distributed), an independent Gaussian `G1` supplies chi-distributed
/// row norms `S`, and the block is `S O / l`. Blocks are stacked and
/// truncated to `m` rows.
pub fn sample_frequencies_orf<R: Rng + ?Sized>(
    spec: &KernelSpec,
    m: usize,
    d: usize,
    rng: &mut R,
) -> Result<FrequencyMatrix> {
    spec.validate()?;
    if spec.family != KernelFamily::SquaredExponential {
        return Err(Error::UnsupportedFamily(format!(
            "orthogonal random features require the squared exponential kernel, got {}",
            spec.family.name()
        )));
    }
    check_shape(m, d)?;
    let inv = 1.0 / spec.lengthscale;
    let blocks = m.div_ceil(d);
    let mut omega = DMatrix::zeros(blocks * d, d);
    for b in 0..blocks {
        let g = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
        let g1 = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
        let block = orthogonal_block(g, &g1);
        omega.view_mut((b * d, 0), (d, d)).copy_from(&(block * inv));
    }
    let omega = omega.rows(0, m).into_owned();
    FrequencyMatrix::build(omega, Provenance::Orf, None)
}

/// `S O`: rows of the Haar orthogonal factor of `g`, rescaled to the row norms of `g1`.
fn orthogonal_block(g: DMatrix<f64>, g1: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut block = q;
    for i in 0..block.nrows() {
        let norm = g1.row(i).norm();
        block.row_mut(i).scale_mut(norm);
    }
    block
}

/// Ridge leverage scores of the columns of a feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LeverageScores {
    pub scores: DVector<f64>,
    pub lambda: f64,
}

impl LeverageScores {
    /// Effective dimension, the trace of the regularized hat matrix.
    pub fn sum(&self) -> f64 {
        self.scores.sum()
    }
}

/// Column ridge leverage scores `diag(Phi^T Phi (Phi^T Phi + lambda I)^{-1})`.
///
/// With a positive penalty and fewer rows than columns the equal diagonal
/// `diag(Phi^T (Phi Phi^T + lambda I)^{-1} Phi)` is used instead, so the
/// factored system is `min(N, 2m)` square. At `lambda = 0` the column form
/// is required and a rank-deficient `Phi^T Phi` is an error.
pub fn ridge_leverage_scores(phi: &FeatureMatrix, lambda: f64) -> Result<LeverageScores> {
    let a = phi.phi();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("feature matrix has non-finite entries"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::config(format!("lambda must be nonnegative, got {lambda}")));
    }
    let raw = if lambda > 0.0 && a.nrows() < a.ncols() {
        scores_row_space(a, lambda)?
    } else {
        scores_column_space(a, lambda)?
    };
    let scores = raw.map(|s| s.clamp(0.0, 1.0));
    Ok(LeverageScores { scores, lambda })
}

fn singular_scores(lambda: f64) -> Error {
    Error::Singular(format!(
        "the regularized feature Gram matrix with lambda = {lambda} is singular; \
         increase lambda to regularize the leverage scores"
    ))
}

fn regularized(mut g: DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    g
}

fn scores_column_space(a: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    let gram = a.transpose() * a;
    let chol = crate::linalg::spd_factor(regularized(gram.clone(), lambda))
        .map_err(|_| singular_scores(lambda))?;
    // (A + lambda I)^{-1} A is symmetric with the same diagonal as A (A + lambda I)^{-1}.
    let solved = chol.solve(&gram);
    Ok(solved.diagonal())
}

fn scores_row_space(a: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    let chol = crate::linalg::spd_factor(regularized(a * a.transpose(), lambda))
        .map_err(|_| singular_scores(lambda))?;
    let solved = chol.solve(a);
    Ok(DVector::from_fn(a.ncols(), |j, _| a.column(j).dot(&solved.column(j))))
}

/// Sampling distribution over frequencies: each frequency's cosine and sine
/// column scores are summed, then normalized.
pub fn leverage_probabilities(scores: &LeverageScores) -> Result<DVector<f64>> {
    let s = &scores.scores;
    if !s.len().is_multiple_of(2) || s.is_empty() {
        return Err(Error::input(format!(
            "expected an even number of column scores, got {}",
            s.len()
        )));
    }
    let m0 = s.len() / 2;
    let combined = DVector::from_fn(m0, |j, _| s[j] + s[m0 + j]);
    let total = combined.sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Degenerate("all leverage scores are zero".into()));
    }
    Ok(combined / total)
}

/// Draws `m` frequencies with replacement with probability proportional to
/// their leverage, attaching importance weights `1 / sqrt(m0 p_j)` so the
/// reweighted map is an unbiased estimate of the candidate-set kernel.
pub fn resample_by_leverage<R: Rng + ?Sized>(
    candidates: &FrequencyMatrix,
    scores: &LeverageScores,
    m: usize,
    rng: &mut R,
) -> Result<FrequencyMatrix> {
    let m0 = candidates.len();
    if m == 0 {
        return Err(Error::input("number of frequencies m must be at least 1"));
    }
    if m0 < m {
        return Err(Error::input(format!(
            "need at least {m} candidate frequencies, got {m0}"
        )));
    }
    if scores.scores.len() != 2 * m0 {
        return Err(Error::input(format!(
            "{} scores for {m0} candidate frequencies (expected {})",
            scores.scores.len(),
            2 * m0
        )));
    }
    let p = leverage_probabilities(scores)?;
    let dist = WeightedIndex::new(p.iter().copied())
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let d = candidates.dim();
    let mut omega = DMatrix::zeros(m, d);
    let mut weights = DVector::zeros(m);
    for s in 0..m {
        let j = dist.sample(rng);
        omega.row_mut(s).copy_from(&candidates.omega().row(j));
        weights[s] = 1.0 / (m0 as f64 * p[j]).sqrt();
    }
    FrequencyMatrix::with_column_weights(omega, weights)
}

/// Default oversampling factor `m0 = 8 m` for the leverage pipeline.
pub const LEVERAGE_OVERSAMPLE: usize = 8;

/// Oversample-then-resample pipeline: `oversample * m` i.i.d. candidates,
/// column ridge leverage scores on `x`, and leverage resampling down to `m`.
pub fn sample_frequencies_leverage<R: Rng + ?Sized>(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    m: usize,
    lambda: f64,
    oversample: usize,
    rng: &mut R,
) -> Result<FrequencyMatrix> {
    if oversample == 0 {
        return Err(Error::config("oversampling factor must be at least 1"));
    }
    let candidates = sample_frequencies_iid(spec, m * oversample, x.ncols(), rng)?;
    let phi = feature_map(x, &candidates)?;
    let scores = ridge_leverage_scores(&phi, lambda)?;
    resample_by_leverage(&candidates, &scores, m, rng)
}

/// Two independent frequency matrices for the two-density non-stationary
/// map. With `shared_draw`, `spec1` is sampled once and used for both.
pub fn sample_frequency_pairs_nonstationary<R: Rng + ?Sized>(
    spec1: &KernelSpec,
    spec2: &KernelSpec,
    m: usize,
    d: usize,
    shared_draw: bool,
    rng: &mut R,
) -> Result<(FrequencyMatrix, FrequencyMatrix)> {
    samplable(spec2)?;
    let mut first = sample_frequencies_iid(spec1, m, d, rng)?;
    first.provenance = Provenance::NonstationaryPair;
    let second = if shared_draw {
        first.clone()
    } else {
        let mut s = sample_frequencies_iid(spec2, m, d, rng)?;
        s.provenance = Provenance::NonstationaryPair;
        s
    };
    Ok((first, second))
}
