//! Exact kernel evaluation, Gram matrices and explicit finite feature maps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::par::{fill_rows, Parallelism};
use crate::special::ln_matern_correlation;

/// Lags shorter than this are treated as zero for the Matérn family.
const MATERN_ZERO_LAG: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    SquaredExponential,
    Matern,
    /// `prod_i 1 / (1 + delta_i^2)`, whose spectral density is `exp(-|w|_1) / 2^d`.
    Cauchy,
    /// `exp(-sigma |delta|_1)`, whose spectral density is a product of Cauchy(0, sigma).
    Laplacian,
    Polynomial,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "se",
            KernelFamily::Matern => "matern",
            KernelFamily::Cauchy => "cauchy",
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Polynomial => "polynomial",
        }
    }

    pub fn is_shift_invariant(self) -> bool {
        !matches!(self, KernelFamily::Polynomial)
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "squared-exponential" | "gaussian" | "rbf" => Ok(KernelFamily::SquaredExponential),
            "matern" => Ok(KernelFamily::Matern),
            "cauchy" => Ok(KernelFamily::Cauchy),
            "laplacian" | "laplace" => Ok(KernelFamily::Laplacian),
            "polynomial" | "poly" => Ok(KernelFamily::Polynomial),
            other => Err(Error::config(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// Kernel family plus hyperparameters.
///
/// Which fields are read depends on the family:
///
/// | family     | fields read                          |
/// |------------|--------------------------------------|
/// | SE         | `sigma` (output scale), `lengthscale` |
/// | Matérn     | `sigma`, `lengthscale`, `smoothness`  |
/// | Cauchy     | `sigma` (output scale)                |
/// | Laplacian  | `sigma` (decay rate)                  |
/// | Polynomial | `theta`, `degree`                     |
///
/// Unread fields are ignored and never validated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub sigma: f64,
    pub lengthscale: f64,
    pub smoothness: f64,
    pub theta: f64,
    pub degree: u32,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            family: KernelFamily::SquaredExponential,
            sigma: 1.0,
            lengthscale: 1.0,
            smoothness: 1.5,
            theta: 1.0,
            degree: 2,
        }
    }
}

impl KernelSpec {
    pub fn squared_exponential(sigma: f64, lengthscale: f64) -> Self {
        KernelSpec {
            sigma,
            lengthscale,
            ..Default::default()
        }
    }

    pub fn matern(sigma: f64, lengthscale: f64, smoothness: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Matern,
            sigma,
            lengthscale,
            smoothness,
            ..Default::default()
        }
    }

    pub fn cauchy(sigma: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Cauchy,
            sigma,
            ..Default::default()
        }
    }

    pub fn laplacian(rate: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Laplacian,
            sigma: rate,
            ..Default::default()
        }
    }

    pub fn polynomial(theta: f64, degree: u32) -> Self {
        KernelSpec {
            family: KernelFamily::Polynomial,
            theta,
            degree,
            ..Default::default()
        }
    }

    /// Checks the hyperparameters the family reads.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self.family {
            KernelFamily::SquaredExponential => {
                positive("sigma", self.sigma)?;
                positive("lengthscale", self.lengthscale)
            }
            KernelFamily::Matern => {
                positive("sigma", self.sigma)?;
                positive("lengthscale", self.lengthscale)?;
                positive("smoothness", self.smoothness)
            }
            KernelFamily::Cauchy | KernelFamily::Laplacian => positive("sigma", self.sigma),
            KernelFamily::Polynomial => {
                if !(self.theta.is_finite() && self.theta >= 0.0) {
                    return Err(Error::config(format!(
                        "theta must be nonnegative, got {}",
                        self.theta
                    )));
                }
                if self.degree < 1 {
                    return Err(Error::config("polynomial degree must be at least 1"));
                }
                Ok(())
            }
        }
    }

    /// Multiplier applied to a unit-variance random feature map so that its
    /// inner products approximate this kernel: `k(x, x) = output_scale^2`.
    pub fn output_scale(&self) -> f64 {
        match self.family {
            KernelFamily::Laplacian => 1.0,
            _ => self.sigma,
        }
    }

    /// Kernel value at lag `delta = x - z` for shift-invariant families.
    pub fn eval_lag(&self, delta: &[f64]) -> Result<f64> {
        let s2 = self.sigma * self.sigma;
        Ok(match self.family {
            KernelFamily::SquaredExponential => {
                let r2: f64 = delta.iter().map(|d| d * d).sum();
                s2 * (-r2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
            }
            KernelFamily::Matern => {
                let r = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
                if r < MATERN_ZERO_LAG {
                    s2
                } else {
                    let nu = self.smoothness;
                    let z = (2.0 * nu).sqrt() * r / self.lengthscale;
                    s2 * ln_matern_correlation(nu, z).exp()
                }
            }
            KernelFamily::Cauchy => s2 * delta.iter().map(|d| 1.0 / (1.0 + d * d)).product::<f64>(),
            KernelFamily::Laplacian => {
                (-self.sigma * delta.iter().map(|d| d.abs()).sum::<f64>()).exp()
            }
            KernelFamily::Polynomial => {
                return Err(Error::UnsupportedFamily(
                    "polynomial kernel is not shift-invariant".into(),
                ))
            }
        })
    }

    fn eval_unchecked(&self, x: &[f64], z: &[f64], lag: &mut [f64]) -> f64 {
        if self.family == KernelFamily::Polynomial {
            let dot: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
            return (dot + self.theta).powi(self.degree as i32);
        }
        for ((l, a), b) in lag.iter_mut().zip(x).zip(z) {
            *l = a - b;
        }
        self.eval_lag(lag).expect("shift-invariant family")
    }
}

/// `k(x, z)` for the kernel described by `spec`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != z.len() {
        return Err(Error::input(format!(
            "dimension mismatch: x has {} entries, z has {}",
            x.len(),
            z.len()
        )));
    }
    let mut lag = vec![0.0; x.len()];
    Ok(spec.eval_unchecked(x, z, &mut lag))
}

/// Exact kernel matrix over the rows of a design matrix.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub spec: KernelSpec,
}

impl GramMatrix {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest `|K_ij - K_ji|` relative to the largest absolute entry.
    pub fn asymmetry(&self) -> f64 {
        relative_asymmetry(&self.entries)
    }
}

pub(crate) fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub(crate) fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % m.nrows(), pos / m.nrows());
        return Err(Error::input(format!(
            "{what} has a non-finite entry at row {r}, column {c}"
        )));
    }
    Ok(())
}

/// `K(X, X)` in closed form.
pub fn gram_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<GramMatrix> {
    gram_matrix_with(spec, x, Parallelism::default())
}

pub fn gram_matrix_with(spec: &KernelSpec, x: &DMatrix<f64>, par: Parallelism) -> Result<GramMatrix> {
    spec.validate()?;
    if x.nrows() == 0 {
        return Err(Error::input("design matrix has no rows"));
    }
    check_finite(x, "design matrix")?;
    let entries = cross_kernel_with(spec, x, x, par)?;
    // Enforce exact symmetry; both triangles are computed with the same
    // arithmetic except for the lag sign.
    let mut entries = entries;
    for i in 0..entries.nrows() {
        for j in 0..i {
            entries[(i, j)] = entries[(j, i)];
        }
    }
    Ok(GramMatrix {
        entries,
        spec: *spec,
    })
}

/// `K(A, B)` with entry `(i, j) = k(a_i, b_j)`.
pub fn cross_kernel(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cross_kernel_with(spec, a, b, Parallelism::default())
}

pub fn cross_kernel_with(
    spec: &KernelSpec,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    par: Parallelism,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if a.ncols() != b.ncols() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let d = a.ncols();
    let a_rows: Vec<Vec<f64>> = a.row_iter().map(|r| r.iter().copied().collect()).collect();
    let b_rows: Vec<Vec<f64>> = b.row_iter().map(|r| r.iter().copied().collect()).collect();
    let buf = fill_rows(a.nrows(), b.nrows(), par, |i, out| {
        let mut lag = vec![0.0; d];
        for (j, o) in out.iter_mut().enumerate() {
            *o = spec.eval_unchecked(&a_rows[i], &b_rows[j], &mut lag);
        }
    });
    Ok(DMatrix::from_row_slice(a.nrows(), b.nrows(), &buf))
}

/// Explicit map whose inner product is the degree-2 homogeneous polynomial
/// kernel: `(x1^2, sqrt(2) x1 x2, x2^2)`.
pub fn poly2_feature_map(x: &[f64]) -> Result<[f64; 3]> {
    if x.len() != 2 {
        return Err(Error::input(format!(
            "poly2 feature map needs a 2-vector, got {} entries",
            x.len()
        )));
    }
    Ok([
        x[0] * x[0],
        std::f64::consts::SQRT_2 * x[0] * x[1],
        x[1] * x[1],
    ])
}

/// First `n_terms` coordinates of the infinite Taylor feature map of the 1-d
/// Gaussian kernel `exp(-gamma (x - z)^2)`:
///
/// `phi_n(x) = exp(-gamma x^2) * sqrt((2 gamma)^n / n!) * x^n`.
///
/// Magnitudes are accumulated in log space so large `n` or `|2 gamma x| > 1`
/// never overflow.
pub fn gaussian_taylor_features(x: f64, gamma: f64, n_terms: usize) -> Result<DVector<f64>> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::config(format!("gamma must be positive, got {gamma}")));
    }
    if n_terms == 0 {
        return Err(Error::config("n_terms must be at least 1"));
    }
    if !x.is_finite() {
        return Err(Error::input("x must be finite"));
    }
    let base = -gamma * x * x;
    let ln_two_gamma = (2.0 * gamma).ln();
    let ln_abs_x = x.abs().ln();
    let mut out = DVector::zeros(n_terms);
    let mut ln_factorial = 0.0;
    for n in 0..n_terms {
        if n > 0 {
            ln_factorial += (n as f64).ln();
        }
        if n == 0 {
            out[0] = base.exp();
            continue;
        }
        if x == 0.0 {
            continue;
        }
        let nf = n as f64;
        let ln_mag = base + 0.5 * (nf * ln_two_gamma - ln_factorial) + nf * ln_abs_x;
        let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
        out[n] = sign * ln_mag.exp();
    }
    Ok(out)
}
