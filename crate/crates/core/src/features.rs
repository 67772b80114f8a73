//! Random Fourier feature maps and the kernel approximations they induce.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::check_finite;
use crate::par::{fill_rows, Parallelism};
use crate::spectral::FrequencyMatrix;

/// Where a feature matrix came from.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureSource {
    Stationary(FrequencyMatrix),
    Nonstationary(FrequencyMatrix, FrequencyMatrix),
    /// An arbitrary matrix wrapped for leverage computations.
    Raw,
}

/// `N x 2m` basis `[cos block | sin block]` with the Monte Carlo scaling applied.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    phi: DMatrix<f64>,
    scaling: f64,
    source: FeatureSource,
}

impl FeatureMatrix {
    /// Wraps an arbitrary matrix as a feature matrix with unit scaling.
    pub fn from_raw(phi: DMatrix<f64>) -> Self {
        FeatureMatrix {
            phi,
            scaling: 1.0,
            source: FeatureSource::Raw,
        }
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.phi
    }

    /// `1/sqrt(m)` for stationary maps, `1/(2 sqrt(m))` for non-stationary ones.
    pub fn scaling(&self) -> f64 {
        self.scaling
    }

    pub fn source(&self) -> &FeatureSource {
        &self.source
    }

    pub fn nrows(&self) -> usize {
        self.phi.nrows()
    }

    /// Number of basis columns, `2m`.
    pub fn ncols(&self) -> usize {
        self.phi.ncols()
    }

    /// `sigma * Phi`, whose Gram matrix carries the kernel's `sigma^2` prefactor.
    pub fn scaled(&self, sigma: f64) -> FeatureMatrix {
        FeatureMatrix {
            phi: &self.phi * sigma,
            scaling: self.scaling * sigma,
            source: self.source.clone(),
        }
    }

    /// Columns reordered as `cos_1, sin_1, cos_2, sin_2, ...`.
    ///
    /// With nested frequency sets, the interleaved column order of a smaller
    /// map is a prefix of a larger one's.
    pub fn interleaved(&self) -> DMatrix<f64> {
        let m = self.phi.ncols() / 2;
        DMatrix::from_fn(self.phi.nrows(), 2 * m, |i, j| {
            let src = if j % 2 == 0 { j / 2 } else { m + j / 2 };
            self.phi[(i, src)]
        })
    }
}

fn rows_of(x: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for r in x.row_iter() {
        out.extend(r.iter());
    }
    out
}

fn check_dims(x: &DMatrix<f64>, omega: &FrequencyMatrix) -> Result<()> {
    if x.ncols() != omega.dim() {
        return Err(Error::input(format!(
            "design has {} columns but frequencies have dimension {}",
            x.ncols(),
            omega.dim()
        )));
    }
    check_finite(x, "design matrix")
}

/// `Phi = [cos(X W^T) | sin(X W^T)] / sqrt(m)`.
///
/// Leverage-resampled frequencies multiply each frequency's cosine and sine
/// columns by its importance weight.
pub fn feature_map(x: &DMatrix<f64>, omega: &FrequencyMatrix) -> Result<FeatureMatrix> {
    feature_map_with(x, omega, Parallelism::default())
}

pub fn feature_map_with(
    x: &DMatrix<f64>,
    omega: &FrequencyMatrix,
    par: Parallelism,
) -> Result<FeatureMatrix> {
    check_dims(x, omega)?;
    let (n, d, m) = (x.nrows(), x.ncols(), omega.len());
    let scaling = 1.0 / (m as f64).sqrt();
    let xr = rows_of(x);
    let wr = rows_of(omega.omega());
    let weights: Option<Vec<f64>> = omega.column_weights().map(|w| w.iter().copied().collect());
    let buf = fill_rows(n, 2 * m, par, |i, out| {
        let xi = &xr[i * d..(i + 1) * d];
        let (cos_part, sin_part) = out.split_at_mut(m);
        for j in 0..m {
            let p = projection(xi, &wr[j * d..(j + 1) * d]);
            let (s, c) = sin_cos(p);
            let scale = match &weights {
                Some(w) => scaling * w[j],
                None => scaling,
            };
            cos_part[j] = c * scale;
            sin_part[j] = s * scale;
        }
    });
    Ok(FeatureMatrix {
        phi: DMatrix::from_row_slice(n, 2 * m, &buf),
        scaling,
        source: FeatureSource::Stationary(omega.clone()),
    })
}

/// `(sin p, cos p)` through a single out-of-line call, so that every map
/// evaluates the same libm routine for the same argument.
#[inline(never)]
fn sin_cos(p: f64) -> (f64, f64) {
    p.sin_cos()
}

#[inline]
fn projection(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Two-density map
/// `[cos(X W1^T) + cos(X W2^T) | sin(X W1^T) + sin(X W2^T)] / (2 sqrt(m))`.
///
/// The `1/(2 sqrt(m))` factor makes `W1 = W2` reproduce [`feature_map`] bit for bit.
pub fn feature_map_nonstationary(
    x: &DMatrix<f64>,
    omega1: &FrequencyMatrix,
    omega2: &FrequencyMatrix,
) -> Result<FeatureMatrix> {
    feature_map_nonstationary_with(x, omega1, omega2, Parallelism::default())
}

pub fn feature_map_nonstationary_with(
    x: &DMatrix<f64>,
    omega1: &FrequencyMatrix,
    omega2: &FrequencyMatrix,
    par: Parallelism,
) -> Result<FeatureMatrix> {
    if omega1.omega().shape() != omega2.omega().shape() {
        return Err(Error::input(format!(
            "frequency matrices differ in shape: {:?} vs {:?}",
            omega1.omega().shape(),
            omega2.omega().shape()
        )));
    }
    if omega1.column_weights().is_some() || omega2.column_weights().is_some() {
        return Err(Error::input(
            "weighted (leverage) frequencies are not supported by the non-stationary map",
        ));
    }
    check_dims(x, omega1)?;
    let (n, d, m) = (x.nrows(), x.ncols(), omega1.len());
    let scaling = 0.5 * (1.0 / (m as f64).sqrt());
    let xr = rows_of(x);
    let w1 = rows_of(omega1.omega());
    let w2 = rows_of(omega2.omega());
    let buf = fill_rows(n, 2 * m, par, |i, out| {
        let xi = &xr[i * d..(i + 1) * d];
        let (cos_part, sin_part) = out.split_at_mut(m);
        for j in 0..m {
            let (s1, c1) = sin_cos(projection(xi, &w1[j * d..(j + 1) * d]));
            let (s2, c2) = sin_cos(projection(xi, &w2[j * d..(j + 1) * d]));
            cos_part[j] = (c1 + c2) * scaling;
            sin_part[j] = (s1 + s2) * scaling;
        }
    });
    Ok(FeatureMatrix {
        phi: DMatrix::from_row_slice(n, 2 * m, &buf),
        scaling,
        source: FeatureSource::Nonstationary(omega1.clone(), omega2.clone()),
    })
}

/// `K_hat = Phi Phi^T`.
pub fn approx_kernel(phi: &FeatureMatrix) -> Result<DMatrix<f64>> {
    approx_kernel_with(phi, Parallelism::default())
}

pub fn approx_kernel_with(phi: &FeatureMatrix, par: Parallelism) -> Result<DMatrix<f64>> {
    let a = phi.phi();
    check_finite(a, "feature matrix")?;
    let (n, k) = (a.nrows(), a.ncols());
    let ar = rows_of(a);
    // Lower triangle only; the upper one is mirrored afterwards.
    let buf = fill_rows(n, n, par, |i, out| {
        let ai = &ar[i * k..(i + 1) * k];
        for (j, o) in out.iter_mut().enumerate().take(i + 1) {
            *o = dot(ai, &ar[j * k..(j + 1) * k]);
        }
    });
    let mut khat = DMatrix::from_row_slice(n, n, &buf);
    for i in 0..n {
        for j in i + 1..n {
            khat[(i, j)] = khat[(j, i)];
        }
    }
    Ok(khat)
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `A B^T` for two feature matrices over the same basis.
pub fn cross_features_with(a: &DMatrix<f64>, b: &DMatrix<f64>, par: Parallelism) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::input(format!(
            "feature matrices have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    check_finite(a, "feature matrix")?;
    check_finite(b, "feature matrix")?;
    let k = a.ncols();
    let ar = rows_of(a);
    let br = rows_of(b);
    let buf = fill_rows(a.nrows(), b.nrows(), par, |i, out| {
        let ai = &ar[i * k..(i + 1) * k];
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(ai, &br[j * k..(j + 1) * k]);
        }
    });
    Ok(DMatrix::from_row_slice(a.nrows(), b.nrows(), &buf))
}

/// Draws a random function `f = Phi(grid) w` with `w ~ N(0, I_{2m})`.
pub fn sample_function<R: Rng + ?Sized>(
    omega: &FrequencyMatrix,
    grid: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let w = DVector::from_fn(2 * omega.len(), |_, _| StandardNormal.sample(rng));
    sample_function_with_weights(omega, grid, &w)
}

/// `Phi(grid) w` for caller-supplied basis weights.
pub fn sample_function_with_weights(
    omega: &FrequencyMatrix,
    grid: &DMatrix<f64>,
    weights: &DVector<f64>,
) -> Result<DVector<f64>> {
    if weights.len() != 2 * omega.len() {
        return Err(Error::input(format!(
            "{} weights for {} basis columns",
            weights.len(),
            2 * omega.len()
        )));
    }
    let phi = feature_map(grid, omega)?;
    Ok(phi.phi() * weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram_matrix, KernelSpec};
    use crate::spectral::{sample_frequencies_iid, Provenance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud(seed: u64, n: usize, d: usize) -> DMatrix<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0))
    }

    fn se_freqs(m: usize, d: usize, seed: u64) -> FrequencyMatrix {
        sample_frequencies_iid(
            &KernelSpec::squared_exponential(1.0, 1.0),
            m,
            d,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn zero_row_maps_to_unit_cosines() {
        let m = 16;
        let x = DMatrix::zeros(1, 3);
        let phi = feature_map(&x, &se_freqs(m, 3, 1)).unwrap();
        for j in 0..m {
            assert_eq!(phi.phi()[(0, j)], 1.0 / (m as f64).sqrt());
            assert_eq!(phi.phi()[(0, m + j)], 0.0);
        }
    }

    #[test]
    fn rows_have_unit_norm() {
        let phi = feature_map(&cloud(2, 50, 2), &se_freqs(33, 2, 2)).unwrap();
        for r in phi.phi().row_iter() {
            assert!((r.norm_squared() - 1.0).abs() < 1e-12);
            assert!(r.iter().all(|v| v.abs() <= 2.0 * phi.scaling()));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let err = feature_map(&cloud(3, 4, 3), &se_freqs(8, 2, 3)).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn approx_kernel_close_to_exact_se() {
        let x = cloud(4, 200, 2);
        let phi = feature_map(&x, &se_freqs(4096, 2, 4)).unwrap();
        let k_hat = approx_kernel(&phi).unwrap();
        let k = gram_matrix(&KernelSpec::squared_exponential(1.0, 1.0), &x).unwrap();
        let err = (&k_hat - &k.entries).amax();
        assert!(err < 0.05, "max error {err}");
        for i in 0..200 {
            assert!((k_hat[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..i {
                assert_eq!(k_hat[(i, j)], k_hat[(j, i)]);
            }
        }
    }

    #[test]
    fn output_scale_multiplies_kernel_by_sigma_squared() {
        let x = cloud(5, 30, 2);
        let phi = feature_map(&x, &se_freqs(64, 2, 5)).unwrap();
        let base = approx_kernel(&phi).unwrap();
        for sigma in [0.5, 1.0, 2.0] {
            let scaled = approx_kernel(&phi.scaled(sigma)).unwrap();
            assert!((&scaled - &base * (sigma * sigma)).amax() < 1e-12);
        }
    }

    #[test]
    fn parallel_and_sequential_are_bitwise_equal() {
        let x = cloud(6, 120, 3);
        let w = se_freqs(200, 3, 6);
        let a = feature_map_with(&x, &w, Parallelism::Sequential).unwrap();
        let b = feature_map_with(&x, &w, Parallelism::Parallel).unwrap();
        assert_eq!(a.phi(), b.phi());
        let ka = approx_kernel_with(&a, Parallelism::Sequential).unwrap();
        let kb = approx_kernel_with(&a, Parallelism::Parallel).unwrap();
        assert_eq!(ka, kb);
    }

    #[test]
    fn nonstationary_with_equal_frequencies_is_stationary() {
        let x = cloud(7, 40, 2);
        let w = se_freqs(50, 2, 7);
        let s = feature_map(&x, &w).unwrap();
        let ns = feature_map_nonstationary(&x, &w, &w).unwrap();
        for (i, (a, b)) in s.phi().iter().zip(ns.phi().iter()).enumerate() {
            assert_eq!(a.to_bits(), b.to_bits(), "entry {i}: {a} vs {b}");
        }
    }

    #[test]
    fn nonstationary_zero_row_and_shape_errors() {
        let w1 = se_freqs(9, 2, 8);
        let w2 = se_freqs(9, 2, 9);
        let ns = feature_map_nonstationary(&DMatrix::zeros(1, 2), &w1, &w2).unwrap();
        for j in 0..9 {
            assert!((ns.phi()[(0, j)] - 1.0 / 3.0).abs() < 1e-15);
            assert_eq!(ns.phi()[(0, 9 + j)], 0.0);
        }
        let w3 = se_freqs(8, 2, 10);
        assert!(matches!(
            feature_map_nonstationary(&DMatrix::zeros(1, 2), &w1, &w3),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn zero_weights_give_zero_function() {
        let w = se_freqs(10, 1, 11);
        let grid = DMatrix::from_fn(20, 1, |i, _| i as f64 * 0.1);
        let f = sample_function_with_weights(&w, &grid, &DVector::zeros(20)).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    /// Discrete Fourier power at integer angular frequency `k` of a signal on
    /// an evenly spaced grid over `[0, 2 pi)`.
    fn dft_power(f: &DVector<f64>, k: usize) -> f64 {
        let n = f.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in f.iter().enumerate() {
            let a = 2.0 * std::f64::consts::PI * k as f64 * t as f64 / n;
            re += v * a.cos();
            im -= v * a.sin();
        }
        re * re + im * im
    }

    #[test]
    fn point_mass_spectrum_concentrates_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = 40;
        let omega = DMatrix::from_fn(m, 1, |_, _| if rng.random_bool(0.5) { 1.0 } else { 2.0 });
        let omega = FrequencyMatrix::new(omega, Provenance::Iid).unwrap();
        let n = 64;
        let grid = DMatrix::from_fn(n, 1, |i, _| 2.0 * std::f64::consts::PI * i as f64 / n as f64);
        let f = sample_function(&omega, &grid, &mut rng).unwrap();
        let total: f64 = (0..=n / 2).map(|k| dft_power(&f, k)).sum();
        let at_peaks = dft_power(&f, 1) + dft_power(&f, 2);
        assert!(at_peaks / total > 0.99, "{}", at_peaks / total);
    }

    #[test]
    fn sampled_function_covariance_matches_k_hat() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let omega = se_freqs(30, 1, 13);
        let grid = DMatrix::from_fn(20, 1, |i, _| -2.0 + 0.2 * i as f64);
        let k_hat = approx_kernel(&feature_map(&grid, &omega).unwrap()).unwrap();
        let draws = 2000;
        let mut cov = DMatrix::zeros(20, 20);
        for _ in 0..draws {
            let f = sample_function(&omega, &grid, &mut rng).unwrap();
            cov += &f * f.transpose();
        }
        cov /= draws as f64;
        let err = (&cov - &k_hat).amax();
        assert!(err < 0.1, "max covariance error {err}");
    }

    #[test]
    fn interleaved_columns_nest() {
        let x = cloud(14, 5, 2);
        let w = se_freqs(6, 2, 14);
        let small = feature_map(&x, &w.truncated(3).unwrap()).unwrap().scaled(3f64.sqrt());
        let large = feature_map(&x, &w).unwrap().scaled(6f64.sqrt());
        let a = small.interleaved();
        let b = large.interleaved();
        assert!((&a - b.columns(0, 6)).amax() < 1e-15);
    }
}
