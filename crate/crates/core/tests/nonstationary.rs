//! Checks of the two-density feature map against a Gauss-Hermite oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use rff_core::features::{approx_kernel, feature_map, feature_map_nonstationary};
use rff_core::kernels::{kernel_eval, KernelSpec};
use rff_core::seeded_rng;
use rff_core::spectral::sample_frequency_pairs_nonstationary;

/// Nodes and weights of the `n`-point rule for `E[f(Z)]`, `Z ~ N(0, 1)`,
/// from the eigen-decomposition of the Hermite Jacobi matrix.
fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect()
}

/// `E[f(w1, w2)]` with `w1 ~ N(0, s1^2)` and `w2 ~ N(0, s2^2)` independent.
fn expect2(s1: f64, s2: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    let rule = gauss_hermite(60);
    let mut total = 0.0;
    for &(a, wa) in &rule {
        for &(b, wb) in &rule {
            total += wa * wb * f(s1 * a, s2 * b);
        }
    }
    total
}

/// Expected feature inner product of the two-density map, integrated over the
/// joint frequency measure.
fn map_oracle(s1: f64, s2: f64, x: f64, z: f64) -> f64 {
    expect2(s1, s2, |w1, w2| {
        0.25 * ((w1 * (x - z)).cos()
            + (w2 * (x - z)).cos()
            + (w1 * x - w2 * z).cos()
            + (w2 * x - w1 * z).cos())
    })
}

fn se(l: f64) -> KernelSpec {
    KernelSpec::squared_exponential(1.0, l)
}

#[test]
fn quadrature_rule_integrates_gaussian_moments() {
    let rule = gauss_hermite(30);
    let m0: f64 = rule.iter().map(|(_, w)| w).sum();
    let m2: f64 = rule.iter().map(|(x, w)| w * x * x).sum();
    let m4: f64 = rule.iter().map(|(x, w)| w * x.powi(4)).sum();
    assert!((m0 - 1.0).abs() < 1e-13);
    assert!((m2 - 1.0).abs() < 1e-12);
    assert!((m4 - 3.0).abs() < 1e-11);
}

#[test]
fn cross_term_integrates_to_product_of_kernels() {
    // Under independent frequency draws, the cross term factorizes into
    // k1(x) k2(z), the product-measure kernel.
    let (x, z) = (0.5, -0.5);
    let got = expect2(1.0, 0.5, |w1, w2| (w1 * x - w2 * z).cos());
    let want = kernel_eval(&se(1.0), &[x], &[0.0]).unwrap() * kernel_eval(&se(2.0), &[z], &[0.0]).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn oracle_reduces_to_stationary_kernel_for_equal_densities() {
    for &(x, z) in &[(0.5, -0.5), (1.2, 0.3), (-2.0, 1.0)] {
        let got = map_oracle(1.0, 1.0, x, z);
        // With equal densities the two diagonal terms give k(x - z) and the
        // cross terms give k(x) k(z).
        let k = |t: f64| (-0.5 * t * t).exp();
        let want = 0.5 * k(x - z) + 0.5 * k(x) * k(z);
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn two_density_map_matches_quadrature_oracle() {
    let (m, seeds) = (8192, 5);
    let pairs = [(0.5, -0.5), (0.0, 1.0), (1.5, 0.7), (-1.0, -1.0)];
    let x = DMatrix::from_row_slice(2 * pairs.len(), 1, &pairs.iter().flat_map(|&(a, b)| [a, b]).collect::<Vec<_>>());
    for seed in 0..seeds {
        let (w1, w2) =
            sample_frequency_pairs_nonstationary(&se(1.0), &se(2.0), m, 1, false, &mut seeded_rng(seed)).unwrap();
        let k = approx_kernel(&feature_map_nonstationary(&x, &w1, &w2).unwrap()).unwrap();
        for (p, &(a, b)) in pairs.iter().enumerate() {
            let oracle = map_oracle(1.0, 0.5, a, b);
            let got = k[(2 * p, 2 * p + 1)];
            assert!((got - oracle).abs() < 0.05, "seed {seed} ({a}, {b}): {got} vs {oracle}");
        }
    }
}

#[test]
fn equal_frequency_sets_reproduce_stationary_map_exactly() {
    let x = DMatrix::from_fn(30, 2, |i, j| (i as f64 * 0.37 + j as f64).sin() * 2.0);
    for seed in 0..5 {
        let (w, w_same) =
            sample_frequency_pairs_nonstationary(&se(1.3), &se(1.3), 77, 2, true, &mut seeded_rng(seed)).unwrap();
        let a = feature_map(&x, &w).unwrap();
        let b = feature_map_nonstationary(&x, &w, &w_same).unwrap();
        for (u, v) in a.phi().iter().zip(b.phi().iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}
