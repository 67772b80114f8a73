use nalgebra::{DMatrix, DVector};
use rff_core::data::gen_spatial;
use rff_core::features::{approx_kernel, feature_map};
use rff_core::kernels::{cross_kernel, gram_matrix, KernelSpec};
use rff_core::regression::{fit_kernel_ridge, fit_ridge_dual, fit_ridge_primal, predict, PredictInput};
use rff_core::seeded_rng;
use rff_core::spectral::{sample_frequencies_iid, sample_frequencies_leverage, LEVERAGE_OVERSAMPLE};

fn rms(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    ((a - b).norm_squared() / a.len() as f64).sqrt()
}

#[test]
fn rff_ridge_approaches_exact_kernel_ridge() {
    let spec = KernelSpec::squared_exponential(1.0, 1.0);
    let train = gen_spatial(120, &mut seeded_rng(1)).unwrap();
    let test = gen_spatial(60, &mut seeded_rng(2)).unwrap();
    let lambda = 0.5;
    let k = gram_matrix(&spec, &train.x).unwrap().entries;
    let exact_fit = fit_kernel_ridge(&k, &train.y, lambda).unwrap();
    let exact = predict(&exact_fit, PredictInput::CrossKernel(&cross_kernel(&spec, &test.x, &train.x).unwrap())).unwrap();

    let mut gaps = Vec::new();
    for m in [64, 256, 1024, 4096] {
        let mut total = 0.0;
        for seed in 0..8 {
            let omega = sample_frequencies_iid(&spec, m, 2, &mut seeded_rng(100 + seed)).unwrap();
            let phi = feature_map(&train.x, &omega).unwrap();
            let phi_test = feature_map(&test.x, &omega).unwrap();
            // Ridge in feature space, solved through the N x N system.
            let fit = fit_ridge_dual(phi.phi(), &train.y, lambda).unwrap();
            total += rms(&predict(&fit, PredictInput::Design(phi_test.phi())).unwrap(), &exact);
        }
        gaps.push(total / 8.0);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn woodbury_routes_agree() {
    let spec = KernelSpec::squared_exponential(1.0, 0.8);
    for (seed, (n, m)) in [(40, 16), (100, 64), (200, 256), (150, 200)].into_iter().enumerate() {
        let seed = seed as u64;
        let ds = gen_spatial(n, &mut seeded_rng(seed)).unwrap();
        let query = gen_spatial(25, &mut seeded_rng(50 + seed)).unwrap();
        let omega = sample_frequencies_iid(&spec, m, 2, &mut seeded_rng(90 + seed)).unwrap();
        let phi = feature_map(&ds.x, &omega).unwrap();
        let phi_q = feature_map(&query.x, &omega).unwrap();
        for lambda in [0.1, 1.0, 10.0] {
            let primal = fit_ridge_primal(phi.phi(), &ds.y, lambda).unwrap();
            let yp = predict(&primal, PredictInput::Design(phi_q.phi())).unwrap();
            let khat = approx_kernel(&phi).unwrap();
            let dual = fit_kernel_ridge(&khat, &ds.y, lambda).unwrap();
            let cross = phi_q.phi() * phi.phi().transpose();
            let yd = predict(&dual, PredictInput::CrossKernel(&cross)).unwrap();
            assert!((&yp - &yd).norm() / yp.norm() < 1e-8);
        }
    }
}

#[test]
fn matern_features_approximate_exact_matern() {
    let x = DMatrix::from_fn(40, 2, |i, j| ((i * 7 + j * 3) as f64 * 0.61).sin() * 1.5);
    for nu in [0.5, 1.5, 2.5] {
        let spec = KernelSpec::matern(1.0, 0.9, nu);
        let exact = gram_matrix(&spec, &x).unwrap().entries;
        let omega = sample_frequencies_iid(&spec, 20000, 2, &mut seeded_rng(3)).unwrap();
        let khat = approx_kernel(&feature_map(&x, &omega).unwrap()).unwrap();
        assert!((khat - exact).amax() < 0.05, "nu = {nu}");
    }
}

#[test]
fn heavy_tailed_families_are_approximated() {
    let x = DMatrix::from_fn(30, 2, |i, j| ((i * 5 + j) as f64 * 0.77).cos());
    for spec in [KernelSpec::cauchy(1.0), KernelSpec::laplacian(0.7)] {
        let exact = gram_matrix(&spec, &x).unwrap().entries;
        let omega = sample_frequencies_iid(&spec, 20000, 2, &mut seeded_rng(4)).unwrap();
        let khat = approx_kernel(&feature_map(&x, &omega).unwrap()).unwrap();
        assert!((khat - exact).amax() < 0.05, "{spec:?}");
    }
}

#[test]
fn leverage_features_approximate_the_kernel() {
    let spec = KernelSpec::squared_exponential(1.0, 1.0);
    let ds = gen_spatial(150, &mut seeded_rng(6)).unwrap();
    let exact = gram_matrix(&spec, &ds.x).unwrap().entries;
    let omega =
        sample_frequencies_leverage(&spec, &ds.x, 1024, 1.0, LEVERAGE_OVERSAMPLE, &mut seeded_rng(7)).unwrap();
    let khat = approx_kernel(&feature_map(&ds.x, &omega).unwrap()).unwrap();
    let rel = (&khat - &exact).norm() / exact.norm();
    assert!(rel < 0.1, "relative Frobenius error {rel}");
}
