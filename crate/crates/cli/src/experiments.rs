use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rff_core::data::{self, gen_epidemic, gen_spatial, polynomial_basis, train_test_split, Dataset};
use rff_core::features::{approx_kernel, feature_map, sample_function, FeatureMatrix};
use rff_core::kernels::gram_matrix;
use rff_core::regression::{
    default_lambda_grid, fit_least_squares_rank_revealing, fit_ols, fit_ridge_dual, fit_ridge_primal,
    kfold_cv_lambda, mse, predict, FitResult, PredictInput, RANK_TOLERANCE,
};
use rff_core::spectral::{
    sample_frequencies_iid, sample_frequencies_leverage, sample_frequencies_orf, sample_frequencies_qmc,
    FrequencyMatrix, Provenance, LEVERAGE_OVERSAMPLE,
};
use rff_core::{seeded_stream, Error, Result};

use crate::config::{Command, RunConfig, SamplerKind};
use crate::model::RffModel;
use crate::report::{Cell, Report};

// Independent generator streams per seed, so that each stage's draws do not
// depend on how many values another stage consumed.
const STREAM_DATA: u64 = 0;
const STREAM_SPLIT: u64 = 1;
const STREAM_FREQUENCIES: u64 = 2;
const STREAM_CV: u64 = 3;
const STREAM_WEIGHTS: u64 = 4;

/// A report plus any extra files the command produces.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub report: Report,
    pub companions: Vec<(PathBuf, String)>,
}

impl From<Report> for RunOutput {
    fn from(report: Report) -> Self {
        RunOutput {
            report,
            companions: Vec::new(),
        }
    }
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    match config.command {
        Command::PsdSample => run_psd_sample(config),
        Command::ApproxError => run_approx_error(config).map(Into::into),
        Command::ToySpatial => run_toy_spatial(config).map(Into::into),
        Command::BiasVariance => run_bias_variance(config).map(Into::into),
        Command::FeatureSweep => run_feature_sweep(config).map(Into::into),
        Command::Fit => run_fit(config),
        Command::Predict => run_predict(config).map(Into::into),
    }
}

/// Sampler errors about unsupported combinations surface as configuration errors.
fn as_config_error(e: Error) -> Error {
    match e {
        Error::UnsupportedFamily(msg) | Error::UnsupportedDimension(msg) => Error::Config(msg),
        other => other,
    }
}

/// Draws `m` frequencies with the chosen scheme; `x` is only used for leverage scoring.
pub fn draw_frequencies(
    config: &RunConfig,
    sampler: SamplerKind,
    m: usize,
    x: &DMatrix<f64>,
    seed: u64,
) -> Result<FrequencyMatrix> {
    let mut rng = seeded_stream(seed, STREAM_FREQUENCIES);
    let d = x.ncols();
    let spec = &config.kernel;
    let omega = match sampler {
        SamplerKind::Iid => sample_frequencies_iid(spec, m, d, &mut rng),
        SamplerKind::Qmc => sample_frequencies_qmc(spec, m, d),
        SamplerKind::Orf => sample_frequencies_orf(spec, m, d, &mut rng),
        SamplerKind::Leverage => {
            sample_frequencies_leverage(spec, x, m, config.leverage_lambda, LEVERAGE_OVERSAMPLE, &mut rng)
        }
    }
    .map_err(as_config_error)?;
    Ok(omega.with_seed(seed))
}

fn scaled_features(config: &RunConfig, x: &DMatrix<f64>, omega: &FrequencyMatrix) -> Result<FeatureMatrix> {
    Ok(feature_map(x, omega)?.scaled(config.kernel.output_scale()))
}

/// Ridge through the smaller of the primal and dual systems.
fn fit_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<FitResult> {
    if x.ncols() <= x.nrows() || lambda == 0.0 {
        fit_ridge_primal(x, y, lambda)
    } else {
        fit_ridge_dual(x, y, lambda)
    }
}

/// The ridge penalty: fixed by the config, or chosen by k-fold CV on the training data.
fn choose_lambda(config: &RunConfig, x: &DMatrix<f64>, y: &DVector<f64>, seed: u64) -> Result<f64> {
    match config.lambda {
        Some(l) => Ok(l),
        None => {
            let mut rng = seeded_stream(seed, STREAM_CV);
            Ok(kfold_cv_lambda(x, y, &default_lambda_grid(), config.cv_folds, &mut rng)?.best_lambda)
        }
    }
}

fn train_test_mse(fit: &FitResult, train: (&DMatrix<f64>, &DVector<f64>), test: (&DMatrix<f64>, &DVector<f64>)) -> Result<(f64, f64)> {
    let tr = mse(train.1, &predict(fit, PredictInput::Design(train.0))?)?;
    let te = mse(test.1, &predict(fit, PredictInput::Design(test.0))?)?;
    Ok((tr, te))
}

fn split_dataset(config: &RunConfig, ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let split = train_test_split(ds.len(), config.train_fraction(), &mut seeded_stream(seed, STREAM_SPLIT))?;
    Ok((ds.subset(&split.train_indices), ds.subset(&split.test_indices)))
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

/// Regular grid `2 pi i / n`, `i = 0..n`, so that integer frequencies fall on DFT bins.
pub fn periodic_grid(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, 1, |i, _| 2.0 * std::f64::consts::PI * i as f64 / n as f64)
}

fn companion_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

pub fn run_psd_sample(config: &RunConfig) -> Result<RunOutput> {
    let grid = periodic_grid(config.grid_points);
    let omega = match &config.point_masses {
        Some(masses) => FrequencyMatrix::new(DMatrix::from_column_slice(masses.len(), 1, masses), Provenance::Iid)?,
        None => draw_frequencies(config, config.sampler, config.m(), &grid, config.seed)?,
    };
    let scale = config.kernel.output_scale();
    let mut report = Report::new(config.echo(), &["x", "sample_id", "f"]);
    let mut rng = seeded_stream(config.seed, STREAM_WEIGHTS);
    for s in 0..config.samples() {
        let f = sample_function(&omega, &grid, &mut rng)? * scale;
        for i in 0..grid.nrows() {
            report.push(vec![grid[(i, 0)].into(), s.into(), f[i].into()]);
        }
    }
    let mut companions = Vec::new();
    if let Some(out) = &config.out {
        let mut freqs = Report::new(config.echo(), &["index", "omega", "weight"]);
        for j in 0..omega.len() {
            let w = omega.column_weights().map_or(1.0, |c| c[j]);
            freqs.push(vec![j.into(), omega.omega()[(j, 0)].into(), w.into()]);
        }
        companions.push((companion_path(out, "freqs"), freqs.render()));
    }
    Ok(RunOutput { report, companions })
}

/// The approximation-error cloud: `n` points uniform on `[-1, 1]^d`.
pub fn approx_cloud(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_stream(seed, STREAM_DATA);
    DMatrix::from_fn(n, d, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0))
}

pub fn run_approx_error(config: &RunConfig) -> Result<Report> {
    if !config.kernel.family.is_shift_invariant() {
        return Err(Error::Config(format!(
            "approx-error needs a shift-invariant kernel, got {}",
            config.kernel.family.name()
        )));
    }
    let x = approx_cloud(config.n_points(), config.dim(), config.seed);
    let exact = gram_matrix(&config.kernel, &x)?.entries;
    let scale = config.kernel.output_scale();
    let mut report = Report::new(
        config.echo(),
        &["m", "sampler", "seed", "max_abs_err", "frobenius_err", "wall_seconds"],
    );
    for &m in &config.m_list() {
        for sampler in config.samplers() {
            for r in 0..config.samples() as u64 {
                let seed = config.seed + r;
                let start = Instant::now();
                let omega = draw_frequencies(config, sampler, m, &x, seed)?;
                let khat = approx_kernel(&feature_map(&x, &omega)?)? * (scale * scale);
                let elapsed = start.elapsed().as_secs_f64();
                let diff = khat - &exact;
                report.push(vec![
                    m.into(),
                    sampler.name().into(),
                    seed.into(),
                    diff.amax().into(),
                    diff.norm().into(),
                    if config.timing { elapsed } else { 0.0 }.into(),
                ]);
            }
        }
    }
    Ok(report)
}

pub fn run_toy_spatial(config: &RunConfig) -> Result<Report> {
    let seed = config.seed;
    let ds = gen_spatial(config.n_points(), &mut seeded_stream(seed, STREAM_DATA))?;
    let (train, test) = split_dataset(config, &ds, seed)?;
    let mut report = Report::new(config.echo(), &["model", "train_mse", "test_mse", "lambda"]);

    let (xl_tr, xl_te) = (with_intercept(&train.x), with_intercept(&test.x));
    let linear = fit_ols(&xl_tr, &train.y)?;
    let (tr, te) = train_test_mse(&linear, (&xl_tr, &train.y), (&xl_te, &test.y))?;
    report.push(vec!["linear".into(), tr.into(), te.into(), 0.0.into()]);

    let omega = draw_frequencies(config, config.sampler, config.m(), &train.x, seed)?;
    let phi_tr = scaled_features(config, &train.x, &omega)?;
    let phi_te = scaled_features(config, &test.x, &omega)?;

    let (i_tr, i_te) = (phi_tr.interleaved(), phi_te.interleaved());
    let kr = fit_least_squares_rank_revealing(&i_tr, &train.y, RANK_TOLERANCE)?;
    let (tr, te) = train_test_mse(&kr, (&i_tr, &train.y), (&i_te, &test.y))?;
    report.push(vec!["kernel_regression".into(), tr.into(), te.into(), 0.0.into()]);

    let lambda = choose_lambda(config, phi_tr.phi(), &train.y, seed)?;
    let krr = fit_ridge(phi_tr.phi(), &train.y, lambda)?;
    let (tr, te) = train_test_mse(&krr, (phi_tr.phi(), &train.y), (phi_te.phi(), &test.y))?;
    report.push(vec!["kernel_ridge".into(), tr.into(), te.into(), lambda.into()]);
    Ok(report)
}

/// Centre and half-width used to map the epidemic covariate onto `[-1, 1]`
/// before building polynomial bases.
fn epidemic_standardize(x: &DMatrix<f64>) -> DVector<f64> {
    let (lo, hi) = data::EPIDEMIC_DOMAIN;
    let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    DVector::from_iterator(x.nrows(), x.column(0).iter().map(|v| (v - c) / h))
}

pub const BIAS_VARIANCE_DEGREES: [usize; 3] = [1, 2, 5];

pub fn run_bias_variance(config: &RunConfig) -> Result<Report> {
    let seed = config.seed;
    let ds = gen_epidemic(config.n_points(), &mut seeded_stream(seed, STREAM_DATA))?;
    let (train, test) = split_dataset(config, &ds, seed)?;
    let (u_tr, u_te) = (epidemic_standardize(&train.x), epidemic_standardize(&test.x));
    let mut report = Report::new(config.echo(), &["degree", "train_mse", "test_mse"]);
    for degree in BIAS_VARIANCE_DEGREES {
        let (b_tr, b_te) = (polynomial_basis(&u_tr, degree), polynomial_basis(&u_te, degree));
        let fit = fit_ols(&b_tr, &train.y)?;
        let (tr, te) = train_test_mse(&fit, (&b_tr, &train.y), (&b_te, &test.y))?;
        report.push(vec![degree.into(), tr.into(), te.into()]);
    }
    Ok(report)
}

pub fn run_feature_sweep(config: &RunConfig) -> Result<Report> {
    let seed = config.seed;
    let ds = gen_spatial(config.n_points(), &mut seeded_stream(seed, STREAM_DATA))?;
    let (train, test) = split_dataset(config, &ds, seed)?;
    let m_list = config.m_list();
    let m_max = *m_list.iter().max().expect("validated non-empty");
    // One draw at the largest m; smaller sweeps use its leading rows so the
    // feature sets are nested.
    let full = draw_frequencies(config, config.sampler, m_max, &train.x, seed)?;
    let mut report = Report::new(
        config.echo(),
        &["m", "model", "train_mse", "test_mse", "lambda", "status"],
    );
    for &m in &m_list {
        let omega = full.truncated(m)?;
        let phi_tr = scaled_features(config, &train.x, &omega)?;
        let phi_te = scaled_features(config, &test.x, &omega)?;

        let (i_tr, i_te) = (phi_tr.interleaved(), phi_te.interleaved());
        let row = fit_least_squares_rank_revealing(&i_tr, &train.y, RANK_TOLERANCE)
            .and_then(|fit| train_test_mse(&fit, (&i_tr, &train.y), (&i_te, &test.y)));
        report.push(sweep_row(m, "kernel_regression", row.map(|(a, b)| (a, b, 0.0)))?);

        let row = choose_lambda(config, phi_tr.phi(), &train.y, seed).and_then(|lambda| {
            let fit = fit_ridge(phi_tr.phi(), &train.y, lambda)?;
            let (a, b) = train_test_mse(&fit, (phi_tr.phi(), &train.y), (phi_te.phi(), &test.y))?;
            Ok((a, b, lambda))
        });
        report.push(sweep_row(m, "kernel_ridge", row)?);
    }
    Ok(report)
}

/// A singular system is recorded in the row and the sweep continues; any
/// other error aborts the run.
fn sweep_row(m: usize, model: &str, result: Result<(f64, f64, f64)>) -> Result<Vec<Cell>> {
    match result {
        Ok((tr, te, lambda)) => Ok(vec![m.into(), model.into(), tr.into(), te.into(), lambda.into(), "ok".into()]),
        Err(Error::Singular(_)) => Ok(vec![m.into(), model.into(), Cell::Empty, Cell::Empty, Cell::Empty, "singular".into()]),
        Err(e) => Err(e),
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a PathBuf> {
    path.as_ref()
        .ok_or_else(|| Error::Config(format!("{command} requires {flag}")))
}

/// Trains a random-feature ridge model on a dataset.
pub fn fit_model(config: &RunConfig, ds: &Dataset) -> Result<(RffModel, FitResult, FeatureMatrix)> {
    let omega = draw_frequencies(config, config.sampler, config.m(), &ds.x, config.seed)?;
    let phi = scaled_features(config, &ds.x, &omega)?;
    let lambda = choose_lambda(config, phi.phi(), &ds.y, config.seed)?;
    let fit = fit_ridge(phi.phi(), &ds.y, lambda)?;
    let beta = match (&fit.weights, &fit.dual_coefficients) {
        (Some(w), _) => w.clone(),
        (None, Some(alpha)) => phi.phi().transpose() * alpha,
        (None, None) => unreachable!("ridge fits carry weights or dual coefficients"),
    };
    let model = RffModel {
        kernel: config.kernel,
        lambda,
        omega,
        beta,
    };
    Ok((model, fit, phi))
}

pub fn run_fit(config: &RunConfig) -> Result<RunOutput> {
    let data_path = required(&config.data, "--data", "fit")?;
    let model_path = required(&config.model, "--model", "fit")?;
    let ds = data::load_csv(data_path)?;
    let (model, fit, phi) = fit_model(config, &ds)?;
    let train_mse = mse(&ds.y, &predict(&fit, PredictInput::Design(phi.phi()))?)?;
    let mut report = Report::new(config.echo(), &["n", "d", "m", "lambda", "train_mse"]);
    report.push(vec![
        ds.len().into(),
        ds.dim().into(),
        model.omega.len().into(),
        model.lambda.into(),
        train_mse.into(),
    ]);
    Ok(RunOutput {
        report,
        companions: vec![(model_path.clone(), model.to_text())],
    })
}

pub fn load_model(path: &Path) -> Result<RffModel> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RffModel::from_text(&text)
}

/// Covariates for prediction: a covariate-only CSV, or a training-style CSV
/// whose extra last column (the response) is ignored.
fn prediction_inputs(model: &RffModel, x: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = model.dim();
    if x.ncols() == d + 1 {
        Ok(x.columns(0, d).into_owned())
    } else if x.ncols() == d {
        Ok(x)
    } else {
        Err(Error::UnsupportedDimension(format!(
            "model expects d = {d} covariate columns (or {} with a response), input has {}",
            d + 1,
            x.ncols()
        )))
    }
}

pub fn run_predict(config: &RunConfig) -> Result<Report> {
    let model_path = required(&config.model, "--model", "predict")?;
    let data_path = required(&config.data, "--data", "predict")?;
    let model = load_model(model_path)?;
    let x = prediction_inputs(&model, data::load_covariates_csv(data_path)?)?;
    let y = model.predict(&x)?;
    let mut report = Report::new(config.echo(), &["row_index", "prediction"]);
    for (i, v) in y.iter().enumerate() {
        report.push(vec![i.into(), (*v).into()]);
    }
    Ok(report)
}

/// Writes the report (to `--out` or stdout) and any companion files.
///
/// Everything is rendered before the first write, so a failing run leaves
/// no partial output.
pub fn write_outputs(config: &RunConfig, output: &RunOutput) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    let rendered = output.report.render();
    for (path, text) in &output.companions {
        std::fs::write(path, text).map_err(io(path))?;
    }
    match &config.out {
        Some(out) => std::fs::write(out, rendered).map_err(io(out))?,
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(rendered.as_bytes())
                .map_err(io(Path::new("<stdout>")))?;
        }
    }
    Ok(())
}
