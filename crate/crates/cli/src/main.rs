use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rff_cli::config::{kernel_from_options, parse_list, Command, RunConfig, SamplerKind};
use rff_cli::{run, write_outputs};
use rff_core::Error;

#[derive(Parser)]
#[command(name = "rff", version, about = "Seeded random Fourier feature experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Random functions drawn from a kernel's spectral density on a 1-d grid.
    PsdSample(Opts),
    /// Error of the random-feature Gram matrix against the exact one.
    ApproxError(Opts),
    /// Linear, unregularized random-feature and kernel ridge models on spatial data.
    ToySpatial(Opts),
    /// Polynomial fits of degree 1, 2 and 5 on epidemic-style data.
    BiasVariance(Opts),
    /// Training and test error as the number of features grows.
    FeatureSweep(Opts),
    /// Train a random-feature ridge model on a CSV dataset.
    Fit(Opts),
    /// Predict with a saved model.
    Predict(Opts),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct Opts {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// se, matern, cauchy or laplacian.
    #[arg(long, default_value = "se")]
    kernel: String,
    /// Output scale (decay rate for the Laplacian kernel).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lengthscale: Option<f64>,
    /// Matérn smoothness nu.
    #[arg(long)]
    smoothness: Option<f64>,
    /// Number of frequencies.
    #[arg(long)]
    m: Option<usize>,
    /// Comma-separated feature counts.
    #[arg(long)]
    m_list: Option<String>,
    /// iid, qmc, orf or leverage.
    #[arg(long, default_value = "iid")]
    sampler: String,
    /// Comma-separated samplers (approx-error).
    #[arg(long)]
    samplers: Option<String>,
    /// Ridge penalty; chosen by cross-validation when omitted.
    #[arg(long)]
    lambda: Option<f64>,
    /// Penalty for scoring leverage candidates.
    #[arg(long, default_value_t = rff_cli::config::DEFAULT_LEVERAGE_LAMBDA)]
    leverage_lambda: f64,
    #[arg(long, default_value_t = rff_cli::config::DEFAULT_CV_FOLDS)]
    cv_folds: usize,
    /// Number of generated points.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    train_frac: Option<f64>,
    /// Covariate dimension of the approx-error cloud.
    #[arg(long)]
    dim: Option<usize>,
    /// Random functions (psd-sample) or replicate seeds (approx-error).
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated point-mass frequencies replacing the sampled spectrum.
    #[arg(long)]
    point_masses: Option<String>,
    #[arg(long, default_value_t = rff_cli::config::DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Input CSV (fit, predict).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file written by fit and read by predict.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock times (makes approx-error output nondeterministic).
    #[arg(long)]
    timing: bool,
}

fn build_config(command: Command, o: Opts) -> Result<RunConfig, Error> {
    let mut c = RunConfig::new(command);
    c.seed = o.seed;
    c.kernel = kernel_from_options(&o.kernel, o.sigma, o.lengthscale, o.smoothness)?;
    c.sampler = o.sampler.parse::<SamplerKind>()?;
    c.samplers = o.samplers.as_deref().map(|s| parse_list(s, "sampler")).transpose()?;
    c.m = o.m;
    c.m_list = o.m_list.as_deref().map(|s| parse_list(s, "m")).transpose()?;
    c.lambda = o.lambda;
    c.leverage_lambda = o.leverage_lambda;
    c.cv_folds = o.cv_folds;
    c.n_points = o.n;
    c.train_fraction = o.train_frac;
    c.dim = o.dim;
    c.samples = o.samples;
    c.point_masses = o
        .point_masses
        .as_deref()
        .map(|s| parse_list(s, "point-mass"))
        .transpose()?;
    c.grid_points = o.grid_points;
    c.data = o.data;
    c.model = o.model;
    c.out = o.out;
    c.timing = o.timing;
    Ok(c)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Cmd::PsdSample(o) => (Command::PsdSample, o),
        Cmd::ApproxError(o) => (Command::ApproxError, o),
        Cmd::ToySpatial(o) => (Command::ToySpatial, o),
        Cmd::BiasVariance(o) => (Command::BiasVariance, o),
        Cmd::FeatureSweep(o) => (Command::FeatureSweep, o),
        Cmd::Fit(o) => (Command::Fit, o),
        Cmd::Predict(o) => (Command::Predict, o),
    };
    let result = build_config(command, opts).and_then(|config| {
        let output = run(&config)?;
        write_outputs(&config, &output)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
