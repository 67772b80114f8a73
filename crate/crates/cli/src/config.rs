use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rff_core::kernels::{KernelFamily, KernelSpec};
use rff_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    PsdSample,
    ApproxError,
    ToySpatial,
    BiasVariance,
    FeatureSweep,
    Fit,
    Predict,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PsdSample => "psd-sample",
            Command::ApproxError => "approx-error",
            Command::ToySpatial => "toy-spatial",
            Command::BiasVariance => "bias-variance",
            Command::FeatureSweep => "feature-sweep",
            Command::Fit => "fit",
            Command::Predict => "predict",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Iid,
    Qmc,
    Orf,
    Leverage,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Iid => "iid",
            SamplerKind::Qmc => "qmc",
            SamplerKind::Orf => "orf",
            SamplerKind::Leverage => "leverage",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iid" => Ok(SamplerKind::Iid),
            "qmc" => Ok(SamplerKind::Qmc),
            "orf" => Ok(SamplerKind::Orf),
            "leverage" => Ok(SamplerKind::Leverage),
            other => Err(Error::Config(format!(
                "unknown sampler '{other}' (expected iid, qmc, orf or leverage)"
            ))),
        }
    }
}

/// Parses a comma-separated list such as `16,64,256`.
pub fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config(format!("{what} list is empty")));
    }
    items
        .into_iter()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Config(format!("cannot parse '{t}' in {what} list")))
        })
        .collect()
}

/// Everything a run depends on. Unset options fall back to per-command
/// defaults through the accessor methods.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub kernel: KernelSpec,
    pub sampler: SamplerKind,
    pub samplers: Option<Vec<SamplerKind>>,
    pub m: Option<usize>,
    pub m_list: Option<Vec<usize>>,
    /// Ridge penalty; `None` selects it by cross-validation.
    pub lambda: Option<f64>,
    /// Penalty used when scoring candidate frequencies for leverage sampling.
    pub leverage_lambda: f64,
    pub cv_folds: usize,
    pub n_points: Option<usize>,
    pub train_fraction: Option<f64>,
    pub dim: Option<usize>,
    pub samples: Option<usize>,
    pub point_masses: Option<Vec<f64>>,
    pub grid_points: usize,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Destination of the report; stdout when unset. Not part of the echo.
    pub out: Option<PathBuf>,
    pub timing: bool,
}

pub const DEFAULT_LEVERAGE_LAMBDA: f64 = 1.0;
pub const DEFAULT_CV_FOLDS: usize = 5;
pub const DEFAULT_GRID_POINTS: usize = 256;
/// Training points in the bias-variance experiment.
pub const BIAS_VARIANCE_TRAIN: usize = 20;

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            seed: 0,
            kernel: KernelSpec::squared_exponential(1.0, 1.0),
            sampler: SamplerKind::Iid,
            samplers: None,
            m: None,
            m_list: None,
            lambda: None,
            leverage_lambda: DEFAULT_LEVERAGE_LAMBDA,
            cv_folds: DEFAULT_CV_FOLDS,
            n_points: None,
            train_fraction: None,
            dim: None,
            samples: None,
            point_masses: None,
            grid_points: DEFAULT_GRID_POINTS,
            data: None,
            model: None,
            out: None,
            timing: false,
        }
    }

    pub fn m(&self) -> usize {
        self.m.unwrap_or(100)
    }

    pub fn m_list(&self) -> Vec<usize> {
        match (&self.m_list, self.command) {
            (Some(l), _) => l.clone(),
            (None, Command::FeatureSweep) => vec![16, 32, 64, 128, 256, 512],
            (None, _) => vec![16, 64, 256, 1024, 4096],
        }
    }

    pub fn samplers(&self) -> Vec<SamplerKind> {
        self.samplers.clone().unwrap_or_else(|| vec![self.sampler])
    }

    pub fn n_points(&self) -> usize {
        self.n_points.unwrap_or(match self.command {
            Command::ApproxError => 200,
            _ => 500,
        })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction.unwrap_or(match self.command {
            Command::BiasVariance => BIAS_VARIANCE_TRAIN as f64 / self.n_points() as f64,
            _ => 0.2,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim.unwrap_or(match self.command {
            Command::PsdSample => 1,
            _ => 2,
        })
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(match self.command {
            Command::ApproxError => 10,
            _ => 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be at least 1")))
            } else {
                Ok(())
            }
        };
        positive("--m", self.m())?;
        positive("--n", self.n_points())?;
        positive("--dim", self.dim())?;
        positive("--samples", self.samples())?;
        for &m in &self.m_list() {
            positive("every --m-list entry", m)?;
        }
        if self.cv_folds < 2 {
            return Err(Error::Config(format!("--cv-folds must be at least 2, got {}", self.cv_folds)));
        }
        if self.grid_points < 2 {
            return Err(Error::Config("--grid-points must be at least 2".into()));
        }
        let f = self.train_fraction();
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("--train-frac must lie in (0, 1), got {f}")));
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!("--lambda must be nonnegative, got {l}")));
            }
        }
        if !(self.leverage_lambda.is_finite() && self.leverage_lambda > 0.0) {
            return Err(Error::Config("--leverage-lambda must be positive".into()));
        }
        if let Some(p) = &self.point_masses {
            if p.is_empty() || p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("--point-masses must be finite numbers".into()));
            }
        }
        Ok(())
    }

    /// `key=value` lines describing the fully resolved configuration.
    pub fn echo(&self) -> Vec<String> {
        let k = &self.kernel;
        let mut lines = vec![
            format!("command={}", self.command.name()),
            format!("seed={}", self.seed),
            format!(
                "kernel={} sigma={} lengthscale={} smoothness={}",
                k.family.name(),
                k.sigma,
                k.lengthscale,
                k.smoothness
            ),
        ];
        let join = |v: &[String]| v.join(",");
        match self.command {
            Command::PsdSample => {
                lines.push(format!("sampler={}", self.sampler));
                match &self.point_masses {
                    Some(p) => lines.push(format!(
                        "point_masses={}",
                        join(&p.iter().map(f64::to_string).collect::<Vec<_>>())
                    )),
                    None => lines.push(format!("m={}", self.m())),
                }
                lines.push(format!("samples={}", self.samples()));
                lines.push(format!("grid_points={}", self.grid_points));
            }
            Command::ApproxError => {
                lines.push(format!(
                    "samplers={}",
                    join(&self.samplers().iter().map(ToString::to_string).collect::<Vec<_>>())
                ));
                lines.push(format!(
                    "m_list={}",
                    join(&self.m_list().iter().map(ToString::to_string).collect::<Vec<_>>())
                ));
                lines.push(format!("n={} dim={} samples={}", self.n_points(), self.dim(), self.samples()));
                lines.push(format!("timing={}", self.timing));
            }
            Command::ToySpatial | Command::FeatureSweep | Command::BiasVariance => {
                if self.command != Command::BiasVariance {
                    lines.push(format!("sampler={}", self.sampler));
                    if self.command == Command::FeatureSweep {
                        lines.push(format!(
                            "m_list={}",
                            join(&self.m_list().iter().map(ToString::to_string).collect::<Vec<_>>())
                        ));
                    } else {
                        lines.push(format!("m={}", self.m()));
                    }
                    lines.push(format!("cv_folds={}", self.cv_folds));
                }
                lines.push(format!("n={} train_frac={}", self.n_points(), self.train_fraction()));
            }
            Command::Fit => {
                lines.push(format!("sampler={} m={} cv_folds={}", self.sampler, self.m(), self.cv_folds));
            }
            Command::Predict => {}
        }
        if matches!(self.command, Command::ToySpatial | Command::FeatureSweep | Command::Fit) {
            lines.push(match self.lambda {
                Some(l) => format!("lambda={l}"),
                None => "lambda=cv".into(),
            });
        }
        if self.samplers().contains(&SamplerKind::Leverage) || self.sampler == SamplerKind::Leverage {
            lines.push(format!("leverage_lambda={}", self.leverage_lambda));
        }
        if let Some(d) = &self.data {
            lines.push(format!("data={}", d.display()));
        }
        if let Some(m) = &self.model {
            lines.push(format!("model={}", m.display()));
        }
        lines
    }
}

/// Builds a kernel spec from command-line style options.
pub fn kernel_from_options(
    family: &str,
    sigma: Option<f64>,
    lengthscale: Option<f64>,
    smoothness: Option<f64>,
) -> Result<KernelSpec> {
    let family: KernelFamily = family.parse()?;
    let mut spec = match family {
        KernelFamily::SquaredExponential => KernelSpec::squared_exponential(1.0, 1.0),
        KernelFamily::Matern => KernelSpec::matern(1.0, 1.0, 1.5),
        KernelFamily::Cauchy => KernelSpec::cauchy(1.0),
        KernelFamily::Laplacian => KernelSpec::laplacian(1.0),
        KernelFamily::Polynomial => KernelSpec::polynomial(1.0, 2),
    };
    if let Some(s) = sigma {
        spec.sigma = s;
    }
    if let Some(l) = lengthscale {
        spec.lengthscale = l;
    }
    if let Some(nu) = smoothness {
        spec.smoothness = nu;
    }
    spec.validate()?;
    Ok(spec)
}
