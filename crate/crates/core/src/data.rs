//! Synthetic generators, train/test splitting, polynomial bases and CSV I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Domain of the epidemic covariate.
pub const EPIDEMIC_DOMAIN: (f64, f64) = (0.0, 50.0);
pub const EPIDEMIC_NOISE_VARIANCE: f64 = 150.0;

/// Per-coordinate domain of the spatial generator.
pub const SPATIAL_DOMAIN: (f64, f64) = (-2.0, 2.0);
pub const SPATIAL_NOISE_VARIANCE: f64 = 1.0;
pub const SPATIAL_DEFAULT_N: usize = 500;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: Option<u64>,
    pub noise_variance: Option<f64>,
    /// Per-coordinate `(low, high)` bounds of the covariates, if known.
    pub domain: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, meta: DatasetMeta) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::input("dataset has no rows"));
        }
        if x.nrows() != y.len() {
            return Err(Error::input(format!(
                "{} covariate rows but {} responses",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("dataset contains non-finite values"));
        }
        Ok(Dataset { x, y, meta })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.meta.seed = Some(seed);
        self
    }

    /// Rows `idx` of the dataset, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i])),
            meta: self.meta.clone(),
        }
    }
}

/// Epidemic-style data: `y = max(0, 1 + x + 0.2 x^2 + eps)` with `x ~ U[0, 50]`
/// and `eps ~ N(0, 150)`.
pub fn gen_epidemic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Dataset> {
    gen_epidemic_with(n, EPIDEMIC_NOISE_VARIANCE, rng)
}

/// [`gen_epidemic`] with a configurable noise variance (zero gives the latent curve).
pub fn gen_epidemic_with<R: Rng + ?Sized>(n: usize, noise_variance: f64, rng: &mut R) -> Result<Dataset> {
    check_generator(n, noise_variance)?;
    let sd = noise_variance.sqrt();
    let (lo, hi) = EPIDEMIC_DOMAIN;
    let mut x = DMatrix::zeros(n, 1);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let xi = rng.random_range(lo..hi);
        let eps: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = xi;
        y[i] = (epidemic_latent(xi) + sd * eps).max(0.0);
    }
    Dataset::new(
        x,
        y,
        DatasetMeta {
            generator: "epidemic".into(),
            seed: None,
            noise_variance: Some(noise_variance),
            domain: Some(EPIDEMIC_DOMAIN),
        },
    )
}

pub fn epidemic_latent(x: f64) -> f64 {
    1.0 + x + 0.2 * x * x
}

/// Spatial data: `y = x1^2 + x2^2 + eps` on `[-2, 2]^2` with `eps ~ N(0, 1)`.
pub fn gen_spatial<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Dataset> {
    gen_spatial_with(n, SPATIAL_NOISE_VARIANCE, rng)
}

pub fn gen_spatial_with<R: Rng + ?Sized>(n: usize, noise_variance: f64, rng: &mut R) -> Result<Dataset> {
    check_generator(n, noise_variance)?;
    let sd = noise_variance.sqrt();
    let (lo, hi) = SPATIAL_DOMAIN;
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let a = rng.random_range(lo..hi);
        let b = rng.random_range(lo..hi);
        let eps: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = a;
        x[(i, 1)] = b;
        y[i] = spatial_latent(a, b) + sd * eps;
    }
    Dataset::new(
        x,
        y,
        DatasetMeta {
            generator: "spatial".into(),
            seed: None,
            noise_variance: Some(noise_variance),
            domain: Some(SPATIAL_DOMAIN),
        },
    )
}

pub fn spatial_latent(x1: f64, x2: f64) -> f64 {
    x1 * x1 + x2 * x2
}

fn check_generator(n: usize, noise_variance: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::input("generator needs n >= 1"));
    }
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(Error::config(format!(
            "noise variance must be finite and nonnegative, got {noise_variance}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub train_fraction: f64,
}

/// Random partition of `0..n` with `round(fraction * n)` training indices.
///
/// Both index lists come back sorted so that subsets keep the original row order.
pub fn train_test_split<R: Rng + ?Sized>(n: usize, fraction: f64, rng: &mut R) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::input(format!("train fraction must lie in (0, 1), got {fraction}")));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::input(format!(
            "fraction {fraction} of {n} points leaves {n_train} training and {} test points",
            n.saturating_sub(n_train)
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train_indices: train,
        test_indices: test,
        train_fraction: fraction,
    })
}

/// Columns `x^0, x^1, ..., x^degree`.
pub fn polynomial_basis(x: &DVector<f64>, degree: usize) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::Format(format!("{}: malformed csv: {other:?}", path.display())),
    }
}

/// Reads a headered numeric CSV into a matrix. Lines starting with `#` are
/// skipped. Reported rows are 1-based data rows (the header is not counted);
/// columns are 1-based.
fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .comment(Some(b'#'))
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let ncols = header.len();
    let mut values = Vec::new();
    let mut nrows = 0;
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => Error::Parse {
                row,
                column: (*len as usize).min(ncols) + 1,
                message: format!("expected {ncols} fields, found {len}"),
            },
            _ => csv_err(path, e),
        })?;
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: c + 1,
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        nrows += 1;
    }
    if nrows == 0 {
        return Err(Error::input(format!("{} has no data rows", path.display())));
    }
    Ok((header, DMatrix::from_row_slice(nrows, ncols, &values)))
}

/// Loads a dataset whose last column is the response.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let (header, m) = read_numeric_csv(path)?;
    if header.len() < 2 {
        return Err(Error::input(format!(
            "{} has {} column(s); need at least one covariate and a response",
            path.display(),
            header.len()
        )));
    }
    let d = m.ncols() - 1;
    Dataset::new(
        m.columns(0, d).into_owned(),
        m.column(d).into_owned(),
        DatasetMeta {
            generator: format!("csv:{}", path.display()),
            ..DatasetMeta::default()
        },
    )
}

/// Loads a covariate-only CSV (every column is a covariate).
pub fn load_covariates_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    Ok(read_numeric_csv(path.as_ref())?.1)
}

/// Writes `x1, ..., xd, y` with shortest round-trip number formatting.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(&mut w, data).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_dataset<W: Write>(w: &mut W, data: &Dataset) -> std::io::Result<()> {
    let d = data.dim();
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    writeln!(w, "{}", header.join(","))?;
    for i in 0..data.len() {
        for j in 0..d {
            write!(w, "{:?},", data.x[(i, j)])?;
        }
        writeln!(w, "{:?}", data.y[i])?;
    }
    Ok(())
}
