//! Plain-text model files.
//!
//! ```text
//! rffmodel v1
//! <family> <sigma> <lengthscale> <smoothness>
//! <lambda> <m> <d>
//! <m frequency rows, d values each>
//! <m weight rows: column_weight beta_cos beta_sin>
//! end
//! ```
//!
//! Reals are written with 17 significant digits, which round-trips every
//! `f64` exactly. The closing `end` line makes a file cut short anywhere,
//! even inside a number, fail to load.

use nalgebra::{DMatrix, DVector};
use rff_core::features::feature_map;
use rff_core::kernels::{KernelFamily, KernelSpec};
use rff_core::spectral::{FrequencyMatrix, Provenance};
use rff_core::{Error, Result};

pub const MAGIC: &str = "rffmodel";
pub const VERSION: &str = "v1";
const END: &str = "end";

/// A fitted random-feature ridge model.
#[derive(Clone, Debug, PartialEq)]
pub struct RffModel {
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub omega: FrequencyMatrix,
    /// Coefficients on the `[cos | sin]` feature columns, length `2m`.
    pub beta: DVector<f64>,
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

impl RffModel {
    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::UnsupportedDimension(format!(
                "model expects d = {} covariate columns, input has {}",
                self.dim(),
                x.ncols()
            )));
        }
        let phi = feature_map(x, &self.omega)?.scaled(self.kernel.output_scale());
        Ok(phi.phi() * &self.beta)
    }

    pub fn to_text(&self) -> String {
        let (m, d) = (self.omega.len(), self.dim());
        let k = &self.kernel;
        let mut lines = vec![
            format!("{MAGIC} {VERSION}"),
            format!(
                "{} {} {} {}",
                k.family.name(),
                real(k.sigma),
                real(k.lengthscale),
                real(k.smoothness)
            ),
            format!("{} {m} {d}", real(self.lambda)),
        ];
        for row in self.omega.omega().row_iter() {
            lines.push(row.iter().map(|v| real(*v)).collect::<Vec<_>>().join(" "));
        }
        for j in 0..m {
            let c = self.omega.column_weights().map_or(1.0, |w| w[j]);
            lines.push(format!("{} {} {}", real(c), real(self.beta[j]), real(self.beta[m + j])));
        }
        lines.push(END.to_string());
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Format(format!("truncated model file: missing {what}")))
        };

        let (_, header) = next("header line")?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(Error::Format(format!("not a model file (expected '{MAGIC} {VERSION}')")));
        }
        match parts.next() {
            Some(VERSION) => {}
            Some(other) => {
                return Err(Error::Format(format!(
                    "unsupported model version '{other}' (this build reads {VERSION})"
                )))
            }
            None => return Err(Error::Format("model header lacks a version".into())),
        }

        let (ln, kline) = next("kernel line")?;
        let fields: Vec<&str> = kline.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!("line {ln}: expected 4 kernel fields, found {}", fields.len())));
        }
        let family: KernelFamily = fields[0]
            .parse()
            .map_err(|_| Error::Format(format!("line {ln}: unknown kernel family '{}'", fields[0])))?;
        let nums = parse_reals(ln, &fields[1..], 3)?;
        let kernel = KernelSpec {
            family,
            sigma: nums[0],
            lengthscale: nums[1],
            smoothness: nums[2],
            ..KernelSpec::default()
        };
        kernel
            .validate()
            .map_err(|e| Error::Format(format!("line {ln}: invalid kernel: {e}")))?;

        let (ln, sline) = next("size line")?;
        let fields: Vec<&str> = sline.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!("line {ln}: expected 'lambda m d'")));
        }
        let lambda = parse_reals(ln, &fields[..1], 1)?[0];
        let count = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Format(format!("line {ln}: '{s}' is not a positive integer")))
        };
        let (m, d) = (count(fields[1])?, count(fields[2])?);

        let mut omega = Vec::with_capacity(m * d);
        for j in 0..m {
            let (ln, row) = next(&format!("frequency row {} of {m}", j + 1))?;
            let fields: Vec<&str> = row.split_whitespace().collect();
            omega.extend(parse_reals(ln, &fields, d)?);
        }
        let mut weights = Vec::with_capacity(m);
        let mut beta = DVector::zeros(2 * m);
        for j in 0..m {
            let (ln, row) = next(&format!("weight row {} of {m}", j + 1))?;
            let fields: Vec<&str> = row.split_whitespace().collect();
            let v = parse_reals(ln, &fields, 3)?;
            weights.push(v[0]);
            beta[j] = v[1];
            beta[m + j] = v[2];
        }
        let (ln, end) = next("end marker")?;
        if end != END {
            return Err(Error::Format(format!("line {ln}: expected '{END}', found '{end}'")));
        }
        if let Some((ln, extra)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(Error::Format(format!("line {ln}: unexpected trailing content '{extra}'")));
        }

        let omega = DMatrix::from_row_slice(m, d, &omega);
        let omega = if weights.iter().all(|&c| c == 1.0) {
            FrequencyMatrix::new(omega, Provenance::Iid)?
        } else {
            FrequencyMatrix::with_column_weights(omega, DVector::from_vec(weights))
                .map_err(|e| Error::Format(format!("invalid column weights: {e}")))?
        };
        Ok(RffModel {
            kernel,
            lambda,
            omega,
            beta,
        })
    }
}

fn parse_reals(line: usize, fields: &[&str], expected: usize) -> Result<Vec<f64>> {
    if fields.len() != expected {
        return Err(Error::Format(format!(
            "line {line}: expected {expected} values, found {}",
            fields.len()
        )));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Format(format!("line {line}: '{f}' is not a finite number")))
        })
        .collect()
}
