//! Candidate covariates and the design matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dataset::{MonthlyRecord, TimeSeriesDataset};
use super::ProbitError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSpec {
    pub main_effects: Vec<String>,
    /// Main effects that also enter lagged by one month.
    pub ar_terms: Vec<String>,
    /// Pairwise products of standardized main effects.
    pub interactions: Vec<[String; 2]>,
}

impl Default for CovariateSpec {
    fn default() -> Self {
        let s = |v: &str| v.to_string();
        let mains: Vec<String> = ["min_temp", "max_temp", "solar", "clear_sky", "rainfall"]
            .map(s)
            .to_vec();
        let pairs = [
            ("min_temp", "max_temp"),
            ("min_temp", "solar"),
            ("min_temp", "rainfall"),
            ("max_temp", "solar"),
            ("max_temp", "clear_sky"),
            ("solar", "clear_sky"),
            ("solar", "rainfall"),
        ];
        CovariateSpec {
            ar_terms: mains.clone(),
            main_effects: mains,
            interactions: pairs.iter().map(|(a, b)| [s(a), s(b)]).collect(),
        }
    }
}

impl CovariateSpec {
    pub fn candidate_count(&self) -> usize {
        self.main_effects.len() + self.ar_terms.len() + self.interactions.len()
    }

    pub fn candidate_names(&self) -> Vec<String> {
        let mut out: Vec<String> = self.main_effects.clone();
        out.extend(self.ar_terms.iter().map(|c| format!("{c}_lag1")));
        out.extend(self.interactions.iter().map(|[a, b]| format!("{a}:{b}")));
        out
    }

    fn main_index(&self, name: &str) -> Result<usize, ProbitError> {
        self.main_effects
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| ProbitError::UnknownColumn(name.to_string()))
    }
}

/// Mean and population sd of one raw column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

impl Standardization {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }
}

/// Candidate columns (no intercept) and binary response.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<bool>,
    /// Per main effect; empty for designs built with [`Design::from_rows`].
    pub transforms: Vec<Standardization>,
    pub spec: Option<CovariateSpec>,
}

impl Design {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn candidates(&self) -> usize {
        self.x.ncols()
    }

    /// Design from ready-made rows, used as-is.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>], y: Vec<bool>) -> Result<Design, ProbitError> {
        let k = names.len();
        if rows.len() != y.len() {
            return Err(ProbitError::DimensionMismatch {
                expected: y.len(),
                found: rows.len(),
            });
        }
        if rows.is_empty() {
            return Err(ProbitError::InsufficientRows(0));
        }
        for r in rows {
            if r.len() != k {
                return Err(ProbitError::DimensionMismatch {
                    expected: k,
                    found: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(ProbitError::NumericalFailure("non-finite design entry".into()));
            }
        }
        Ok(Design {
            names,
            x: DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]),
            y,
            transforms: Vec::new(),
            spec: None,
        })
    }

    /// Standardized candidate row for month `current` given the month
    /// before it, using the training transforms.
    pub fn transform_row(&self, current: &MonthlyRecord, previous: &MonthlyRecord) -> Result<Vec<f64>, ProbitError> {
        let spec = self.spec.as_ref().ok_or(ProbitError::DimensionMismatch {
            expected: self.candidates(),
            found: 0,
        })?;
        let z = |rec: &MonthlyRecord, name: &str| -> Result<f64, ProbitError> {
            let i = spec.main_index(name)?;
            let v = rec
                .value(name)
                .ok_or_else(|| ProbitError::UnknownColumn(name.to_string()))?;
            Ok(self.transforms[i].apply(v))
        };
        let mut out = Vec::with_capacity(spec.candidate_count());
        for m in &spec.main_effects {
            out.push(z(current, m)?);
        }
        for m in &spec.ar_terms {
            out.push(z(previous, m)?);
        }
        for [a, b] in &spec.interactions {
            out.push(z(current, a)? * z(current, b)?);
        }
        Ok(out)
    }
}

/// Standardizes each main-effect series over all rows (population sd),
/// then drops the first row so lag-1 terms align. Returns n-1 rows.
pub fn build_design(data: &TimeSeriesDataset, spec: &CovariateSpec) -> Result<Design, ProbitError> {
    let n = data.len();
    if n < 2 {
        return Err(ProbitError::InsufficientRows(n));
    }
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(spec.main_effects.len());
    let mut transforms = Vec::with_capacity(spec.main_effects.len());
    for name in &spec.main_effects {
        let col = data.column(name)?;
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(ProbitError::ZeroVarianceColumn(name.clone()));
        }
        let t = Standardization { mean, sd };
        z.push(col.iter().map(|&v| t.apply(v)).collect());
        transforms.push(t);
    }
    let ar: Vec<usize> = spec
        .ar_terms
        .iter()
        .map(|a| spec.main_index(a))
        .collect::<Result<_, _>>()?;
    let inter: Vec<(usize, usize)> = spec
        .interactions
        .iter()
        .map(|[a, b]| Ok((spec.main_index(a)?, spec.main_index(b)?)))
        .collect::<Result<_, ProbitError>>()?;
    let m = spec.main_effects.len();
    let k = spec.candidate_count();
    let x = DMatrix::from_fn(n - 1, k, |i, j| {
        let t = i + 1;
        if j < m {
            z[j][t]
        } else if j < m + ar.len() {
            z[ar[j - m]][t - 1]
        } else {
            let (a, b) = inter[j - m - ar.len()];
            z[a][t] * z[b][t]
        }
    });
    let y = data.response()[1..].to_vec();
    Ok(Design {
        names: spec.candidate_names(),
        x,
        y,
        transforms,
        spec: Some(spec.clone()),
    })
}
