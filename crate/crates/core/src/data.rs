//! Case-control dataset and prevalence specification.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unvalidated input arrays, e.g. as parsed from a file.
///
/// The phenotype is real-valued here so that illegal codes (such as `2`)
/// can be detected during validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub d: Vec<f64>,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

/// A validated case-control sample.
///
/// Rows are kept in their original order; cases and controls may be
/// interleaved. The per-subject genotype sum `yᵀ1` and squared norm `yᵀy`
/// are cached because every score and variance estimator uses them.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseControlDataset {
    d: Vec<u8>,
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    n0: usize,
    n1: usize,
    y_sum: Vec<f64>,
    y_sq: Vec<f64>,
}

/// Validate raw arrays into a [`CaseControlDataset`].
pub fn validate_dataset(raw: &RawDataset) -> Result<CaseControlDataset> {
    let n = raw.d.len();
    if raw.x.nrows() != n || raw.y.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "phenotype has {n} entries, covariates {} rows, genotypes {} rows",
            raw.x.nrows(),
            raw.y.nrows()
        )));
    }
    if raw.y.ncols() == 0 {
        return Err(Error::NoGenotypes);
    }
    let mut d = Vec::with_capacity(n);
    for &v in &raw.d {
        if !v.is_finite() {
            return Err(Error::NonFinite("phenotype"));
        }
        if v == 0.0 {
            d.push(0u8);
        } else if v == 1.0 {
            d.push(1u8);
        } else {
            return Err(Error::InvalidPhenotype(v));
        }
    }
    CaseControlDataset::new(d, raw.x.clone(), raw.y.clone())
}

impl CaseControlDataset {
    pub fn new(d: Vec<u8>, x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        let n = d.len();
        if x.nrows() != n || y.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "phenotype has {n} entries, covariates {} rows, genotypes {} rows",
                x.nrows(),
                y.nrows()
            )));
        }
        if y.ncols() == 0 {
            return Err(Error::NoGenotypes);
        }
        if let Some(&bad) = d.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidPhenotype(bad as f64));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariates"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("genotypes"));
        }
        if let Some(&neg) = y.iter().find(|&&v| v < 0.0) {
            return Err(Error::NegativeGenotype(neg));
        }
        let n1 = d.iter().filter(|&&v| v == 1).count();
        let n0 = n - n1;
        if n1 == 0 {
            return Err(Error::NoCases);
        }
        if n0 == 0 {
            return Err(Error::NoControls);
        }
        let y_sum = y.row_iter().map(|r| r.sum()).collect();
        let y_sq = y.row_iter().map(|r| r.norm_squared()).collect();
        Ok(Self {
            d,
            x,
            y,
            n0,
            n1,
            y_sum,
            y_sq,
        })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Number of covariates (excluding the intercept).
    pub fn dx(&self) -> usize {
        self.x.ncols()
    }

    /// Number of genetic markers.
    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn d(&self) -> &[u8] {
        &self.d
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Per-subject genotype sum `yᵢᵀ1`.
    pub fn y_sum(&self) -> &[f64] {
        &self.y_sum
    }

    /// Per-subject squared genotype norm `yᵢᵀyᵢ`.
    pub fn y_sq(&self) -> &[f64] {
        &self.y_sq
    }

    /// `log(n1 / n0)`, the shift between the retrospective and sample intercepts.
    pub fn log_case_ratio(&self) -> f64 {
        (self.n1 as f64 / self.n0 as f64).ln()
    }

    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            d: self.d.iter().map(|&v| v as f64).collect(),
            x: self.x.clone(),
            y: self.y.clone(),
        }
    }

    /// Design `(1, x)` for the model without genetic terms.
    pub fn design_both(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, 1 + self.dx(), |i, j| {
            if j == 0 {
                1.0
            } else {
                self.x[(i, j - 1)]
            }
        })
    }

    /// Design `(1, x, yᵀ1)` for the model with the aggregated genotype effect.
    pub fn design_theta(&self) -> DMatrix<f64> {
        let n = self.n();
        let k = self.dx();
        DMatrix::from_fn(n, k + 2, |i, j| {
            if j == 0 {
                1.0
            } else if j <= k {
                self.x[(i, j - 1)]
            } else {
                self.y_sum[i]
            }
        })
    }
}

/// What is known about the disease prevalence.
///
/// `Fitted` selects the prospective anchor: the fitted sample intercept is
/// used in place of the population intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrevalenceSpec {
    KnownAlphaP { alpha_p: f64 },
    KnownPrevalence { p: f64 },
    Interval { b1: f64, b2: f64, m: usize },
    Fitted,
}

impl PrevalenceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PrevalenceSpec::KnownAlphaP { alpha_p } if !alpha_p.is_finite() => {
                Err(Error::InvalidArgument("alpha_p must be finite".into()))
            }
            PrevalenceSpec::KnownPrevalence { p } if !(p > 0.0 && p < 1.0) => Err(
                Error::InvalidArgument(format!("prevalence {p} is not in (0, 1)")),
            ),
            PrevalenceSpec::Interval { b1, b2, m } => {
                if !(b1.is_finite() && b2.is_finite()) || b1 > b2 {
                    return Err(Error::InvalidArgument(format!(
                        "prevalence interval [{b1}, {b2}] is not ordered"
                    )));
                }
                if m < 1 || (m < 2 && b1 < b2) {
                    return Err(Error::InvalidArgument(format!(
                        "grid size m = {m} is too small for interval [{b1}, {b2}]"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Whether the spec yields a single `α*` value.
    pub fn is_single(&self) -> bool {
        !matches!(self, PrevalenceSpec::Interval { m, .. } if *m > 1)
    }
}

/// `α_r = α_p + log{(1−p)/p}`.
pub fn retrospective_intercept(alpha_p: f64, p: f64) -> f64 {
    alpha_p + ((1.0 - p) / p).ln()
}

/// `α = α_r + log(n1/n0)`.
pub fn sample_intercept(alpha_r: f64, n0: usize, n1: usize) -> f64 {
    alpha_r + (n1 as f64 / n0 as f64).ln()
}
