//! FS, RS(α*), SS(α*), RS-MAX and SS-MAX tests.

use serde::{Deserialize, Serialize};

use crate::data::{CaseControlDataset, PrevalenceSpec};
use crate::error::{Error, Result};
use crate::logistic::{fit_null_both, fit_null_theta, LogisticFit, NewtonConfig};
use crate::pvalue::{rs_mixture_sf, rsmax_sf, ss_mixture_sf, ssmax_sf, chi2_sf, MvnConfig, DEFAULT_QUAD_NODES};
use crate::score::{bundle_from_fits, ScoreBundle};
use crate::variance::{sigma_s, variance_bundle, VarianceBundle, WeightPairing};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "FS")]
    Fs,
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "SS")]
    Ss,
    #[serde(rename = "RS_MAX")]
    RsMax,
    #[serde(rename = "SS_MAX")]
    SsMax,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fs => "FS",
            Method::Rs => "RS",
            Method::Ss => "SS",
            Method::RsMax => "RS_MAX",
            Method::SsMax => "SS_MAX",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "fs" => Ok(Method::Fs),
            "rs" => Ok(Method::Rs),
            "ss" => Ok(Method::Ss),
            "rs-max" => Ok(Method::RsMax),
            "ss-max" => Ok(Method::SsMax),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }

    pub fn is_max(self) -> bool {
        matches!(self, Method::RsMax | Method::SsMax)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub theta_iterations: usize,
    pub both_iterations: usize,
    pub sigma22: f64,
    pub sigma11_diagonal: Vec<f64>,
    /// Smallest eigenvalue of `Σ_s` before repair; MAX tests only.
    pub sigma_s_min_eigenvalue: Option<f64>,
    pub sigma_s_repaired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha_grid: Vec<f64>,
    /// Empty when some `σ̂₁₁(α*, α*)` vanishes.
    pub u1_standardized: Vec<f64>,
    pub u2_standardized: Option<f64>,
    pub numeric_error: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub newton: NewtonConfig,
    pub mvn: MvnConfig,
    pub grid_literal: bool,
    pub pairing: WeightPairing,
    pub quad_nodes: usize,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            mvn: MvnConfig::default(),
            grid_literal: false,
            pairing: WeightPairing::Paired,
            quad_nodes: DEFAULT_QUAD_NODES,
        }
    }
}

/// `U₁ₛ(α*) = (U₁(α*)/√n)/√σ̂₁₁(α*,α*)` and `U₂ₛ = (U₂/√n)/√σ̂₂₂`.
pub fn standardize(scores: &ScoreBundle, vb: &VarianceBundle, n: usize) -> Result<(Vec<f64>, f64)> {
    let u1s = standardize_u1(scores, vb, n)?;
    if !(vb.sigma22 > 0.0) {
        return Err(Error::DegenerateScore(format!("sigma22 = {:.3e}", vb.sigma22)));
    }
    Ok((u1s, scores.u2 / (n as f64).sqrt() / vb.sigma22.sqrt()))
}

fn standardize_u1(scores: &ScoreBundle, vb: &VarianceBundle, n: usize) -> Result<Vec<f64>> {
    let rn = (n as f64).sqrt();
    scores
        .u1
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let s = vb.sigma11[(i, i)];
            if !(s > 0.0) {
                return Err(Error::DegenerateScore(format!("sigma11 diagonal entry {i} = {s:.3e}")));
            }
            Ok(u / rn / s.sqrt())
        })
        .collect()
}

/// `σ̂₂₂` counts as zero when it is negligible next to the weighted second
/// moment of `yᵀ1`, which happens when the burden is collinear with `(1, x)`.
fn u2_standardized(ds: &CaseControlDataset, scores: &ScoreBundle, vb: &VarianceBundle) -> Option<f64> {
    let n = ds.n() as f64;
    let moment: f64 = scores
        .fit_both
        .fitted_probs
        .iter()
        .zip(ds.y_sum())
        .map(|(&p, &s)| p * (1.0 - p) * s * s)
        .sum::<f64>()
        / n;
    if vb.sigma22 > 1e-10 * moment && vb.sigma22 > 0.0 {
        Some(scores.u2 / n.sqrt() / vb.sigma22.sqrt())
    } else {
        None
    }
}

/// Scores, variances and standardized scores for one dataset and `α*` grid,
/// shared by all test statistics.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub scores: ScoreBundle,
    pub variance: VarianceBundle,
    pub u1s: Option<Vec<f64>>,
    pub u2s: Option<f64>,
    options: TestOptions,
}

/// Both null fits for a dataset, so several analyses can share them.
pub fn null_fits(ds: &CaseControlDataset, newton: &NewtonConfig) -> Result<(LogisticFit, LogisticFit)> {
    if ds.y_sq().iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateScore(
            "every subject has yᵀy = 0, so U₁ is identically zero".into(),
        ));
    }
    Ok((fit_null_theta(ds, newton)?, fit_null_both(ds, newton)?))
}

impl Analysis {
    pub fn new(ds: &CaseControlDataset, prevalence: &PrevalenceSpec, options: &TestOptions) -> Result<Self> {
        let (theta, both) = null_fits(ds, &options.newton)?;
        Self::from_fits(ds, prevalence, theta, both, options)
    }

    pub fn from_fits(
        ds: &CaseControlDataset,
        prevalence: &PrevalenceSpec,
        fit_theta: LogisticFit,
        fit_both: LogisticFit,
        options: &TestOptions,
    ) -> Result<Self> {
        let scores = bundle_from_fits(ds, prevalence, fit_theta, fit_both, options.grid_literal)?;
        let variance = variance_bundle(ds, &scores, options.pairing)?;
        let u1s = standardize_u1(&scores, &variance, ds.n()).ok();
        let u2s = u2_standardized(ds, &scores, &variance);
        Ok(Self {
            scores,
            variance,
            u1s,
            u2s,
            options: *options,
        })
    }

    fn diagnostics(&self, sigma_s_min_eigenvalue: Option<f64>, sigma_s_repaired: bool) -> Diagnostics {
        Diagnostics {
            theta_iterations: self.scores.fit_theta.iterations,
            both_iterations: self.scores.fit_both.iterations,
            sigma22: self.variance.sigma22,
            sigma11_diagonal: self.variance.sigma11.diagonal().iter().copied().collect(),
            sigma_s_min_eigenvalue,
            sigma_s_repaired,
        }
    }

    fn result(&self, method: Method, statistic: f64, p_value: f64, numeric_error: f64) -> TestResult {
        self.result_with(method, statistic, p_value, numeric_error, self.diagnostics(None, false))
    }

    fn result_with(
        &self,
        method: Method,
        statistic: f64,
        p_value: f64,
        numeric_error: f64,
        diagnostics: Diagnostics,
    ) -> TestResult {
        TestResult {
            method,
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            alpha_grid: self.scores.alpha_grid.clone(),
            u1_standardized: self.u1s.clone().unwrap_or_default(),
            u2_standardized: self.u2s,
            numeric_error,
            diagnostics,
        }
    }

    fn u1s_required(&self) -> Result<&[f64]> {
        self.u1s.as_deref().ok_or_else(|| {
            Error::DegenerateScore(format!(
                "sigma11 diagonal {:?} has a zero entry",
                self.variance.sigma11.diagonal().as_slice()
            ))
        })
    }

    /// Correlation matrix of the standardized `U₁` scores, with its smallest
    /// raw eigenvalue and whether it was repaired.
    pub fn sigma_s(&self) -> Result<(DMatrix<f64>, f64, bool)> {
        sigma_s(&self.variance.sigma11)
    }

    fn max_rs_statistic(&self) -> Result<f64> {
        Ok(self.u1s_required()?.iter().map(|u| u.max(0.0).powi(2)).fold(0.0, f64::max))
    }

    fn u2s_required(&self) -> Result<f64> {
        self.u2s.ok_or_else(|| {
            Error::DegenerateScore(format!(
                "sigma22 = {:.3e}: the burden yᵀ1 is collinear with the covariates",
                self.variance.sigma22
            ))
        })
    }

    pub fn fs_statistic(&self) -> Result<f64> {
        Ok(self.u2s_required()?.powi(2))
    }

    /// `{U₁ₛ⁺(α*)}²` at grid position `i`.
    pub fn rs_statistic(&self, i: usize) -> Result<f64> {
        Ok(self.u1s_required()?[i].max(0.0).powi(2))
    }

    pub fn ss_statistic(&self, i: usize) -> Result<f64> {
        Ok(self.rs_statistic(i)? + self.fs_statistic()?)
    }

    fn single_index(&self) -> Result<usize> {
        let m = self.scores.alpha_grid.len();
        if m != 1 {
            return Err(Error::InvalidArgument(format!(
                "RS/SS need a single alpha*, got a grid of {m}"
            )));
        }
        Ok(0)
    }

    pub fn fs(&self) -> Result<TestResult> {
        let t = self.fs_statistic()?;
        Ok(self.result(Method::Fs, t, chi2_sf(t, 1)?, 0.0))
    }

    pub fn rs(&self) -> Result<TestResult> {
        let i = self.single_index()?;
        let t = self.rs_statistic(i)?;
        Ok(self.result(Method::Rs, t, rs_mixture_sf(t)?, 0.0))
    }

    pub fn ss(&self) -> Result<TestResult> {
        let i = self.single_index()?;
        let t = self.ss_statistic(i)?;
        let p = if t == 0.0 { 1.0 } else { ss_mixture_sf(t)? };
        Ok(self.result(Method::Ss, t, p, 0.0))
    }

    pub fn rs_max(&self) -> Result<TestResult> {
        let t = self.max_rs_statistic()?;
        let (corr, min_eig, repaired) = self.sigma_s()?;
        let tail = rsmax_sf(t, &corr, &self.options.mvn)?;
        let diag = self.diagnostics(Some(min_eig), repaired);
        Ok(self.result_with(Method::RsMax, t, tail.prob, tail.abs_error_estimate, diag))
    }

    pub fn ss_max(&self) -> Result<TestResult> {
        let t = self.max_rs_statistic()? + self.fs_statistic()?;
        let (corr, min_eig, repaired) = self.sigma_s()?;
        let tail = ssmax_sf(t, &corr, &self.options.mvn, self.options.quad_nodes)?;
        let diag = self.diagnostics(Some(min_eig), repaired);
        Ok(self.result_with(Method::SsMax, t, tail.prob, tail.abs_error_estimate, diag))
    }

    pub fn run(&self, method: Method) -> Result<TestResult> {
        match method {
            Method::Fs => self.fs(),
            Method::Rs => self.rs(),
            Method::Ss => self.ss(),
            Method::RsMax => self.rs_max(),
            Method::SsMax => self.ss_max(),
        }
    }
}

/// Prevalence spec the FS test is run with; `U₂` does not depend on `α*`.
const FS_ANCHOR: PrevalenceSpec = PrevalenceSpec::Fitted;

pub fn fs_test(ds: &CaseControlDataset, options: &TestOptions) -> Result<TestResult> {
    Analysis::new(ds, &FS_ANCHOR, options)?.fs()
}

pub fn rs_test(ds: &CaseControlDataset, prevalence: &PrevalenceSpec, options: &TestOptions) -> Result<TestResult> {
    Analysis::new(ds, prevalence, options)?.rs()
}

pub fn ss_test(ds: &CaseControlDataset, prevalence: &PrevalenceSpec, options: &TestOptions) -> Result<TestResult> {
    Analysis::new(ds, prevalence, options)?.ss()
}

pub fn rs_max_test(ds: &CaseControlDataset, prevalence: &PrevalenceSpec, options: &TestOptions) -> Result<TestResult> {
    Analysis::new(ds, prevalence, options)?.rs_max()
}

pub fn ss_max_test(ds: &CaseControlDataset, prevalence: &PrevalenceSpec, options: &TestOptions) -> Result<TestResult> {
    Analysis::new(ds, prevalence, options)?.ss_max()
}

/// Runs `method`; FS ignores `prevalence`.
pub fn run_test(
    ds: &CaseControlDataset,
    method: Method,
    prevalence: &PrevalenceSpec,
    options: &TestOptions,
) -> Result<TestResult> {
    if method == Method::Fs {
        return fs_test(ds, options);
    }
    if !method.is_max() && !prevalence.is_single() {
        return Err(Error::InvalidArgument(format!(
            "{} needs a single prevalence anchor, not an interval",
            method.name()
        )));
    }
    Analysis::new(ds, prevalence, options)?.run(method)
}
