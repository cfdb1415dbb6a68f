//! Retrospective and prospective score statistics for the random effect
//! (`U₁(α*)`) and the aggregated fixed effect (`U₂`).

use crate::data::{CaseControlDataset, PrevalenceSpec};
use crate::error::{Error, Result};
use crate::logistic::{
    fit_density_ratio_both, fit_null_both, fit_null_theta, logistic, DesignKind, LogisticFit,
    NewtonConfig,
};

/// Derivative in `θ` at `θ = 0` of the marginal disease probability
/// `E_v π(η + √θ·yᵀv)` when the components of `v` have variance 2:
/// `{1 − 2π(η)} π(η) {1 − π(η)} yᵀy`.
pub fn d_g_d_theta(eta: f64, yty: f64) -> f64 {
    let p = logistic(eta);
    (1.0 - 2.0 * p) * p * (1.0 - p) * yty
}

/// Linear predictor of the theta-null fit with its intercept replaced by `alpha_star`.
#[inline]
pub(crate) fn shifted_eta(fit_theta: &LogisticFit, ds: &CaseControlDataset, i: usize, alpha_star: f64) -> f64 {
    let beta = fit_theta.beta();
    let mut eta = alpha_star + fit_theta.gamma() * ds.y_sum()[i];
    for (j, &b) in beta.iter().enumerate() {
        eta += b * ds.x()[(i, j)];
    }
    eta
}

fn require_kind(fit: &LogisticFit, kind: DesignKind, what: &str) -> Result<()> {
    if fit.design_kind != kind || !fit.converged {
        return Err(Error::InvalidArgument(format!(
            "{what} requires a converged {kind:?} fit, got {:?}",
            fit.design_kind
        )));
    }
    Ok(())
}

/// `U₁(α*) = Σ {Dᵢ − π(α̃ + β̃ᵀxᵢ + γ̃ yᵢᵀ1)} {1 − 2π(α* + β̃ᵀxᵢ + γ̃ yᵢᵀ1)} yᵢᵀyᵢ`.
///
/// The residual always uses the fitted intercept; only the second factor
/// sees `alpha_star`.
pub fn score_u1(ds: &CaseControlDataset, fit_theta: &LogisticFit, alpha_star: f64) -> Result<f64> {
    require_kind(fit_theta, DesignKind::NullTheta, "score_u1")?;
    Ok(u1_unchecked(ds, fit_theta, alpha_star))
}

pub(crate) fn u1_unchecked(ds: &CaseControlDataset, fit_theta: &LogisticFit, alpha_star: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..ds.n() {
        let yty = ds.y_sq()[i];
        if yty == 0.0 {
            continue;
        }
        let resid = ds.d()[i] as f64 - fit_theta.fitted_probs[i];
        let p_star = logistic(shifted_eta(fit_theta, ds, i, alpha_star));
        total += resid * (1.0 - 2.0 * p_star) * yty;
    }
    total
}

/// Prospective score for `θ`, which is `U₁` evaluated at the fitted intercept.
pub fn score_u1_prospective(ds: &CaseControlDataset, fit_theta: &LogisticFit) -> Result<f64> {
    score_u1(ds, fit_theta, fit_theta.intercept())
}

/// `U₂ = Σ {Dᵢ − π(α̂ + β̂ᵀxᵢ)} yᵢᵀ1` from the prospective fit on `(1, x)`.
pub fn score_u2(ds: &CaseControlDataset, fit_both: &LogisticFit) -> Result<f64> {
    require_kind(fit_both, DesignKind::NullBoth, "score_u2")?;
    Ok(ds
        .y_sum()
        .iter()
        .zip(ds.d().iter().zip(&fit_both.fitted_probs))
        .map(|(&s, (&d, &p))| (d as f64 - p) * s)
        .sum())
}

/// `U₂` from the density-ratio fit `(α̂_r, β̂)`, converting to the sample
/// intercept `α̂ = α̂_r + log(n1/n0)` before forming residuals.
pub fn score_u2_retrospective(ds: &CaseControlDataset, fit_ratio: &LogisticFit) -> Result<f64> {
    require_kind(fit_ratio, DesignKind::DensityRatioBoth, "score_u2_retrospective")?;
    let alpha_hat = fit_ratio.intercept() + ds.log_case_ratio();
    let beta = fit_ratio.beta();
    let mut total = 0.0;
    for i in 0..ds.n() {
        let mut eta = alpha_hat;
        for (j, &b) in beta.iter().enumerate() {
            eta += b * ds.x()[(i, j)];
        }
        total += (ds.d()[i] as f64 - logistic(eta)) * ds.y_sum()[i];
    }
    Ok(total)
}

/// `α*` grid over an interval guess `[b1, b2]` for `log{p/(1−p)}`.
///
/// By default the grid is `α̃ − log(n1/n0) + b1 + (i−1)(b2−b1)/(m−1)`, which
/// spans the interval. With `literal` set, the `b1` offset is omitted.
pub fn alpha_grid(
    fit_theta: &LogisticFit,
    ds: &CaseControlDataset,
    b1: f64,
    b2: f64,
    m: usize,
    literal: bool,
) -> Result<Vec<f64>> {
    PrevalenceSpec::Interval { b1, b2, m }.validate()?;
    let base = fit_theta.intercept() - ds.log_case_ratio() + if literal { 0.0 } else { b1 };
    if m == 1 {
        return Ok(vec![base]);
    }
    let step = (b2 - b1) / (m - 1) as f64;
    Ok((0..m).map(|i| base + i as f64 * step).collect())
}

/// Resolve a prevalence spec into the `α*` values at which `U₁` is evaluated.
pub fn resolve_alpha_grid(
    prevalence: &PrevalenceSpec,
    fit_theta: &LogisticFit,
    ds: &CaseControlDataset,
    literal: bool,
) -> Result<Vec<f64>> {
    prevalence.validate()?;
    Ok(match *prevalence {
        PrevalenceSpec::KnownAlphaP { alpha_p } => vec![alpha_p],
        PrevalenceSpec::KnownPrevalence { p } => {
            vec![fit_theta.intercept() - ds.log_case_ratio() + (p / (1.0 - p)).ln()]
        }
        PrevalenceSpec::Interval { b1, b2, m } => alpha_grid(fit_theta, ds, b1, b2, m, literal)?,
        PrevalenceSpec::Fitted => vec![fit_theta.intercept()],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBundle {
    pub u1: Vec<f64>,
    pub u2: f64,
    pub alpha_grid: Vec<f64>,
    pub fit_theta: LogisticFit,
    pub fit_both: LogisticFit,
}

/// Null fits plus both null fits' scores, for an `α*` grid derived from `prevalence`.
pub fn score_bundle(
    ds: &CaseControlDataset,
    prevalence: &PrevalenceSpec,
    config: &NewtonConfig,
) -> Result<ScoreBundle> {
    score_bundle_with(ds, prevalence, config, false)
}

pub fn score_bundle_with(
    ds: &CaseControlDataset,
    prevalence: &PrevalenceSpec,
    config: &NewtonConfig,
    literal_grid: bool,
) -> Result<ScoreBundle> {
    if ds.y_sq().iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateScore(
            "every subject has yᵀy = 0, so U₁ is identically zero".into(),
        ));
    }
    let fit_both = fit_null_both(ds, config)?;
    let fit_theta = fit_null_theta(ds, config)?;
    bundle_from_fits(ds, prevalence, fit_theta, fit_both, literal_grid)
}

pub(crate) fn bundle_from_fits(
    ds: &CaseControlDataset,
    prevalence: &PrevalenceSpec,
    fit_theta: LogisticFit,
    fit_both: LogisticFit,
    literal_grid: bool,
) -> Result<ScoreBundle> {
    let alpha_grid = resolve_alpha_grid(prevalence, &fit_theta, ds, literal_grid)?;
    let u1 = alpha_grid
        .iter()
        .map(|&a| score_u1(ds, &fit_theta, a))
        .collect::<Result<Vec<_>>>()?;
    let u2 = score_u2(ds, &fit_both)?;
    if u1.iter().any(|v| !v.is_finite()) || !u2.is_finite() {
        return Err(Error::DegenerateScore("non-finite score".into()));
    }
    Ok(ScoreBundle {
        u1,
        u2,
        alpha_grid,
        fit_theta,
        fit_both,
    })
}

/// Same `U₂` via the density-ratio parameterization; used to cross-check
/// [`score_u2`].
pub fn score_u2_via_density_ratio(ds: &CaseControlDataset, config: &NewtonConfig) -> Result<f64> {
    let fit = fit_density_ratio_both(ds, config)?;
    score_u2_retrospective(ds, &fit)
}
