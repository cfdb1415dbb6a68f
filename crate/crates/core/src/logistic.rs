//! Null-model logistic fits.
//!
//! Both null designs maximize the same concave objective
//! `Σ Dᵢ ηᵢ − Σ log(1 + exp ηᵢ)` with `ηᵢ = offset + ξᵀzᵢ`; only the design
//! differs. Newton–Raphson with step halving is globally convergent on
//! non-separated data.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::CaseControlDataset;
use crate::error::{Error, Result};

/// Logistic function `e^t / (1 + e^t)`, evaluated without overflow.
#[inline]
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Max-norm tolerance on the score vector.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub step_halving_max: usize,
    /// Coefficient norm beyond which the data are declared separated.
    pub coef_cap: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iter: 50,
            step_halving_max: 30,
            coef_cap: 1e3,
        }
    }
}

impl NewtonConfig {
    fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) || self.max_iter < 1 || !(self.coef_cap > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid Newton configuration {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Design `(1, x)`.
    NullBoth,
    /// Design `(1, x, yᵀ1)`.
    NullTheta,
    /// Design `(1, x)` in the density-ratio parameterization: the intercept
    /// is `α_r` and the linear predictor carries the offset `log(n1/n0)`.
    DensityRatioBoth,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Intercept first, then covariate effects, then (for `NullTheta`) `γ`.
    pub coefficients: Vec<f64>,
    pub design_kind: DesignKind,
    /// Constant added to every linear predictor.
    pub offset: f64,
    pub converged: bool,
    pub iterations: usize,
    pub max_gradient: f64,
    pub fitted_probs: Vec<f64>,
    /// Log-likelihood at the returned coefficients.
    pub loglik: f64,
    /// Log-likelihood after each accepted iteration, starting point first.
    pub loglik_path: Vec<f64>,
    /// Observed information `Σ πᵢ(1−πᵢ) zᵢzᵢᵀ` at the optimum.
    pub information: DMatrix<f64>,
}

impl LogisticFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    /// Covariate effects, excluding intercept and any genotype coefficient.
    pub fn beta(&self) -> &[f64] {
        match self.design_kind {
            DesignKind::NullTheta => &self.coefficients[1..self.coefficients.len() - 1],
            _ => &self.coefficients[1..],
        }
    }

    /// Aggregated genotype effect `γ̃` of a `NullTheta` fit, zero otherwise.
    pub fn gamma(&self) -> f64 {
        match self.design_kind {
            DesignKind::NullTheta => *self.coefficients.last().unwrap(),
            _ => 0.0,
        }
    }
}

fn linear_predictor(design: &DMatrix<f64>, coef: &[f64], offset: f64) -> Vec<f64> {
    let mut eta = vec![offset; design.nrows()];
    for (j, &c) in coef.iter().enumerate() {
        for (e, &z) in eta.iter_mut().zip(design.column(j).iter()) {
            *e += c * z;
        }
    }
    eta
}

fn loglik(eta: &[f64], d: &[u8]) -> f64 {
    eta.iter()
        .zip(d)
        .map(|(&e, &di)| di as f64 * e - softplus(e))
        .sum()
}

fn gradient(design: &DMatrix<f64>, d: &[u8], probs: &[f64]) -> Vec<f64> {
    (0..design.ncols())
        .map(|j| {
            design
                .column(j)
                .iter()
                .zip(d.iter().zip(probs))
                .map(|(&z, (&di, &p))| (di as f64 - p) * z)
                .sum()
        })
        .collect()
}

fn information(design: &DMatrix<f64>, probs: &[f64]) -> DMatrix<f64> {
    let k = design.ncols();
    let mut info = DMatrix::zeros(k, k);
    for (i, &p) in probs.iter().enumerate() {
        let w = p * (1.0 - p);
        for a in 0..k {
            let za = w * design[(i, a)];
            for b in 0..=a {
                info[(a, b)] += za * design[(i, b)];
            }
        }
    }
    info.fill_upper_triangle_with_lower_triangle();
    info
}

/// Reject designs whose columns are (numerically) linearly dependent.
fn check_rank(design: &DMatrix<f64>) -> Result<()> {
    let gram = design.tr_mul(design);
    let k = gram.nrows();
    let mut scale = DVector::zeros(k);
    for j in 0..k {
        let g = gram[(j, j)];
        if !(g > 0.0) {
            return Err(Error::RankDeficient { column: j });
        }
        scale[j] = 1.0 / g.sqrt();
    }
    let normalized = DMatrix::from_fn(k, k, |a, b| gram[(a, b)] * scale[a] * scale[b]);
    let eig = SymmetricEigen::new(normalized);
    let (imin, &min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let max = eig.eigenvalues.max();
    if min <= 1e-12 * max {
        let column = eig
            .eigenvectors
            .column(imin)
            .iamax();
        return Err(Error::RankDeficient { column });
    }
    Ok(())
}

/// Maximize `Σ Dᵢ ηᵢ − Σ log(1 + exp ηᵢ)` over the coefficients of `design`.
pub fn fit_logistic(design: &DMatrix<f64>, d: &[u8], config: &NewtonConfig) -> Result<LogisticFit> {
    fit_logistic_offset(design, d, 0.0, config)
}

/// As [`fit_logistic`] with a fixed offset added to every linear predictor.
///
/// The first column of `design` must be the all-ones intercept column.
pub fn fit_logistic_offset(
    design: &DMatrix<f64>,
    d: &[u8],
    offset: f64,
    config: &NewtonConfig,
) -> Result<LogisticFit> {
    config.validate()?;
    let n = design.nrows();
    let k = design.ncols();
    if d.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {} entries, design {n} rows",
            d.len()
        )));
    }
    if k == 0 || design.column(0).iter().any(|&v| v != 1.0) {
        return Err(Error::InvalidArgument(
            "design must start with an all-ones column".into(),
        ));
    }
    let n1 = d.iter().filter(|&&v| v == 1).count();
    if n1 == 0 {
        return Err(Error::NoCases);
    }
    if n1 == n {
        return Err(Error::NoControls);
    }
    check_rank(design)?;

    let mut coef = vec![0.0; k];
    coef[0] = (n1 as f64 / (n - n1) as f64).ln() - offset;
    let mut eta = linear_predictor(design, &coef, offset);
    let mut ll = loglik(&eta, d);
    let mut loglik_path = vec![ll];
    let slack = |ll: f64| 16.0 * f64::EPSILON * (1.0 + ll.abs());

    for iter in 0..=config.max_iter {
        let probs: Vec<f64> = eta.iter().map(|&e| logistic(e)).collect();
        let grad = gradient(design, d, &probs);
        let max_gradient = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let info = information(design, &probs);
        if max_gradient <= config.grad_tol {
            if probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(Error::Separation {
                    norm: coef.iter().map(|c| c * c).sum::<f64>().sqrt(),
                });
            }
            return Ok(LogisticFit {
                coefficients: coef,
                design_kind: DesignKind::Custom,
                offset,
                converged: true,
                iterations: iter,
                max_gradient,
                fitted_probs: probs,
                loglik: ll,
                loglik_path,
                information: info,
            });
        }
        if iter == config.max_iter {
            return Err(Error::NonConvergence {
                iterations: iter,
                max_gradient,
            });
        }
        let chol = info.clone().cholesky().ok_or_else(|| {
            Error::Singular("logistic information matrix", f64::INFINITY)
        })?;
        let step = chol.solve(&DVector::from_vec(grad));

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=config.step_halving_max {
            let cand: Vec<f64> = coef.iter().zip(step.iter()).map(|(c, s)| c + t * s).collect();
            let cand_eta = linear_predictor(design, &cand, offset);
            let cand_ll = loglik(&cand_eta, d);
            if cand_ll.is_finite() && cand_ll >= ll - slack(ll) {
                coef = cand;
                eta = cand_eta;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations: iter + 1,
                max_gradient,
            });
        }
        loglik_path.push(ll);
        let norm = coef.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > config.coef_cap {
            return Err(Error::Separation { norm });
        }
    }
    unreachable!("loop returns on the final iteration")
}

/// Fit `(α̂, β̂)` on the design `(1, x)`.
pub fn fit_null_both(ds: &CaseControlDataset, config: &NewtonConfig) -> Result<LogisticFit> {
    let mut fit = fit_logistic(&ds.design_both(), ds.d(), config)?;
    fit.design_kind = DesignKind::NullBoth;
    Ok(fit)
}

/// Fit `(α̃, β̃, γ̃)` on the design `(1, x, yᵀ1)`.
pub fn fit_null_theta(ds: &CaseControlDataset, config: &NewtonConfig) -> Result<LogisticFit> {
    let mut fit = fit_logistic(&ds.design_theta(), ds.d(), config)?;
    fit.design_kind = DesignKind::NullTheta;
    Ok(fit)
}

/// Fit `(α̂_r, β̂)` by maximizing the density-ratio objective
/// `Σ Dᵢ(α_r + βᵀxᵢ) − Σ log{1 + (n1/n0) exp(α_r + βᵀxᵢ)}`.
///
/// The sample intercept is recovered as `α̂ = α̂_r + log(n1/n0)`.
pub fn fit_density_ratio_both(
    ds: &CaseControlDataset,
    config: &NewtonConfig,
) -> Result<LogisticFit> {
    let mut fit = fit_logistic_offset(&ds.design_both(), ds.d(), ds.log_case_ratio(), config)?;
    fit.design_kind = DesignKind::DensityRatioBoth;
    Ok(fit)
}

/// Empirical-likelihood masses of each subject under the control and case
/// distributions: `(1 − π̂ᵢ)/n0` and `π̂ᵢ/n1`.
pub fn case_control_weights(fit: &LogisticFit, ds: &CaseControlDataset) -> (Vec<f64>, Vec<f64>) {
    let n0 = ds.n0() as f64;
    let n1 = ds.n1() as f64;
    fit.fitted_probs
        .iter()
        .map(|&p| ((1.0 - p) / n0, p / n1))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CaseControlDataset;
    use proptest::prelude::*;

    fn ones(n: usize) -> DMatrix<f64> {
        DMatrix::from_element(n, 1, 1.0)
    }

    /// Dense grid search followed by successive refinement; independent of Newton.
    fn grid_argmax(design: &DMatrix<f64>, d: &[u8], center: &[f64], width: f64) -> Vec<f64> {
        let k = center.len();
        let mut best = center.to_vec();
        let mut w = width;
        for _ in 0..40 {
            let steps = 8i64;
            let mut best_ll = f64::NEG_INFINITY;
            let mut best_now = best.clone();
            let total = (2 * steps + 1).pow(k as u32);
            for idx in 0..total {
                let mut rem = idx;
                let cand: Vec<f64> = (0..k)
                    .map(|j| {
                        let o = rem % (2 * steps + 1) - steps;
                        rem /= 2 * steps + 1;
                        best[j] + w * o as f64 / steps as f64
                    })
                    .collect();
                let ll = loglik(&linear_predictor(design, &cand, 0.0), d);
                if ll > best_ll {
                    best_ll = ll;
                    best_now = cand;
                }
            }
            best = best_now;
            w *= 0.5;
        }
        best
    }

    #[test]
    fn intercept_only_balanced() {
        let d = vec![0, 1, 0, 1, 1, 0];
        let fit = fit_logistic(&ones(6), &d, &NewtonConfig::default()).unwrap();
        assert!(fit.intercept().abs() < 1e-12);
    }

    #[test]
    fn intercept_only_two_to_one() {
        let d = vec![0, 1, 1, 0, 1, 1];
        let fit = fit_logistic(&ones(6), &d, &NewtonConfig::default()).unwrap();
        assert!((fit.intercept() - 2f64.ln()).abs() < 1e-12);
        assert!((fit.intercept() - 0.693147).abs() < 1e-6);
    }

    fn two_by_two() -> (DMatrix<f64>, Vec<u8>) {
        // x = 0: 10 controls, 20 cases; x = 1: 30 controls, 15 cases.
        let mut rows = Vec::new();
        let mut d = Vec::new();
        for (x, dv, count) in [(0.0, 0u8, 10), (0.0, 1, 20), (1.0, 0, 30), (1.0, 1, 15)] {
            for _ in 0..count {
                rows.push(x);
                d.push(dv);
            }
        }
        let n = rows.len();
        (DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { rows[i] }), d)
    }

    #[test]
    fn two_by_two_log_odds_ratio() {
        let (design, d) = two_by_two();
        let fit = fit_logistic(&design, &d, &NewtonConfig::default()).unwrap();
        let lor = ((15.0 * 10.0) / (30.0 * 20.0) as f64).ln();
        assert!((fit.coefficients[1] - lor).abs() < 1e-10);
        assert!((fit.intercept() - 2f64.ln()).abs() < 1e-10);
        let brute = grid_argmax(&design, &d, &[0.0, 0.0], 4.0);
        assert!((fit.coefficients[1] - brute[1]).abs() < 1e-6);
    }

    fn small_dataset(rows: &[(u8, f64, f64)]) -> CaseControlDataset {
        let n = rows.len();
        CaseControlDataset::new(
            rows.iter().map(|r| r.0).collect(),
            DMatrix::from_fn(n, 1, |i, _| rows[i].1),
            DMatrix::from_fn(n, 1, |i, _| rows[i].2),
        )
        .unwrap()
    }

    #[test]
    fn null_both_matches_brute_force_on_eight_rows() {
        let ds = small_dataset(&[
            (0, 0.5, 0.0),
            (0, -1.2, 1.0),
            (0, 0.3, 2.0),
            (0, 1.1, 0.0),
            (1, 0.9, 1.0),
            (1, -0.4, 0.0),
            (1, 1.7, 1.0),
            (1, 0.2, 2.0),
        ]);
        let fit = fit_null_both(&ds, &NewtonConfig::default()).unwrap();
        assert_eq!(fit.design_kind, DesignKind::NullBoth);
        let brute = grid_argmax(&ds.design_both(), ds.d(), &[0.0, 0.0], 4.0);
        for (a, b) in fit.coefficients.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn null_theta_matches_brute_force_on_ten_rows() {
        let ds = small_dataset(&[
            (0, 0.5, 0.0),
            (0, -1.2, 1.0),
            (0, 0.3, 2.0),
            (0, 1.1, 0.0),
            (0, -0.1, 1.0),
            (1, 0.9, 1.0),
            (1, -0.4, 0.0),
            (1, 1.7, 1.0),
            (1, 0.2, 2.0),
            (1, -0.8, 0.0),
        ]);
        let fit = fit_null_theta(&ds, &NewtonConfig::default()).unwrap();
        let brute = grid_argmax(&ds.design_theta(), ds.d(), &[0.0, 0.0, 0.0], 4.0);
        for (a, b) in fit.coefficients.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert_eq!(fit.gamma(), fit.coefficients[2]);
        assert_eq!(fit.beta().len(), 1);
    }

    #[test]
    fn no_covariates_reduces_to_intercept() {
        let ds = CaseControlDataset::new(
            vec![0, 1, 1, 0, 1, 1],
            DMatrix::zeros(6, 0),
            DMatrix::from_element(6, 1, 1.0),
        )
        .unwrap();
        let fit = fit_null_both(&ds, &NewtonConfig::default()).unwrap();
        assert_eq!(fit.coefficients.len(), 1);
        assert!((fit.intercept() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency() {
        let constant_x = CaseControlDataset::new(
            vec![0, 1, 0, 1],
            DMatrix::from_element(4, 1, 3.0),
            DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 1.0]),
        )
        .unwrap();
        assert!(matches!(
            fit_null_both(&constant_x, &NewtonConfig::default()),
            Err(Error::RankDeficient { .. })
        ));
        let zero_y = CaseControlDataset::new(
            vec![0, 1, 0, 1],
            DMatrix::from_row_slice(4, 1, &[0.1, 0.5, -0.3, 1.0]),
            DMatrix::zeros(4, 2),
        )
        .unwrap();
        assert!(matches!(
            fit_null_theta(&zero_y, &NewtonConfig::default()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn separation_is_reported() {
        let ds = small_dataset(&[
            (0, -2.0, 0.0),
            (0, -1.0, 1.0),
            (0, -0.5, 0.0),
            (1, 0.5, 1.0),
            (1, 1.0, 0.0),
            (1, 2.0, 1.0),
        ]);
        assert!(matches!(
            fit_null_both(&ds, &NewtonConfig::default()),
            Err(Error::Separation { .. })
        ));
    }

    #[test]
    fn non_convergence_is_reported() {
        let ds = small_dataset(&[
            (0, 0.5, 0.0),
            (0, -1.2, 1.0),
            (0, 0.3, 2.0),
            (1, 0.9, 1.0),
            (1, -0.4, 0.0),
            (1, 1.7, 1.0),
        ]);
        let cfg = NewtonConfig {
            max_iter: 1,
            ..Default::default()
        };
        assert!(matches!(
            fit_null_both(&ds, &cfg),
            Err(Error::NonConvergence { iterations: 1, .. })
        ));
    }

    #[test]
    fn mirror_dataset_has_zero_gamma() {
        let xs = [0.3, -1.0, 0.8, 1.5];
        let ys = [0.0, 1.0, 2.0, 1.0];
        let mut rows = Vec::new();
        for (&x, &y) in xs.iter().zip(&ys) {
            rows.push((0, x, y));
            rows.push((1, x, y));
        }
        let ds = small_dataset(&rows);
        let fit = fit_null_theta(&ds, &NewtonConfig::default()).unwrap();
        for c in &fit.coefficients {
            assert!(c.abs() < 1e-10);
        }
    }

    #[test]
    fn weights_on_intercept_only_fit() {
        let ds = CaseControlDataset::new(
            vec![0, 1, 0, 1],
            DMatrix::zeros(4, 0),
            DMatrix::from_element(4, 1, 1.0),
        )
        .unwrap();
        let fit = fit_null_both(&ds, &NewtonConfig::default()).unwrap();
        let (w0, w1) = case_control_weights(&fit, &ds);
        for (&a, &b) in w0.iter().zip(&w1) {
            assert!((a - 0.25).abs() < 1e-12 && (b - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_on_six_rows_match_direct_arithmetic() {
        let ds = small_dataset(&[
            (0, 0.5, 0.0),
            (0, -1.2, 1.0),
            (0, 0.3, 2.0),
            (1, 0.9, 1.0),
            (1, -0.4, 0.0),
            (1, 1.7, 1.0),
        ]);
        let fit = fit_null_both(&ds, &NewtonConfig::default()).unwrap();
        let (w0, w1) = case_control_weights(&fit, &ds);
        for i in 0..6 {
            let eta = fit.coefficients[0] + fit.coefficients[1] * ds.x()[(i, 0)];
            let p = 1.0 / (1.0 + (-eta).exp());
            assert!((w0[i] - (1.0 - p) / 3.0).abs() < 1e-14);
            assert!((w1[i] - p / 3.0).abs() < 1e-14);
        }
        assert!((w0.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!((w1.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn density_ratio_fit_matches_prospective() {
        let ds = small_dataset(&[
            (0, 0.5, 0.0),
            (0, -1.2, 1.0),
            (0, 0.3, 2.0),
            (0, 1.1, 0.0),
            (1, 0.9, 1.0),
            (1, -0.4, 0.0),
            (1, 1.7, 1.0),
        ]);
        let cfg = NewtonConfig::default();
        let pros = fit_null_both(&ds, &cfg).unwrap();
        let retro = fit_density_ratio_both(&ds, &cfg).unwrap();
        assert!((retro.intercept() + ds.log_case_ratio() - pros.intercept()).abs() < 1e-10);
        assert!((retro.coefficients[1] - pros.coefficients[1]).abs() < 1e-10);
        // ℓ₁(α_r, β) = ℓ₂(α, β) − n₁ log(n₁/n₀)
        let expected = pros.loglik - ds.n1() as f64 * ds.log_case_ratio();
        let l1: f64 = (0..ds.n())
            .map(|i| {
                let lin = retro.intercept() + retro.coefficients[1] * ds.x()[(i, 0)];
                ds.d()[i] as f64 * lin - (1.0 + (ds.n1() as f64 / ds.n0() as f64) * lin.exp()).ln()
            })
            .sum();
        assert!((l1 - expected).abs() < 1e-10);
    }

    fn random_dataset(seed: u64, n: usize) -> CaseControlDataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut d: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
        d[0] = 0;
        d[1] = 1;
        let x = DMatrix::from_fn(n, 2, |_, j| {
            if j == 0 {
                rng.random_bool(0.5) as u8 as f64
            } else {
                rng.random::<f64>() * 2.0 - 0.5
            }
        });
        let y = DMatrix::from_fn(n, 3, |_, _| rng.random_range(0..3) as f64);
        CaseControlDataset::new(d, x, y).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn converged_fits_satisfy_score_equations(seed in any::<u64>()) {
            let ds = random_dataset(seed, 60);
            let cfg = NewtonConfig::default();
            for fit in [fit_null_both(&ds, &cfg), fit_null_theta(&ds, &cfg)] {
                let fit = match fit { Ok(f) => f, Err(_) => continue };
                let design = match fit.design_kind {
                    DesignKind::NullBoth => ds.design_both(),
                    _ => ds.design_theta(),
                };
                let g = gradient(&design, ds.d(), &fit.fitted_probs);
                prop_assert!(g.iter().all(|v| v.abs() <= cfg.grad_tol));
                prop_assert!(fit.max_gradient <= cfg.grad_tol);
                prop_assert!(fit.fitted_probs.iter().all(|&p| p > 0.0 && p < 1.0));
                for w in fit.loglik_path.windows(2) {
                    prop_assert!(w[1] >= w[0] - 16.0 * f64::EPSILON * (1.0 + w[0].abs()));
                }
                let (w0, w1) = case_control_weights(&fit, &ds);
                prop_assert!((w0.iter().sum::<f64>() - 1.0).abs() < 1e-8);
                prop_assert!((w1.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            }
        }

        #[test]
        fn covariate_shift_moves_only_the_intercept(seed in any::<u64>(), c in -5.0f64..5.0) {
            let ds = random_dataset(seed, 60);
            let cfg = NewtonConfig::default();
            let Ok(fit) = fit_null_both(&ds, &cfg) else { return Ok(()) };
            let mut x = ds.x().clone();
            x.column_mut(1).add_scalar_mut(c);
            let shifted = CaseControlDataset::new(ds.d().to_vec(), x, ds.y().clone()).unwrap();
            let fit2 = fit_null_both(&shifted, &cfg).unwrap();
            prop_assert!((fit2.intercept() - (fit.intercept() - fit.coefficients[2] * c)).abs() < 1e-8);
            for (a, b) in fit.fitted_probs.iter().zip(&fit2.fitted_probs) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }

        #[test]
        fn theta_fit_depends_on_genotypes_only_through_row_sums(seed in any::<u64>()) {
            let ds = random_dataset(seed, 60);
            let cfg = NewtonConfig::default();
            let Ok(fit) = fit_null_theta(&ds, &cfg) else { return Ok(()) };
            // Reverse the marker order within every row: same yᵀ1.
            let q = ds.q();
            let y = DMatrix::from_fn(ds.n(), q, |i, j| ds.y()[(i, q - 1 - j)]);
            let permuted = CaseControlDataset::new(ds.d().to_vec(), ds.x().clone(), y).unwrap();
            let fit2 = fit_null_theta(&permuted, &cfg).unwrap();
            prop_assert_eq!(fit.coefficients, fit2.coefficients);
        }
    }
}
