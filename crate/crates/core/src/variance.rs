//! Plug-in estimators of the asymptotic variances of `U₁(α*)/√n` and `U₂/√n`
//! and the correlation matrix of the standardized `U₁` scores across an `α*` grid.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::CaseControlDataset;
use crate::error::{Error, Result};
use crate::logistic::{logistic, LogisticFit};
use crate::score::{shifted_eta, ScoreBundle};

/// Which fitted probabilities weight the nuisance averages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPairing {
    /// `S̃_x`, `S̃_xy`, `σ̂₂₂` use the `(1, x)` fit; `S̃_{e,x}`, `H̃`, `σ̂₁₁`
    /// use the `(1, x, yᵀ1)` fit.
    #[default]
    Paired,
    /// Every average is weighted by the `(1, x)` fit.
    GammaFree,
}

const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceMatrices {
    pub s_x: DMatrix<f64>,
    pub s_ex: DMatrix<f64>,
    pub s_xy: DVector<f64>,
    /// `H̃(α*)` row vectors keyed by `α*`.
    pub h: Vec<(f64, DVector<f64>)>,
    pub pairing: WeightPairing,
    s_x_inv: DMatrix<f64>,
    s_ex_inv: DMatrix<f64>,
}

impl NuisanceMatrices {
    pub fn h_at(&self, alpha_star: f64) -> Result<&DVector<f64>> {
        self.h
            .iter()
            .find(|(a, _)| a.to_bits() == alpha_star.to_bits())
            .map(|(_, v)| v)
            .ok_or(Error::MissingH(alpha_star))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBundle {
    pub sigma11: DMatrix<f64>,
    pub sigma22: f64,
}

fn weights(fit: &LogisticFit) -> Vec<f64> {
    fit.fitted_probs.iter().map(|&p| p * (1.0 - p)).collect()
}

fn z_row(ds: &CaseControlDataset, i: usize, with_burden: bool) -> DVector<f64> {
    let k = ds.dx();
    DVector::from_fn(k + 1 + with_burden as usize, |j, _| {
        if j == 0 {
            1.0
        } else if j <= k {
            ds.x()[(i, j - 1)]
        } else {
            ds.y_sum()[i]
        }
    })
}

/// Inverse of a symmetric positive-definite matrix, refusing ill-conditioned input.
fn spd_inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > MAX_CONDITION {
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::Singular(what, cond));
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::Singular(what, max / min))?;
    Ok(chol.inverse())
}

fn one_minus_two_pi(fit_theta: &LogisticFit, ds: &CaseControlDataset, i: usize, alpha_star: f64) -> f64 {
    1.0 - 2.0 * logistic(shifted_eta(fit_theta, ds, i, alpha_star))
}

pub fn nuisance_matrices(
    ds: &CaseControlDataset,
    fit_theta: &LogisticFit,
    fit_both: &LogisticFit,
    alpha_grid: &[f64],
) -> Result<NuisanceMatrices> {
    nuisance_matrices_with(ds, fit_theta, fit_both, alpha_grid, WeightPairing::Paired)
}

pub fn nuisance_matrices_with(
    ds: &CaseControlDataset,
    fit_theta: &LogisticFit,
    fit_both: &LogisticFit,
    alpha_grid: &[f64],
    pairing: WeightPairing,
) -> Result<NuisanceMatrices> {
    let n = ds.n() as f64;
    let k = ds.dx() + 1;
    let w_both = weights(fit_both);
    let w_theta = match pairing {
        WeightPairing::Paired => weights(fit_theta),
        WeightPairing::GammaFree => w_both.clone(),
    };

    let mut s_x = DMatrix::zeros(k, k);
    let mut s_ex = DMatrix::zeros(k + 1, k + 1);
    let mut s_xy = DVector::zeros(k);
    let mut h: Vec<DVector<f64>> = vec![DVector::zeros(k + 1); alpha_grid.len()];
    for i in 0..ds.n() {
        let ze = z_row(ds, i, true);
        let z = ze.rows(0, k);
        s_x.ger(w_both[i], &z, &z, 1.0);
        s_xy.axpy(w_both[i] * ds.y_sum()[i], &z, 1.0);
        s_ex.ger(w_theta[i], &ze, &ze, 1.0);
        let yty = ds.y_sq()[i];
        if yty != 0.0 {
            for (hv, &a) in h.iter_mut().zip(alpha_grid) {
                let c = w_theta[i] * one_minus_two_pi(fit_theta, ds, i, a) * yty;
                hv.axpy(c, &ze, 1.0);
            }
        }
    }
    s_x /= n;
    s_ex /= n;
    s_xy /= n;
    for hv in &mut h {
        *hv /= n;
    }
    let s_x_inv = spd_inverse(&s_x, "S_x")?;
    let s_ex_inv = spd_inverse(&s_ex, "S_ex")?;
    Ok(NuisanceMatrices {
        s_x,
        s_ex,
        s_xy,
        h: alpha_grid.iter().copied().zip(h).collect(),
        pairing,
        s_x_inv,
        s_ex_inv,
    })
}

/// `C̃₁(xᵢ, yᵢ, α*)` for every subject.
fn c1_values(
    ds: &CaseControlDataset,
    fit_theta: &LogisticFit,
    nm: &NuisanceMatrices,
    alpha_star: f64,
) -> Result<Vec<f64>> {
    let coef = &nm.s_ex_inv * nm.h_at(alpha_star)?;
    Ok((0..ds.n())
        .map(|i| {
            let ze = z_row(ds, i, true);
            let yty = ds.y_sq()[i];
            let lead = if yty == 0.0 {
                0.0
            } else {
                one_minus_two_pi(fit_theta, ds, i, alpha_star) * yty
            };
            lead - coef.dot(&ze)
        })
        .collect())
}

fn sigma11_weights(fit_theta: &LogisticFit, fit_both: Option<&LogisticFit>, nm: &NuisanceMatrices) -> Vec<f64> {
    match (nm.pairing, fit_both) {
        (WeightPairing::GammaFree, Some(fb)) => weights(fb),
        _ => weights(fit_theta),
    }
}

/// `σ̂₁₁(a1, a2) = (1/n) Σ π̃ᵢ(1−π̃ᵢ) C̃₁(xᵢ, yᵢ, a1) C̃₁(xᵢ, yᵢ, a2)`.
pub fn sigma11_hat(
    ds: &CaseControlDataset,
    fit_theta: &LogisticFit,
    nm: &NuisanceMatrices,
    a1: f64,
    a2: f64,
) -> Result<f64> {
    if nm.pairing == WeightPairing::GammaFree {
        return Err(Error::InvalidArgument(
            "gamma-free weights need the (1, x) fit; use sigma11_matrix".into(),
        ));
    }
    let c1 = c1_values(ds, fit_theta, nm, a1)?;
    let c2 = c1_values(ds, fit_theta, nm, a2)?;
    let w = weights(fit_theta);
    Ok(symmetric_average(&w, &c1, &c2))
}

/// Average of `wᵢ aᵢ bᵢ`; the product `aᵢ bᵢ` is formed first so that
/// swapping the arguments gives a bit-identical result.
fn symmetric_average(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let n = w.len() as f64;
    w.iter()
        .zip(a.iter().zip(b))
        .map(|(&wi, (&ai, &bi))| wi * (ai * bi))
        .sum::<f64>()
        / n
}

/// Full `σ̂₁₁` matrix over the grid stored in `nm`.
pub fn sigma11_matrix(
    ds: &CaseControlDataset,
    fit_theta: &LogisticFit,
    fit_both: &LogisticFit,
    nm: &NuisanceMatrices,
) -> Result<DMatrix<f64>> {
    let grid: Vec<f64> = nm.h.iter().map(|(a, _)| *a).collect();
    let c: Vec<Vec<f64>> = grid
        .iter()
        .map(|&a| c1_values(ds, fit_theta, nm, a))
        .collect::<Result<_>>()?;
    let w = sigma11_weights(fit_theta, Some(fit_both), nm);
    let m = grid.len();
    let mut out = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..=a {
            let v = symmetric_average(&w, &c[a], &c[b]);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// `σ̂₂₂ = (1/n) Σ π̂ᵢ(1−π̂ᵢ) C̃₂(xᵢ, yᵢ)²` with `C̃₂ = yᵀ1 − S̃_xyᵀ S̃_x⁻¹ z`.
pub fn sigma22_hat(ds: &CaseControlDataset, fit_both: &LogisticFit, nm: &NuisanceMatrices) -> Result<f64> {
    let k = ds.dx() + 1;
    let coef = &nm.s_x_inv * &nm.s_xy;
    let w = weights(fit_both);
    let c2: Vec<f64> = (0..ds.n())
        .map(|i| {
            let z = z_row(ds, i, false);
            debug_assert_eq!(z.len(), k);
            ds.y_sum()[i] - coef.dot(&z)
        })
        .collect();
    Ok(symmetric_average(&w, &c2, &c2))
}

const DIAGONAL_FLOOR: f64 = 1e-12;
const PSD_SLACK: f64 = 1e-8;

/// Correlation matrix of the standardized `U₁` scores.
///
/// Entries are clamped to `[−1, 1]`. A smallest eigenvalue in `(−1e-8, 0)`
/// is floored at zero and the result renormalized to unit diagonal; anything
/// more negative is an error. Returns the matrix, the smallest eigenvalue
/// before repair, and whether a repair happened.
pub fn sigma_s(sigma11: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64, bool)> {
    let m = sigma11.nrows();
    if m == 0 || sigma11.ncols() != m {
        return Err(Error::DimensionMismatch("sigma11 must be square and non-empty".into()));
    }
    for i in 0..m {
        if !(sigma11[(i, i)] > DIAGONAL_FLOOR) {
            return Err(Error::DegenerateScore(format!(
                "sigma11 diagonal entry {i} is {:.3e}",
                sigma11[(i, i)]
            )));
        }
    }
    let mut corr = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            1.0
        } else {
            (sigma11[(i, j)] / (sigma11[(i, i)] * sigma11[(j, j)]).sqrt()).clamp(-1.0, 1.0)
        }
    });
    let eig = SymmetricEigen::new(corr.clone());
    let min_eig = eig.eigenvalues.min();
    if min_eig >= 0.0 {
        return Ok((corr, min_eig, false));
    }
    if min_eig <= -PSD_SLACK {
        return Err(Error::NotPsd(min_eig));
    }
    let floored = eig.eigenvalues.map(|v| v.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose();
    corr = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            1.0
        } else {
            (rebuilt[(i, j)] / (rebuilt[(i, i)] * rebuilt[(j, j)]).sqrt()).clamp(-1.0, 1.0)
        }
    });
    Ok((corr, min_eig, true))
}

/// `σ̂₁₁` over the bundle's grid and `σ̂₂₂`.
pub fn variance_bundle(
    ds: &CaseControlDataset,
    scores: &ScoreBundle,
    pairing: WeightPairing,
) -> Result<VarianceBundle> {
    let nm = nuisance_matrices_with(ds, &scores.fit_theta, &scores.fit_both, &scores.alpha_grid, pairing)?;
    let sigma11 = sigma11_matrix(ds, &scores.fit_theta, &scores.fit_both, &nm)?;
    let sigma22 = sigma22_hat(ds, &scores.fit_both, &nm)?;
    Ok(VarianceBundle { sigma11, sigma22 })
}
