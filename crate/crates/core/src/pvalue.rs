//! Tail probabilities for the score statistics: χ² survival functions and
//! their mixtures, multivariate normal rectangle probabilities, and the
//! convolution integral behind the SS-MAX limit `Z₀² + max(Zᵢ⁺)²`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

pub const DEFAULT_QUAD_NODES: usize = 96;
const BOUND_CUTOFF: f64 = 8.5;
const DUPLICATE_RHO: f64 = 1.0 - 1e-10;
const PIVOT_EPS: f64 = 1e-10;
const PSD_SLACK: f64 = 1e-8;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
    }
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P(χ²_k > t)` for `k ∈ {1, 2}`.
pub fn chi2_sf(t: f64, k: u32) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("chi-square argument {t} must be >= 0")));
    }
    match k {
        1 => Ok(erfc((0.5 * t).sqrt())),
        2 => Ok((-0.5 * t).exp()),
        _ => Err(Error::InvalidArgument(format!("unsupported chi-square degrees of freedom {k}"))),
    }
}

/// Survival function of `0.5χ²₀ + 0.5χ²₁`, with value 1 at `t = 0`.
pub fn rs_mixture_sf(t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    Ok(0.5 * chi2_sf(t, 1)?)
}

/// Survival function of `0.5χ²₁ + 0.5χ²₂`.
pub fn ss_mixture_sf(t: f64) -> Result<f64> {
    Ok(0.5 * chi2_sf(t, 1)? + 0.5 * chi2_sf(t, 2)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvnConfig {
    pub target_abs_error: f64,
    /// Budget of integrand evaluations summed over all randomizations.
    pub max_points: usize,
    pub randomizations: usize,
    pub seed: u64,
}

impl Default for MvnConfig {
    fn default() -> Self {
        Self {
            target_abs_error: 1e-5,
            max_points: 1 << 17,
            randomizations: 12,
            seed: 0x5eed_0f_4d56,
        }
    }
}

impl MvnConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_abs_error > 0.0) {
            return Err(Error::InvalidArgument("target_abs_error must be > 0".into()));
        }
        if self.randomizations < 2 {
            return Err(Error::InvalidArgument("randomizations must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvnResult {
    pub prob: f64,
    /// Three standard errors across randomizations.
    pub abs_error_estimate: f64,
}

impl MvnResult {
    fn exact(prob: f64) -> Self {
        Self { prob, abs_error_estimate: 0.0 }
    }

    fn complement(self) -> Self {
        Self {
            prob: (1.0 - self.prob).clamp(0.0, 1.0),
            abs_error_estimate: self.abs_error_estimate,
        }
    }
}

/// Checks that `corr` is a correlation matrix: square, symmetric, unit
/// diagonal, entries in `[−1, 1]`, and PSD up to `−1e-8`.
pub fn validate_correlation(corr: &DMatrix<f64>) -> Result<()> {
    let m = corr.nrows();
    if m == 0 || corr.ncols() != m {
        return Err(Error::InvalidCorrelation(format!(
            "expected a non-empty square matrix, got {}x{}",
            corr.nrows(),
            corr.ncols()
        )));
    }
    if corr.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCorrelation("non-finite entry".into()));
    }
    for i in 0..m {
        if (corr[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCorrelation(format!("diagonal entry {i} is {}", corr[(i, i)])));
        }
        for j in 0..i {
            if (corr[(i, j)] - corr[(j, i)]).abs() > 1e-10 {
                return Err(Error::InvalidCorrelation(format!("not symmetric at ({i}, {j})")));
            }
            if corr[(i, j)].abs() > 1.0 + 1e-12 {
                return Err(Error::InvalidCorrelation(format!("entry ({i}, {j}) outside [-1, 1]")));
            }
        }
    }
    let min = SymmetricEigen::new(corr.clone()).eigenvalues.min();
    if min < -PSD_SLACK {
        return Err(Error::InvalidCorrelation(format!(
            "not positive semidefinite (smallest eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

/// Rectangle `lower < Z ≤ upper` after dropping and merging coordinates.
struct Reduced {
    lower: Vec<f64>,
    upper: Vec<f64>,
    corr: DMatrix<f64>,
}

/// Drops coordinates with an upper bound beyond the cutoff and merges exact
/// (anti)duplicates. Returns `None` when the probability is zero.
fn reduce(upper: &[f64], corr: &DMatrix<f64>) -> Option<Reduced> {
    if upper.iter().any(|&b| b <= -BOUND_CUTOFF) {
        return None;
    }
    let keep: Vec<usize> = (0..upper.len()).filter(|&i| upper[i] < BOUND_CUTOFF).collect();
    // Each kept coordinate is folded into an earlier representative when the
    // correlation is ±1 to working precision.
    let mut reps: Vec<usize> = Vec::new();
    let mut lower: Vec<f64> = Vec::new();
    let mut up: Vec<f64> = Vec::new();
    for &i in &keep {
        let mut merged = false;
        for (r, &j) in reps.iter().enumerate() {
            let rho = corr[(i, j)];
            if rho >= DUPLICATE_RHO {
                up[r] = up[r].min(upper[i]);
                merged = true;
                break;
            }
            if rho <= -DUPLICATE_RHO {
                lower[r] = lower[r].max(-upper[i]);
                merged = true;
                break;
            }
        }
        if !merged {
            reps.push(i);
            lower.push(f64::NEG_INFINITY);
            up.push(upper[i]);
        }
    }
    if lower.iter().zip(&up).any(|(l, u)| l >= u) {
        return None;
    }
    let k = reps.len();
    let sub = DMatrix::from_fn(k, k, |a, b| if a == b { 1.0 } else { corr[(reps[a], reps[b])] });
    Some(Reduced { lower, upper: up, corr: sub })
}

/// Cholesky factor with variable reordering, plus the permuted bounds.
struct Ordered {
    l: DMatrix<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// `false` when the pivot is degenerate and the row is an indicator.
    regular: Vec<bool>,
    /// Conditional standard deviations and correlation of the last two
    /// variables, which are then integrated in closed form.
    tail: Option<(f64, f64, f64)>,
}

fn truncated_mean(a: f64, b: f64) -> f64 {
    let pa = norm_cdf(a);
    let pb = norm_cdf(b);
    let mass = pb - pa;
    let da = if a.is_finite() { norm_pdf(a) } else { 0.0 };
    let db = if b.is_finite() { norm_pdf(b) } else { 0.0 };
    if mass > 1e-300 {
        (da - db) / mass
    } else if b.is_finite() && !a.is_finite() {
        b
    } else if a.is_finite() && !b.is_finite() {
        a
    } else {
        0.5 * (a + b)
    }
}

fn order_and_factor(red: Reduced) -> Ordered {
    let Reduced { mut lower, mut upper, corr } = red;
    let m = lower.len();
    let mut c = corr;
    let mut l = DMatrix::<f64>::zeros(m, m);
    let mut y = vec![0.0; m];
    let mut regular = vec![true; m];
    for i in 0..m {
        let mut best = i;
        let mut best_p = f64::INFINITY;
        for j in i..m {
            let mut s = 0.0;
            let mut v = c[(j, j)];
            for k in 0..i {
                s += l[(j, k)] * y[k];
                v -= l[(j, k)] * l[(j, k)];
            }
            let p = if v > PIVOT_EPS * PIVOT_EPS {
                let sd = v.sqrt();
                norm_cdf((upper[j] - s) / sd) - norm_cdf((lower[j] - s) / sd)
            } else {
                2.0
            };
            if p < best_p {
                best_p = p;
                best = j;
            }
        }
        if best != i {
            c.swap_rows(i, best);
            c.swap_columns(i, best);
            l.swap_rows(i, best);
            lower.swap(i, best);
            upper.swap(i, best);
        }
        let mut v = c[(i, i)];
        for k in 0..i {
            v -= l[(i, k)] * l[(i, k)];
        }
        if v > PIVOT_EPS * PIVOT_EPS {
            let d = v.sqrt();
            l[(i, i)] = d;
            for r in i + 1..m {
                let mut s = c[(r, i)];
                for k in 0..i {
                    s -= l[(r, k)] * l[(i, k)];
                }
                l[(r, i)] = s / d;
            }
            let mut s = 0.0;
            for k in 0..i {
                s += l[(i, k)] * y[k];
            }
            y[i] = truncated_mean((lower[i] - s) / d, (upper[i] - s) / d);
        } else {
            regular[i] = false;
        }
    }
    let tail = (m >= 2 && regular[m - 2]).then(|| {
        let sa = l[(m - 2, m - 2)];
        let lb = l[(m - 1, m - 2)];
        let sb = (lb * lb + l[(m - 1, m - 1)].powi(2)).sqrt();
        (sa, sb, (lb / sb).clamp(-1.0, 1.0))
    });
    let tail = tail.filter(|&(_, sb, _)| sb > PIVOT_EPS);
    Ordered { l, lower, upper, regular, tail }
}

impl Ordered {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Number of sampled coordinates.
    fn sampled(&self) -> usize {
        if self.tail.is_some() {
            self.dim() - 2
        } else {
            self.dim() - 1
        }
    }

    /// Sequential-conditioning integrand at `w ∈ [0,1]^{sampled}`.
    fn integrand(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let m = self.dim();
        let stop = if self.tail.is_some() { m - 2 } else { m };
        let mut f = 1.0;
        for i in 0..stop {
            let mut s = 0.0;
            for k in 0..i {
                s += self.l[(i, k)] * y[k];
            }
            if !self.regular[i] {
                if s <= self.lower[i] || s > self.upper[i] {
                    return 0.0;
                }
                y[i] = 0.0;
                continue;
            }
            let d = self.l[(i, i)];
            let a = norm_cdf((self.lower[i] - s) / d);
            let b = norm_cdf((self.upper[i] - s) / d);
            let mass = b - a;
            if mass <= 0.0 {
                return 0.0;
            }
            f *= mass;
            if i + 1 < m && i < w.len() {
                y[i] = norm_quantile((a + w[i] * mass).clamp(1e-300, 1.0 - 1e-16));
            }
        }
        if let Some((sa, sb, r)) = self.tail {
            let (ia, ib) = (m - 2, m - 1);
            let (mut ma, mut mb) = (0.0, 0.0);
            for k in 0..ia {
                ma += self.l[(ia, k)] * y[k];
                mb += self.l[(ib, k)] * y[k];
            }
            f *= bvn_rectangle(
                (self.lower[ia] - ma) / sa,
                (self.upper[ia] - ma) / sa,
                (self.lower[ib] - mb) / sb,
                (self.upper[ib] - mb) / sb,
                r,
            );
        }
        f
    }
}

fn legendre_half(n: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<[Vec<(f64, f64)>; 3]> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        [6, 12, 20].map(|k| GaussLegendre::new(NonZeroUsize::new(k).unwrap()).as_node_weight_pairs().to_vec())
    });
    match n {
        6 => &rules[0],
        12 => &rules[1],
        _ => &rules[2],
    }
}

/// `P(X > h, Y > k)` for a standard bivariate normal with correlation `r`,
/// by Genz's refinement of the Drezner–Wesolowsky method (double precision
/// accuracy for all `r`).
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    use std::f64::consts::PI;
    let rule = legendre_half(if r.abs() < 0.3 {
        6
    } else if r.abs() < 0.75 {
        12
    } else {
        20
    });
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        for &(x, w) in rule {
            let sn = (0.5 * asr * (1.0 + x)).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        return (bvn * asr / (4.0 * PI) + norm_cdf(-h) * norm_cdf(-k)).clamp(0.0, 1.0);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let bs = (h - k).powi(2);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -0.5 * (bs / a_s + hk);
        if asr > -100.0 {
            bvn = a * asr.exp() * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if -hk < 100.0 {
            let b = bs.sqrt();
            bvn -= (-0.5 * hk).exp()
                * (2.0 * PI).sqrt()
                * norm_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a *= 0.5;
        for &(x, w) in rule {
            let xs = (a * (x + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            let asr = -0.5 * (bs / xs + hk);
            if asr > -100.0 {
                bvn += a * w * asr.exp() * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
        bvn = -bvn / (2.0 * PI);
    }
    if r > 0.0 {
        bvn += norm_cdf(-h.max(k));
    } else {
        bvn = -bvn;
        if k > h {
            bvn += if h < 0.0 { norm_cdf(k) - norm_cdf(h) } else { norm_cdf(-h) - norm_cdf(-k) };
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// `P(X ≤ x, Y ≤ y)`, allowing infinite arguments.
fn bvn_lower(x: f64, y: f64, r: f64) -> f64 {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        0.0
    } else if x == f64::INFINITY {
        norm_cdf(y)
    } else if y == f64::INFINITY {
        norm_cdf(x)
    } else {
        bvn_upper(-x, -y, r)
    }
}

/// `P(a1 < X ≤ b1, a2 < Y ≤ b2)`.
pub fn bvn_rectangle(a1: f64, b1: f64, a2: f64, b2: f64, r: f64) -> f64 {
    if a1 >= b1 || a2 >= b2 {
        return 0.0;
    }
    let mut p = bvn_lower(b1, b2, r);
    if a1 > f64::NEG_INFINITY {
        p -= bvn_lower(a1, b2, r);
    }
    if a2 > f64::NEG_INFINITY {
        p -= bvn_lower(b1, a2, r);
        if a1 > f64::NEG_INFINITY {
            p += bvn_lower(a1, a2, r);
        }
    }
    p.clamp(0.0, 1.0)
}

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

fn next_prime(mut n: usize) -> usize {
    while !is_prime(n) {
        n += 1;
    }
    n
}

/// Lattice sizes: primes growing by a factor of about 1.5 from 31.
fn lattice_sizes() -> impl Iterator<Item = usize> {
    std::iter::successors(Some(31usize), |&n| Some(next_prime(n + n / 2)))
}

/// `P₂` figure of merit of the Korobov lattice `(1, a, a², …) mod n`; smaller is better.
fn korobov_p2(n: usize, a: usize, dims: usize) -> f64 {
    let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    let mut z = vec![1usize; dims];
    for j in 1..dims {
        z[j] = z[j - 1] * a % n;
    }
    let mut total = 0.0;
    for k in 0..n {
        let mut prod = 1.0;
        for &zj in &z {
            let x = (k * zj % n) as f64 / n as f64;
            prod *= 1.0 + two_pi_sq * (x * x - x + 1.0 / 6.0);
        }
        total += prod;
    }
    total / n as f64 - 1.0
}

const KOROBOV_CANDIDATES: usize = 240;

/// Generating vector of a good Korobov rule with `n` points in `dims`
/// dimensions, memoized across calls.
fn korobov_vector(n: usize, dims: usize) -> Vec<usize> {
    use std::collections::HashMap;
    use std::sync::Mutex;
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Vec<usize>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&(n, dims)) {
        return v.clone();
    }
    let z = if dims == 1 {
        vec![1]
    } else {
        let half = n / 2;
        let candidates: Vec<usize> = if half - 1 <= KOROBOV_CANDIDATES {
            (2..=half).collect()
        } else {
            (0..KOROBOV_CANDIDATES).map(|i| 2 + i * (half - 2) / KOROBOV_CANDIDATES).collect()
        };
        let best = candidates
            .into_iter()
            .map(|a| (korobov_p2(n, a, dims), a))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .map(|(_, a)| a)
            .unwrap();
        let mut z = vec![1usize; dims];
        for j in 1..dims {
            z[j] = z[j - 1] * best % n;
        }
        z
    };
    cache.lock().unwrap().insert((n, dims), z.clone());
    z
}

/// `P(Z ≤ upper)` for `Z ~ N(0, corr)`.
///
/// Randomly shifted Korobov lattice rules with baker transform and
/// antithetic pairs in the Genz sequential-conditioning parametrization. The last two variables
/// are integrated with the bivariate normal kernel, so `m = 2` is computed
/// directly and `m = 3` is a one-dimensional integral. The lattice size grows
/// until three standard errors across randomizations fall below the target or
/// the next size would exceed the evaluation budget.
pub fn mvn_cdf(upper: &[f64], corr: &DMatrix<f64>, cfg: &MvnConfig) -> Result<MvnResult> {
    cfg.validate()?;
    validate_correlation(corr)?;
    if upper.len() != corr.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} bounds for a {}x{} correlation matrix",
            upper.len(),
            corr.nrows(),
            corr.ncols()
        )));
    }
    if upper.iter().any(|b| b.is_nan()) {
        return Err(Error::NonFinite("mvn bounds"));
    }
    let Some(red) = reduce(upper, corr) else {
        return Ok(MvnResult::exact(0.0));
    };
    match red.lower.len() {
        0 => return Ok(MvnResult::exact(1.0)),
        1 => return Ok(MvnResult::exact(norm_cdf(red.upper[0]) - norm_cdf(red.lower[0]))),
        _ => {}
    }
    let ord = order_and_factor(red);
    let m = ord.dim();
    let dims = ord.sampled();
    let mut y = vec![0.0; m];
    if dims == 0 {
        return Ok(MvnResult::exact(ord.integrand(&[], &mut y).clamp(0.0, 1.0)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let reps = cfg.randomizations;
    let mut w = vec![0.0; dims];
    let mut wa = vec![0.0; dims];
    let mut shift = vec![0.0; dims];
    let mut used = 0usize;
    // Estimates from successive lattice sizes, combined by inverse variance.
    let (mut est, mut var) = (0.0, f64::INFINITY);
    for n in lattice_sizes() {
        let z = korobov_vector(n, dims);
        let mut means = Vec::with_capacity(reps);
        for _ in 0..reps {
            for sj in shift.iter_mut() {
                *sj = rng.random::<f64>();
            }
            let mut acc = 0.0;
            for k in 0..n {
                for j in 0..dims {
                    let u = ((k * z[j] % n) as f64 / n as f64 + shift[j]).fract();
                    w[j] = (2.0 * u - 1.0).abs();
                    wa[j] = 1.0 - w[j];
                }
                acc += 0.5 * (ord.integrand(&w, &mut y) + ord.integrand(&wa, &mut y));
            }
            means.push(acc / n as f64);
        }
        used += 2 * n * reps;
        let mean = means.iter().sum::<f64>() / reps as f64;
        let v = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / ((reps - 1) * reps) as f64;
        if var.is_infinite() {
            (est, var) = (mean, v);
        } else if v + var > 0.0 {
            let wt = var / (var + v);
            est += wt * (mean - est);
            var *= 1.0 - wt;
        } else {
            est = mean;
        }
        let err = 3.0 * var.sqrt();
        let next_cost = 2 * next_prime(n + n / 2) * reps;
        if err <= cfg.target_abs_error || used + next_cost > cfg.max_points {
            return Ok(MvnResult {
                prob: est.clamp(0.0, 1.0),
                abs_error_estimate: err,
            });
        }
    }
    unreachable!("lattice size sequence is infinite")
}

/// `P(max_i (Zᵢ⁺)² > t)` with `Z ~ N(0, Σ_s)`; the RS-MAX tail.
pub fn rsmax_sf(t: f64, sigma_s: &DMatrix<f64>, cfg: &MvnConfig) -> Result<MvnResult> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("statistic {t} must be >= 0")));
    }
    if t == 0.0 {
        validate_correlation(sigma_s)?;
        return Ok(MvnResult::exact(1.0));
    }
    let b = vec![t.sqrt(); sigma_s.nrows()];
    Ok(mvn_cdf(&b, sigma_s, cfg)?.complement())
}

fn legendre_nodes(count: usize) -> Result<Vec<(f64, f64)>> {
    static DEFAULT: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let build = |n: usize| GaussLegendre::new(NonZeroUsize::new(n).unwrap()).as_node_weight_pairs().to_vec();
    match count {
        0 => Err(Error::InvalidArgument("quadrature needs at least one node".into())),
        DEFAULT_QUAD_NODES => Ok(DEFAULT.get_or_init(|| build(DEFAULT_QUAD_NODES)).clone()),
        n => Ok(build(n)),
    }
}

/// SplitMix64 finalizer, used to derive per-node seeds.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `P(Z₀² + max_i (Zᵢ⁺)² > t)` with `Z₀` independent of `Z ~ N(0, Σ_s)`, as
/// `1 − 2∫₀^√t F(√(t−v²)·1, Σ_s) φ(v) dv` by Gauss–Legendre quadrature.
///
/// Each node's rectangle probability uses its own derived seed; the reported
/// error combines the node errors in quadrature, and node tolerances are set
/// so that the combined error meets `cfg.target_abs_error`.
pub fn ssmax_sf(t: f64, sigma_s: &DMatrix<f64>, cfg: &MvnConfig, quad_nodes: usize) -> Result<MvnResult> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("statistic {t} must be >= 0")));
    }
    validate_correlation(sigma_s)?;
    if t == 0.0 {
        return Ok(MvnResult::exact(1.0));
    }
    let nodes = legendre_nodes(quad_nodes)?;
    let m = sigma_s.nrows();
    let half = 0.5 * t.sqrt();
    let scales: Vec<f64> = nodes
        .iter()
        .map(|&(x, wt)| 2.0 * half * wt * norm_pdf(half * (x + 1.0)))
        .collect();
    // Node errors are independent, so each node gets an equal share of the
    // squared error budget.
    let share = cfg.target_abs_error / (nodes.len() as f64).sqrt();
    let mut integral = 0.0;
    let mut var = 0.0;
    for (idx, (&(x, _), &scale)) in nodes.iter().zip(&scales).enumerate() {
        let v = half * (x + 1.0);
        let bound = (t - v * v).max(0.0).sqrt();
        let node_cfg = MvnConfig {
            seed: mix_seed(cfg.seed, idx as u64),
            target_abs_error: (share / scale).max(cfg.target_abs_error),
            ..*cfg
        };
        let f = mvn_cdf(&vec![bound; m], sigma_s, &node_cfg)?;
        integral += scale * f.prob;
        var += (scale * f.abs_error_estimate).powi(2);
    }
    Ok(MvnResult {
        prob: (1.0 - integral).clamp(0.0, 1.0),
        abs_error_estimate: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn equicorr(m: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { rho })
    }

    /// Φ by composite Simpson integration of the density, independent of erfc.
    fn simpson_cdf(x: f64) -> f64 {
        if x < 0.0 {
            return 1.0 - simpson_cdf(-x);
        }
        let n = 20_000;
        let h = x / n as f64;
        let mut s = norm_pdf(0.0) + norm_pdf(x);
        for i in 1..n {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += c * norm_pdf(i as f64 * h);
        }
        0.5 + s * h / 3.0
    }

    #[test]
    fn chi2_values() {
        assert_eq!(chi2_sf(0.0, 1).unwrap(), 1.0);
        let t: f64 = 3.841459;
        let oracle = 2.0 * (1.0 - simpson_cdf(t.sqrt()));
        assert!((chi2_sf(t, 1).unwrap() - oracle).abs() < 1e-9);
        assert!((chi2_sf(t, 1).unwrap() - 0.05).abs() < 1e-5);
        // 5.991465 is 2·ln 20 rounded to six decimals.
        assert!((chi2_sf(2.0 * 20f64.ln(), 2).unwrap() - 0.05).abs() < 1e-15);
        assert!((chi2_sf(5.991465, 2).unwrap() - 0.05).abs() < 2e-8);
        assert!(chi2_sf(1.0, 3).is_err());
        assert!(chi2_sf(-1.0, 1).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-5, 0.025, 0.3, 0.5, 0.9, 0.999] {
            assert!((norm_cdf(norm_quantile(p)) - p).abs() < 1e-10 * p, "{p}");
        }
    }

    /// `P(X ≤ x, Y ≤ y) = ∫_{−∞}^{x} φ(u) Φ((y − ru)/√(1−r²)) du` by Simpson's rule.
    fn bvn_oracle(x: f64, y: f64, r: f64) -> f64 {
        let lo = -12.0f64;
        let n = 40_000;
        let h = (x - lo) / n as f64;
        let g = |u: f64| norm_pdf(u) * norm_cdf((y - r * u) / (1.0 - r * r).sqrt());
        let mut s = g(lo) + g(x);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(lo + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn bvn_matches_quadrature_oracle() {
        for &r in &[-0.97, -0.6, -0.2, 0.0, 0.1, 0.5, 0.8, 0.95, 0.9999] {
            for &(x, y) in &[(0.0, 0.0), (1.2, -0.4), (-1.5, -2.0), (2.5, 1.0), (-0.3, 3.0)] {
                let got = bvn_lower(x, y, r);
                let want = bvn_oracle(x, y, r);
                assert!((got - want).abs() < 1e-9, "r={r} x={x} y={y}: {got} vs {want}");
            }
        }
        for &r in &[-0.9f64, 0.3, 0.99] {
            let orth = 0.25 + r.asin() / (2.0 * std::f64::consts::PI);
            assert!((bvn_lower(0.0, 0.0, r) - orth).abs() < 1e-14);
        }
        assert!((bvn_lower(0.7, 0.2, 1.0) - norm_cdf(0.2)).abs() < 1e-14);
        assert!((bvn_lower(0.7, 0.2, -1.0) - (norm_cdf(0.7) - norm_cdf(-0.2))).abs() < 1e-14);
        let rect = bvn_rectangle(-0.5, 1.0, -1.0, 0.3, 0.4);
        let want = bvn_oracle(1.0, 0.3, 0.4) - bvn_oracle(-0.5, 0.3, 0.4) - bvn_oracle(1.0, -1.0, 0.4)
            + bvn_oracle(-0.5, -1.0, 0.4);
        assert!((rect - want).abs() < 1e-9);
    }

    #[test]
    fn near_duplicate_pair_converges() {
        let c = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.999874, 0.957128, 0.202722, 0.999874, 1.0, 0.961477, 0.211730, 0.957128, 0.961477, 1.0,
                0.391223, 0.202722, 0.211730, 0.391223, 1.0,
            ],
        );
        let cfg = MvnConfig::default();
        for &b in &[0.5, 1.0, 2.0] {
            let r = mvn_cdf(&[b; 4], &c, &cfg).unwrap();
            assert!(r.abs_error_estimate <= cfg.target_abs_error, "{b}: {r:?}");
        }
    }

    #[test]
    fn mvn_small_cases() {
        let cfg = MvnConfig::default();
        let one = mvn_cdf(&[0.0], &DMatrix::identity(1, 1), &cfg).unwrap();
        assert_eq!(one.prob, 0.5);
        let three = mvn_cdf(&[0.0; 3], &DMatrix::identity(3, 3), &cfg).unwrap();
        assert!((three.prob - 0.125).abs() < 2e-5);
        let bi = mvn_cdf(&[0.0, 0.0], &equicorr(2, 0.5), &cfg).unwrap();
        let exact = 0.25 + 0.5f64.asin() / (2.0 * std::f64::consts::PI);
        assert!((bi.prob - exact).abs() < 2e-5, "{bi:?}");
    }

    #[test]
    fn mvn_bounds_handling() {
        let cfg = MvnConfig::default();
        let c = equicorr(3, 0.3);
        assert_eq!(mvn_cdf(&[1.0, -9.0, 0.0], &c, &cfg).unwrap().prob, 0.0);
        assert_eq!(mvn_cdf(&[9.0, 9.0, 9.0], &c, &cfg).unwrap().prob, 1.0);
        let r = mvn_cdf(&[0.7, 9.0, 9.0], &c, &cfg).unwrap();
        assert!((r.prob - norm_cdf(0.7)).abs() < 1e-15);
        assert!(mvn_cdf(&[0.0, 0.0], &c, &cfg).is_err());
        assert!(mvn_cdf(&[f64::NAN, 0.0, 0.0], &c, &cfg).is_err());
    }

    #[test]
    fn mvn_duplicates_and_antiduplicates() {
        let cfg = MvnConfig::default();
        let dup = equicorr(3, 1.0);
        let r = mvn_cdf(&[0.3, -0.2, 1.0], &dup, &cfg).unwrap();
        assert!((r.prob - norm_cdf(-0.2)).abs() < 1e-15);
        let anti = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let r = mvn_cdf(&[1.0, 0.5], &anti, &cfg).unwrap();
        assert!((r.prob - (norm_cdf(1.0) - norm_cdf(-0.5))).abs() < 1e-15);
        assert_eq!(mvn_cdf(&[-1.0, 0.5], &anti, &cfg).unwrap().prob, 0.0);
    }

    #[test]
    fn mvn_singular_rank_two_in_three() {
        // Z3 = (Z1 + Z2)/√2 with Z1, Z2 independent.
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, r, 0.0, 1.0, r, r, r, 1.0]);
        let got = mvn_cdf(&[0.0, 0.0, 0.0], &c, &MvnConfig::default()).unwrap();
        // Z3 ≤ 0 is implied by Z1 ≤ 0 and Z2 ≤ 0.
        assert!((got.prob - 0.25).abs() < 2e-5, "{got:?}");
    }

    #[test]
    fn mvn_rejects_non_psd() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(matches!(
            mvn_cdf(&[0.0; 3], &c, &MvnConfig::default()),
            Err(Error::InvalidCorrelation(_))
        ));
        let bad_diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!(mvn_cdf(&[0.0; 2], &bad_diag, &MvnConfig::default()).is_err());
    }

    #[test]
    fn mvn_is_reproducible() {
        let cfg = MvnConfig::default().with_seed(99);
        let c = equicorr(5, 0.6);
        let a = mvn_cdf(&[0.1, 0.4, -0.3, 1.2, 0.0], &c, &cfg).unwrap();
        let b = mvn_cdf(&[0.1, 0.4, -0.3, 1.2, 0.0], &c, &cfg).unwrap();
        assert_eq!(a.prob.to_bits(), b.prob.to_bits());
        assert_eq!(a.abs_error_estimate.to_bits(), b.abs_error_estimate.to_bits());
    }

    #[test]
    fn mvn_identity_products() {
        let cfg = MvnConfig::default();
        let b = [0.3, -0.5, 1.1, 0.0, 2.0];
        for m in 1..=5 {
            let got = mvn_cdf(&b[..m], &DMatrix::identity(m, m), &cfg).unwrap();
            let exact: f64 = b[..m].iter().map(|&x| norm_cdf(x)).product();
            assert!((got.prob - exact).abs() < 2e-5, "m={m}: {got:?} vs {exact}");
        }
    }

    #[test]
    fn equicorrelated_orthant_matches_one_dimensional_integral() {
        // P(all Zᵢ ≤ 0) = ∫ Φ(√ρ u/√(1−ρ))^m φ(u) du for equicorrelation ρ ≥ 0.
        let (m, rho) = (4usize, 0.5f64);
        let n = 4000;
        let (lo, hi) = (-10.0f64, 10.0f64);
        let h = (hi - lo) / n as f64;
        let g = |u: f64| norm_cdf(rho.sqrt() * u / (1.0 - rho).sqrt()).powi(m as i32) * norm_pdf(u);
        let mut s = g(lo) + g(hi);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(lo + i as f64 * h);
        }
        let exact = s * h / 3.0;
        let got = mvn_cdf(&[0.0; 4], &equicorr(m, rho), &MvnConfig::default()).unwrap();
        assert!((got.prob - exact).abs() < 2e-5, "{got:?} vs {exact}");
    }

    #[test]
    fn rsmax_reductions() {
        let cfg = MvnConfig::default();
        assert_eq!(rsmax_sf(0.0, &equicorr(3, 0.4), &cfg).unwrap().prob, 1.0);
        for &t in &[0.5, 2.0, 3.841459, 9.0] {
            let got = rsmax_sf(t, &DMatrix::identity(1, 1), &cfg).unwrap().prob;
            assert!((got - 0.5 * chi2_sf(t, 1).unwrap()).abs() < 1e-12);
        }
        let two = rsmax_sf(3.841459, &DMatrix::identity(2, 2), &cfg).unwrap();
        assert!((two.prob - 0.049375).abs() < 5e-5, "{two:?}");
    }

    #[test]
    fn ssmax_one_dimension_is_mixture() {
        let cfg = MvnConfig::default();
        assert_eq!(ssmax_sf(0.0, &DMatrix::identity(1, 1), &cfg, 96).unwrap().prob, 1.0);
        for &t in &[0.3, 1.0, 3.0, 7.236, 12.0] {
            let got = ssmax_sf(t, &DMatrix::identity(1, 1), &cfg, 96).unwrap().prob;
            assert!((got - ss_mixture_sf(t).unwrap()).abs() < 5e-4, "t={t}: {got}");
        }
    }

    #[test]
    fn tails_are_monotone() {
        let cfg = MvnConfig::default();
        let c = equicorr(3, 0.8);
        let mut last_rs = 1.0;
        let mut last_ss = 1.0;
        for i in 0..12 {
            let t = 0.5 + i as f64;
            let rs = rsmax_sf(t, &c, &cfg).unwrap();
            let ss = ssmax_sf(t, &c, &cfg, 32).unwrap();
            assert!(rs.prob <= last_rs + rs.abs_error_estimate);
            assert!(ss.prob <= last_ss + ss.abs_error_estimate);
            assert!((0.0..=1.0).contains(&rs.prob) && (0.0..=1.0).contains(&ss.prob));
            last_rs = rs.prob;
            last_ss = ss.prob;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn mvn_monotone_in_each_bound(
            b in proptest::collection::vec(-2.0f64..2.0, 3),
            bump in 0.05f64..1.5,
            idx in 0usize..3,
            rho in -0.3f64..0.9,
        ) {
            let c = equicorr(3, rho);
            let cfg = MvnConfig::default();
            let lo = mvn_cdf(&b, &c, &cfg).unwrap();
            let mut b2 = b.clone();
            b2[idx] += bump;
            let hi = mvn_cdf(&b2, &c, &cfg).unwrap();
            prop_assert!(hi.prob + hi.abs_error_estimate + lo.abs_error_estimate >= lo.prob);
        }

        #[test]
        fn mvn_identity_is_product(b in proptest::collection::vec(-2.5f64..2.5, 2..5)) {
            let m = b.len();
            let got = mvn_cdf(&b, &DMatrix::identity(m, m), &MvnConfig::default()).unwrap();
            let exact: f64 = b.iter().map(|&x| norm_cdf(x)).product();
            prop_assert!((got.prob - exact).abs() <= got.abs_error_estimate.max(2e-5));
        }
    }
}
