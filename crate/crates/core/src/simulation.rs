//! Case-control data from the random-effect logistic model by quota
//! sampling, and rejection-rate estimation over replicated datasets.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CaseControlDataset, PrevalenceSpec};
use crate::error::{Error, Result};
use crate::logistic::logistic;
use crate::procedures::{null_fits, Analysis, TestOptions};
use crate::pvalue::mix_seed;

pub const DEFAULT_DRAW_CAP: u64 = 1_000_000_000;

/// Law of the components of the random effect `v`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomEffectLaw {
    #[default]
    StandardNormal,
    /// `N(0, 2)` components, the scaling under which the score is derived.
    Variance2,
}

impl RandomEffectLaw {
    fn variance(self) -> f64 {
        match self {
            RandomEffectLaw::StandardNormal => 1.0,
            RandomEffectLaw::Variance2 => 2.0,
        }
    }
}

/// Population model `pr(D=1|x,y,v) = π(α_p + xᵀβ + yᵀγ + √θ·yᵀv)` with
/// `x₁ ~ Bernoulli(0.5)`, `x₂ ~ N(1, 1)` and `y_j ~ Binomial(2, MAF_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub label: String,
    pub k: Option<usize>,
    pub alpha_p: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sqrt_theta: f64,
    pub mafs: Vec<f64>,
    pub n0: usize,
    pub n1: usize,
    pub random_effect_law: RandomEffectLaw,
}

impl SimulationScenario {
    pub fn q(&self) -> usize {
        self.mafs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mafs.is_empty() {
            return Err(Error::NoGenotypes);
        }
        if let Some(m) = self.mafs.iter().find(|&&m| !(m > 0.0 && m <= 0.5)) {
            return Err(Error::InvalidArgument(format!("MAF {m} is outside (0, 0.5]")));
        }
        if self.gamma.len() != self.q() {
            return Err(Error::DimensionMismatch(format!(
                "gamma has length {}, expected q = {}",
                self.gamma.len(),
                self.q()
            )));
        }
        if self.beta.len() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "beta has length {}; the covariate model has two covariates",
                self.beta.len()
            )));
        }
        if !(self.sqrt_theta >= 0.0 && self.sqrt_theta.is_finite()) {
            return Err(Error::InvalidArgument(format!("sqrt_theta {} must be >= 0", self.sqrt_theta)));
        }
        if !self.alpha_p.is_finite() || self.beta.iter().chain(&self.gamma).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scenario coefficients"));
        }
        if self.n0 == 0 || self.n1 == 0 {
            return Err(Error::InvalidArgument("both quotas must be >= 1".into()));
        }
        Ok(())
    }
}

const Q: usize = 10;
const QUOTA: usize = 2000;

fn ones(c: f64) -> Vec<f64> {
    vec![c; Q]
}

fn gamma0(c: f64) -> Vec<f64> {
    (0..Q).map(|j| if j < Q / 2 { c } else { -c }).collect()
}

/// Preset scenarios `C1`–`C4`, `D1`–`D4` and `E1`–`E6` for `k ∈ 0..=5`.
///
/// `E5` uses `√θ = 0.9 + 0.3k` and `E6` uses `γ = −0.45k·1_q`, the values
/// printed in the headers of the table reporting them; the scenario list
/// gives `0.3 + 0.3k` and `−0.45k·γ₀` instead.
pub fn scenario_preset(name: &str, k: usize) -> Result<SimulationScenario> {
    if k > 5 {
        return Err(Error::InvalidArgument(format!("k = {k} is outside 0..=5")));
    }
    let kf = k as f64;
    let common_maf: Vec<f64> = (1..=Q).map(|j| j as f64 / (3 * Q + 1) as f64).collect();
    let rare_maf: Vec<f64> = (1..=Q).map(|j| 0.005 + 0.005 * j as f64 / Q as f64).collect();
    let upper = name.to_ascii_uppercase();
    let (alpha_p, beta, mafs) = match upper.chars().next() {
        Some('C') => (-1.0, vec![0.5, -1.0], common_maf),
        Some('D') => (-2.0, vec![-1.0, -1.0], common_maf),
        Some('E') => (-2.0, vec![-1.0, -1.0], rare_maf),
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    let (sqrt_theta, gamma) = match upper.as_str() {
        "C1" => (0.0, ones(-0.02 * kf)),
        "C2" => (0.5, ones(-0.02 * kf)),
        "C3" => (0.15 * kf, ones(0.0)),
        "C4" => (0.0, gamma0(0.05 * kf)),
        "D1" => (0.0, ones(-0.015 * kf)),
        "D2" => (0.36, ones(-0.015 * kf)),
        "D3" => (0.08 * kf, ones(0.0)),
        "D4" => (0.0, gamma0(0.05 * kf)),
        "E1" => (0.0, ones(-0.08 * kf)),
        "E2" => (0.8 + 0.3 * kf, ones(-0.25 * kf)),
        "E3" => (0.4 + 0.1 * kf, ones(0.0)),
        "E4" => (0.0, gamma0(0.2 * kf)),
        "E5" => (0.9 + 0.3 * kf, ones(-0.2 * kf)),
        "E6" => (0.6 * kf, ones(-0.45 * kf)),
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    Ok(SimulationScenario {
        label: upper,
        k: Some(k),
        alpha_p,
        beta,
        gamma,
        sqrt_theta,
        mafs,
        n0: QUOTA,
        n1: QUOTA,
        random_effect_law: RandomEffectLaw::StandardNormal,
    })
}

fn dosage<R: Rng + ?Sized>(maf: f64, rng: &mut R) -> f64 {
    (rng.random_bool(maf) as u8 + rng.random_bool(maf) as u8) as f64
}

/// `n × q` dosages, `y_j ~ Binomial(2, MAF_j)` independently.
pub fn generate_genotypes<R: Rng + ?Sized>(mafs: &[f64], n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(n, mafs.len());
    for i in 0..n {
        for (j, &m) in mafs.iter().enumerate() {
            y[(i, j)] = dosage(m, rng);
        }
    }
    y
}

#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub dataset: CaseControlDataset,
    /// Cases drawn divided by population draws.
    pub prevalence_estimate: f64,
    pub draws: u64,
}

pub fn generate_case_control<R: Rng + ?Sized>(sc: &SimulationScenario, rng: &mut R) -> Result<GeneratedSample> {
    generate_case_control_capped(sc, rng, DEFAULT_DRAW_CAP)
}

/// Draws subjects from the population until `n0` controls and `n1` cases
/// are retained.
pub fn generate_case_control_capped<R: Rng + ?Sized>(
    sc: &SimulationScenario,
    rng: &mut R,
    draw_cap: u64,
) -> Result<GeneratedSample> {
    sc.validate()?;
    let q = sc.q();
    let n = sc.n0 + sc.n1;
    let mut d = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(q * n);
    let (mut kept0, mut kept1) = (0usize, 0usize);
    let (mut draws, mut cases) = (0u64, 0u64);
    let re_sd = sc.sqrt_theta * sc.random_effect_law.variance().sqrt();
    let mut yi = vec![0.0; q];
    while kept0 < sc.n0 || kept1 < sc.n1 {
        if draws >= draw_cap {
            return Err(Error::DrawCapExceeded(draw_cap));
        }
        draws += 1;
        let x1 = rng.random_bool(0.5) as u8 as f64;
        let x2 = 1.0 + rng.sample::<f64, _>(StandardNormal);
        let mut eta = sc.alpha_p + sc.beta[0] * x1 + sc.beta[1] * x2;
        let mut yty = 0.0;
        for j in 0..q {
            yi[j] = dosage(sc.mafs[j], rng);
            eta += sc.gamma[j] * yi[j];
            yty += yi[j] * yi[j];
        }
        // yᵀv given y is N(0, var·yᵀy).
        if re_sd > 0.0 && yty > 0.0 {
            eta += re_sd * yty.sqrt() * rng.sample::<f64, _>(StandardNormal);
        }
        let case = rng.random_bool(logistic(eta));
        cases += case as u64;
        let keep = if case { kept1 < sc.n1 } else { kept0 < sc.n0 };
        if keep {
            if case {
                kept1 += 1;
            } else {
                kept0 += 1;
            }
            d.push(case as u8);
            x.push(x1);
            x.push(x2);
            y.extend_from_slice(&yi);
        }
    }
    let dataset = CaseControlDataset::new(d, DMatrix::from_row_slice(n, 2, &x), DMatrix::from_row_slice(n, q, &y))?;
    Ok(GeneratedSample {
        dataset,
        prevalence_estimate: cases as f64 / draws as f64,
        draws,
    })
}

/// Tests tallied by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SimMethod {
    #[serde(rename = "FS")]
    Fs,
    #[serde(rename = "RS(alpha_p)")]
    RsAlphaP,
    #[serde(rename = "RS(alpha_hat)")]
    RsFitted,
    #[serde(rename = "SS(alpha_p)")]
    SsAlphaP,
    #[serde(rename = "SS(alpha_hat)")]
    SsFitted,
    #[serde(rename = "RS-MAX")]
    RsMax,
    #[serde(rename = "SS-MAX")]
    SsMax,
}

impl SimMethod {
    pub const ALL: [SimMethod; 7] = [
        SimMethod::Fs,
        SimMethod::RsAlphaP,
        SimMethod::RsFitted,
        SimMethod::SsAlphaP,
        SimMethod::SsFitted,
        SimMethod::RsMax,
        SimMethod::SsMax,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SimMethod::Fs => "FS",
            SimMethod::RsAlphaP => "RS(alpha_p)",
            SimMethod::RsFitted => "RS(alpha_hat)",
            SimMethod::SsAlphaP => "SS(alpha_p)",
            SimMethod::SsFitted => "SS(alpha_hat)",
            SimMethod::RsMax => "RS-MAX",
            SimMethod::SsMax => "SS-MAX",
        }
    }
}

impl fmt::Display for SimMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SimMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        Ok(match key.as_str() {
            "fs" => SimMethod::Fs,
            "rsalphap" | "rsp" => SimMethod::RsAlphaP,
            "rsalphahat" | "rshat" | "rsfitted" => SimMethod::RsFitted,
            "ssalphap" | "ssp" => SimMethod::SsAlphaP,
            "ssalphahat" | "sshat" | "ssfitted" => SimMethod::SsFitted,
            "rsmax" => SimMethod::RsMax,
            "ssmax" => SimMethod::SsMax,
            _ => return Err(Error::InvalidArgument(format!("unknown simulation method {s:?}"))),
        })
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<SimMethod>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(SimMethod::ALL.to_vec());
    }
    let mut out: Vec<SimMethod> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: SimMethod,
    pub statistic: f64,
    pub p_value: f64,
}

/// Per-replicate quantities; the score and variance fields are at `α* = α_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub prevalence_estimate: f64,
    pub outcomes: Vec<MethodOutcome>,
    /// Methods that failed on this replicate, with the error message.
    pub failures: Vec<(SimMethod, String)>,
    pub u1_over_sqrt_n: f64,
    pub u2_over_sqrt_n: f64,
    pub sigma11_alpha_p: f64,
    pub sigma22: f64,
    pub u1s_alpha_p: Option<f64>,
    pub u2s: Option<f64>,
}

impl ReplicateRecord {
    pub fn outcome(&self, m: SimMethod) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionCell {
    pub method: SimMethod,
    pub scenario: String,
    pub k: Option<usize>,
    pub level: f64,
    pub rejections: usize,
    /// Replicates with a p-value for this method.
    pub reps: usize,
    pub skipped: usize,
    pub proportion: f64,
    pub std_error: f64,
    /// Mean realized prevalence over replicates that produced data.
    pub mean_prevalence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub cells: Vec<RejectionCell>,
    /// Replicates lost to data generation or null-fit failures.
    pub failed_replicates: usize,
    pub failure_messages: BTreeMap<String, usize>,
}

impl RejectionTable {
    pub fn cell(&self, m: SimMethod) -> Option<&RejectionCell> {
        self.cells.iter().find(|c| c.method == m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    pub options: TestOptions,
    pub draw_cap: u64,
}

impl RunConfig {
    pub fn new(reps: usize, level: f64, seed: u64) -> Self {
        Self {
            reps,
            level,
            seed,
            workers: 0,
            options: TestOptions::default(),
            draw_cap: DEFAULT_DRAW_CAP,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be >= 1".into()));
        }
        if !(self.level > 0.0 && self.level <= 1.0) {
            return Err(Error::InvalidArgument(format!("level {} is outside (0, 1]", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub scenario: SimulationScenario,
    pub methods: Vec<SimMethod>,
    pub config: RunConfig,
    pub table: RejectionTable,
    pub replicates: Vec<ReplicateRecord>,
}

impl SimulationOutput {
    /// p-values of `m` in replicate order, skipping replicates without one.
    pub fn p_values(&self, m: SimMethod) -> Vec<f64> {
        self.replicates.iter().filter_map(|r| r.outcome(m)).map(|o| o.p_value).collect()
    }

    pub fn statistics(&self, m: SimMethod) -> Vec<f64> {
        self.replicates.iter().filter_map(|r| r.outcome(m)).map(|o| o.statistic).collect()
    }
}

/// Interval used for the MAX tests: `[b1, b2] = [−10, −0.5]`, `m = 4`.
pub const MAX_INTERVAL: PrevalenceSpec = PrevalenceSpec::Interval { b1: -10.0, b2: -0.5, m: 4 };

/// Generator for replicate `rep`: ChaCha8 keyed by `seed` on stream `rep`.
pub fn replicate_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn run_replicate(
    sc: &SimulationScenario,
    methods: &[SimMethod],
    cfg: &RunConfig,
    rep: usize,
) -> std::result::Result<ReplicateRecord, String> {
    let mut rng = replicate_rng(cfg.seed, rep);
    let sample = generate_case_control_capped(sc, &mut rng, cfg.draw_cap).map_err(|e| e.to_string())?;
    let ds = &sample.dataset;
    let mut opts = cfg.options;
    opts.mvn.seed = mix_seed(cfg.seed ^ opts.mvn.seed, rep as u64);
    let (theta, both) = null_fits(ds, &opts.newton).map_err(|e| e.to_string())?;
    let at = |spec: PrevalenceSpec| Analysis::from_fits(ds, &spec, theta.clone(), both.clone(), &opts);
    let anchor = at(PrevalenceSpec::KnownAlphaP { alpha_p: sc.alpha_p }).map_err(|e| e.to_string())?;
    let needs_fitted = methods.iter().any(|m| matches!(m, SimMethod::RsFitted | SimMethod::SsFitted));
    let needs_grid = methods.iter().any(|m| matches!(m, SimMethod::RsMax | SimMethod::SsMax));
    let fitted = needs_fitted.then(|| at(PrevalenceSpec::Fitted));
    let grid = needs_grid.then(|| at(MAX_INTERVAL));

    let mut outcomes = Vec::with_capacity(methods.len());
    let mut failures = Vec::new();
    for &m in methods {
        let res = match m {
            SimMethod::Fs => anchor.fs(),
            SimMethod::RsAlphaP => anchor.rs(),
            SimMethod::SsAlphaP => anchor.ss(),
            SimMethod::RsFitted | SimMethod::SsFitted => match fitted.as_ref().unwrap() {
                Ok(a) if m == SimMethod::RsFitted => a.rs(),
                Ok(a) => a.ss(),
                Err(e) => Err(Error::InvalidArgument(e.to_string())),
            },
            SimMethod::RsMax | SimMethod::SsMax => match grid.as_ref().unwrap() {
                Ok(a) if m == SimMethod::RsMax => a.rs_max(),
                Ok(a) => a.ss_max(),
                Err(e) => Err(Error::InvalidArgument(e.to_string())),
            },
        };
        match res {
            Ok(r) => outcomes.push(MethodOutcome {
                method: m,
                statistic: r.statistic,
                p_value: r.p_value,
            }),
            Err(e) => failures.push((m, e.to_string())),
        }
    }
    let rn = (ds.n() as f64).sqrt();
    Ok(ReplicateRecord {
        index: rep,
        prevalence_estimate: sample.prevalence_estimate,
        outcomes,
        failures,
        u1_over_sqrt_n: anchor.scores.u1[0] / rn,
        u2_over_sqrt_n: anchor.scores.u2 / rn,
        sigma11_alpha_p: anchor.variance.sigma11[(0, 0)],
        sigma22: anchor.variance.sigma22,
        u1s_alpha_p: anchor.u1s.as_ref().map(|v| v[0]),
        u2s: anchor.u2s,
    })
}

/// Runs `cfg.reps` replicates of `sc` and tallies `p ≤ level` per method.
///
/// Replicate `r` always uses [`replicate_rng`]`(seed, r)`, so the output does
/// not depend on the number of workers.
pub fn run_scenario(sc: &SimulationScenario, methods: &[SimMethod], cfg: &RunConfig) -> Result<SimulationOutput> {
    sc.validate()?;
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    let work = || -> Vec<std::result::Result<ReplicateRecord, String>> {
        (0..cfg.reps)
            .into_par_iter()
            .map(|r| run_replicate(sc, methods, cfg, r))
            .collect()
    };
    let results = if cfg.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work)
    };

    let mut replicates = Vec::with_capacity(cfg.reps);
    let mut failure_messages: BTreeMap<String, usize> = BTreeMap::new();
    for r in results {
        match r {
            Ok(rec) => replicates.push(rec),
            Err(msg) => *failure_messages.entry(msg).or_default() += 1,
        }
    }
    let failed_replicates = cfg.reps - replicates.len();
    let mean_prevalence = (!replicates.is_empty())
        .then(|| replicates.iter().map(|r| r.prevalence_estimate).sum::<f64>() / replicates.len() as f64);
    let cells = methods
        .iter()
        .map(|&m| {
            let ps: Vec<f64> = replicates.iter().filter_map(|r| r.outcome(m)).map(|o| o.p_value).collect();
            let rejections = ps.iter().filter(|&&p| p <= cfg.level).count();
            let reps = ps.len();
            let proportion = if reps == 0 { 0.0 } else { rejections as f64 / reps as f64 };
            RejectionCell {
                method: m,
                scenario: sc.label.clone(),
                k: sc.k,
                level: cfg.level,
                rejections,
                reps,
                skipped: cfg.reps - reps,
                proportion,
                std_error: if reps == 0 { 0.0 } else { (proportion * (1.0 - proportion) / reps as f64).sqrt() },
                mean_prevalence,
            }
        })
        .collect();
    Ok(SimulationOutput {
        scenario: sc.clone(),
        methods: methods.to_vec(),
        config: *cfg,
        table: RejectionTable {
            cells,
            failed_replicates,
            failure_messages,
        },
        replicates,
    })
}

fn parse_list(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}"))))
        .collect()
}

/// Reads a scenario from `key = value` lines. Arrays are comma separated and
/// `#` starts a comment. `preset` and `k` load a preset that later keys
/// override; without a preset every field except `label`, `n0`, `n1` and
/// `random_effect_law` is required.
pub fn parse_scenario_config(text: &str) -> Result<SimulationScenario> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        entries.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    let get = |key: &str| entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let parse_usize = |key: &str, v: &str| {
        v.parse::<usize>()
            .map_err(|_| Error::Parse(format!("{key}: not a non-negative integer: {v:?}")))
    };
    let parse_f64 = |key: &str, v: &str| v.parse::<f64>().map_err(|_| Error::Parse(format!("{key}: not a number: {v:?}")));

    let mut sc = match get("preset") {
        Some(name) => {
            let k = get("k").map(|v| parse_usize("k", v)).transpose()?.unwrap_or(0);
            scenario_preset(name, k)?
        }
        None => SimulationScenario {
            label: "custom".into(),
            k: None,
            alpha_p: f64::NAN,
            beta: vec![],
            gamma: vec![],
            sqrt_theta: f64::NAN,
            mafs: vec![],
            n0: QUOTA,
            n1: QUOTA,
            random_effect_law: RandomEffectLaw::StandardNormal,
        },
    };
    let known = [
        "preset", "k", "label", "alpha_p", "beta", "gamma", "sqrt_theta", "mafs", "n0", "n1", "random_effect_law",
    ];
    for (key, value) in &entries {
        match key.as_str() {
            "label" => sc.label = value.clone(),
            "alpha_p" => sc.alpha_p = parse_f64(key, value)?,
            "beta" => sc.beta = parse_list(value)?,
            "gamma" => sc.gamma = parse_list(value)?,
            "sqrt_theta" => sc.sqrt_theta = parse_f64(key, value)?,
            "mafs" => sc.mafs = parse_list(value)?,
            "n0" => sc.n0 = parse_usize(key, value)?,
            "n1" => sc.n1 = parse_usize(key, value)?,
            "random_effect_law" => {
                sc.random_effect_law = match value.to_ascii_lowercase().as_str() {
                    "standard_normal" | "n01" => RandomEffectLaw::StandardNormal,
                    "variance2" | "variance_2" | "n02" => RandomEffectLaw::Variance2,
                    other => return Err(Error::Parse(format!("unknown random_effect_law {other:?}"))),
                }
            }
            k if known.contains(&k) => {}
            other => return Err(Error::Parse(format!("unknown key {other:?}"))),
        }
    }
    if get("preset").is_none() {
        for key in ["alpha_p", "beta", "gamma", "sqrt_theta", "mafs"] {
            if get(key).is_none() {
                return Err(Error::Parse(format!("missing key {key:?}")));
            }
        }
    }
    sc.validate()?;
    Ok(sc)
}
