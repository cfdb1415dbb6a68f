//! Command-line interface: `test`, `simulate` and `mvn-check`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::data::PrevalenceSpec;
use crate::error::{Error, Result};
use crate::io::{
    method_slug, read_dataset, table_tsv, write_document, write_p_values, ColumnSpec, Invocation, ResultDocument,
    SimulationSummary,
};
use crate::procedures::{Analysis, Method, TestOptions};
use crate::pvalue::{mvn_cdf, MvnConfig};
use crate::simulation::{
    parse_methods, parse_scenario_config, run_scenario, scenario_preset, RunConfig, MAX_INTERVAL,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

/// Environment variable supplying the default `--seed`.
pub const SEED_ENV: &str = "RETROSCORE_SEED";

const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(name = "retroscore", version, about = "Retrospective score tests for rare-variant association in case-control data")]
#[command(after_help = "Exit codes: 0 success, 2 input error, 3 numeric failure.\nThe default seed is read from RETROSCORE_SEED when set.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one test on a delimited data file.
    Test(TestArgs),
    /// Estimate rejection rates on a simulated scenario.
    Simulate(SimulateArgs),
    /// Evaluate a multivariate normal rectangle probability P(X ≤ b).
    MvnCheck(MvnCheckArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Comma- or tab-delimited file with a header row.
    #[arg(long, short)]
    pub input: PathBuf,
    /// One of fs, rs, ss, rs-max, ss-max.
    #[arg(long, short)]
    pub method: String,
    #[arg(long, default_value = "d")]
    pub phenotype: String,
    /// Comma-separated covariate columns; `name*` matches a prefix.
    #[arg(long, default_value = "x*")]
    pub covariates: String,
    /// Comma-separated genotype columns; `name*` matches a prefix.
    #[arg(long, default_value = "y*")]
    pub genotypes: String,
    /// Population intercept α_p, or `fitted` for the prospective anchor.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["prevalence", "b1", "b2", "m"])]
    pub alpha_p: Option<String>,
    /// Known disease prevalence p.
    #[arg(long, conflicts_with_all = ["b1", "b2", "m"])]
    pub prevalence: Option<f64>,
    /// Lower end of the log-odds prevalence interval (default −10).
    #[arg(long, allow_hyphen_values = true)]
    pub b1: Option<f64>,
    /// Upper end of the log-odds prevalence interval (default −0.5).
    #[arg(long, allow_hyphen_values = true)]
    pub b2: Option<f64>,
    /// Number of grid points in the interval (default 4).
    #[arg(long)]
    pub m: Option<usize>,
    /// Use the uncorrected grid `b1 + (b2 − b1)·i/m`, i = 1..m.
    #[arg(long)]
    pub grid_literal: bool,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Result document (JSON).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Record the creation time in the result document.
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Preset name: C1..C4, D1..D4, E1..E6.
    #[arg(long, required_unless_present = "config")]
    pub scenario: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// Scenario file of `key = value` lines; `preset`/`k` keys start from a preset.
    #[arg(long, conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Comma-separated list, e.g. `RS(alpha_p),RS-MAX`, or `all`.
    #[arg(long, default_value = "all")]
    pub methods: String,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Result document (JSON) with the rejection table.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Tab-separated rejection table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Directory for one-column p-value lists, one file per method.
    #[arg(long)]
    pub pvalues: Option<PathBuf>,
    /// Record the creation time in the result document.
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Debug, Args)]
pub struct MvnCheckArgs {
    /// Correlation matrix, one row per line.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Upper bounds, whitespace or comma separated; a single value is
    /// repeated for every coordinate.
    #[arg(long)]
    pub bounds: PathBuf,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = MvnConfig::default().target_abs_error)]
    pub target_error: f64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = match cli.command {
        Command::Test(a) => cmd_test(&a, argv),
        Command::Simulate(a) => cmd_simulate(&a, argv),
        Command::MvnCheck(a) => cmd_mvn_check(&a),
    };
    match outcome {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_NUMERIC
    }
}

/// The prevalence anchor implied by the flags, with interval defaults
/// `[−10, −0.5]`, `m = 4`.
pub fn prevalence_from_args(a: &TestArgs, method: Method) -> Result<PrevalenceSpec> {
    let spec = if let Some(v) = &a.alpha_p {
        if v.eq_ignore_ascii_case("fitted") {
            PrevalenceSpec::Fitted
        } else {
            let alpha_p = v
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("--alpha-p expects a number or `fitted`, got {v:?}")))?;
            PrevalenceSpec::KnownAlphaP { alpha_p }
        }
    } else if let Some(p) = a.prevalence {
        PrevalenceSpec::KnownPrevalence { p }
    } else if a.b1.is_some() || a.b2.is_some() || a.m.is_some() || method.is_max() {
        let PrevalenceSpec::Interval { b1, b2, m } = MAX_INTERVAL else { unreachable!() };
        PrevalenceSpec::Interval {
            b1: a.b1.unwrap_or(b1),
            b2: a.b2.unwrap_or(b2),
            m: a.m.unwrap_or(m),
        }
    } else if method == Method::Fs {
        PrevalenceSpec::Fitted
    } else {
        return Err(Error::InvalidArgument(format!(
            "{} needs a prevalence anchor: --alpha-p, --prevalence or --b1/--b2/--m (use --alpha-p fitted for the prospective test)",
            method.name()
        )));
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_test(a: &TestArgs, argv: Vec<String>) -> Result<()> {
    let method = Method::parse(&a.method)?;
    let prevalence = prevalence_from_args(a, method)?;
    let columns = ColumnSpec::from_lists(&a.phenotype, &a.covariates, &a.genotypes);
    let ds = read_dataset(&a.input, &columns)?;
    let options = TestOptions {
        grid_literal: a.grid_literal,
        mvn: MvnConfig::default().with_seed(a.seed),
        ..TestOptions::default()
    };
    let result = Analysis::new(&ds, &prevalence, &options)?.run(method)?;
    println!("{}\tstatistic={}\tp={}", result.method.name(), result.statistic, result.p_value);

    if let Some(path) = &a.output {
        let invocation = Invocation {
            command: "test".into(),
            args: argv,
            parameters: json!({
                "input": a.input,
                "columns": columns,
                "method": method,
                "prevalence": prevalence,
                "options": options,
                "n0": ds.n0(),
                "n1": ds.n1(),
            }),
        };
        let mut doc = ResultDocument::new(invocation, a.seed);
        if a.timestamp {
            doc.stamp_now();
        }
        doc.records.push(result);
        write_document(path, &doc)?;
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, argv: Vec<String>) -> Result<()> {
    let scenario = match (&a.scenario, &a.config) {
        (_, Some(path)) => parse_scenario_config(&fs::read_to_string(path)?)?,
        (Some(name), None) => scenario_preset(name, a.k)?,
        (None, None) => return Err(Error::InvalidArgument("--scenario or --config is required".into())),
    };
    let methods = parse_methods(&a.methods)?;
    let cfg = RunConfig {
        workers: a.workers,
        ..RunConfig::new(a.reps, a.level, a.seed)
    };
    let out = run_scenario(&scenario, &methods, &cfg)?;
    let tsv = table_tsv(&out.table);
    print!("{tsv}");
    if out.table.failed_replicates > 0 {
        eprintln!("{} replicate(s) failed:", out.table.failed_replicates);
        for (msg, count) in &out.table.failure_messages {
            eprintln!("  {count} × {msg}");
        }
    }
    std::io::stdout().flush()?;

    if let Some(path) = &a.table {
        fs::write(path, &tsv)?;
    }
    if let Some(dir) = &a.pvalues {
        fs::create_dir_all(dir)?;
        for &m in &out.methods {
            write_p_values(dir.join(format!("{}.pvalues.txt", method_slug(m))), &out.p_values(m))?;
        }
    }
    if let Some(path) = &a.output {
        let invocation = Invocation {
            command: "simulate".into(),
            args: argv,
            parameters: json!({ "scenario": scenario, "methods": methods, "config": cfg }),
        };
        let mut doc = ResultDocument::new(invocation, a.seed);
        if a.timestamp {
            doc.stamp_now();
        }
        doc.simulation = Some(SimulationSummary::from(&out));
        write_document(path, &doc)?;
    }
    Ok(())
}

fn cmd_mvn_check(a: &MvnCheckArgs) -> Result<()> {
    let corr = crate::io::parse_matrix(&fs::read_to_string(&a.matrix)?)?;
    let mut bounds = crate::io::parse_numbers(&fs::read_to_string(&a.bounds)?)?;
    if bounds.len() == 1 {
        bounds = vec![bounds[0]; corr.nrows()];
    }
    if bounds.len() != corr.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} bounds for a {}×{} matrix",
            bounds.len(),
            corr.nrows(),
            corr.ncols()
        )));
    }
    let cfg = MvnConfig {
        target_abs_error: a.target_error,
        ..MvnConfig::default().with_seed(a.seed)
    };
    cfg.validate()?;
    let r = mvn_cdf(&bounds, &corr, &cfg)?;
    println!("probability={:.8}\terror={:.3e}", r.prob, r.abs_error_estimate);
    Ok(())
}
