//! Delimited-text ingestion and result documents.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{validate_dataset, CaseControlDataset, RawDataset};
use crate::error::{Error, Result};
use crate::procedures::TestResult;
use crate::simulation::{RejectionTable, RunConfig, SimMethod, SimulationOutput, SimulationScenario};

/// Which columns hold the phenotype, covariates and genotypes.
///
/// A covariate or genotype entry ending in `*` is a prefix pattern matching
/// every header that starts with the text before the `*`, in file order; a
/// pattern may match nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub phenotype: String,
    pub covariates: Vec<String>,
    pub genotypes: Vec<String>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            phenotype: "d".into(),
            covariates: vec!["x*".into()],
            genotypes: vec!["y*".into()],
        }
    }
}

impl ColumnSpec {
    /// Splits comma-separated column lists.
    pub fn from_lists(phenotype: &str, covariates: &str, genotypes: &str) -> Self {
        let split = |s: &str| {
            s.split(',')
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(String::from)
                .collect::<Vec<_>>()
        };
        Self {
            phenotype: phenotype.trim().to_string(),
            covariates: split(covariates),
            genotypes: split(genotypes),
        }
    }
}

fn resolve(header: &[String], patterns: &[String], exclude: &[usize], what: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for pat in patterns {
        let hits: Vec<usize> = match pat.strip_suffix('*') {
            Some(prefix) => header
                .iter()
                .enumerate()
                .filter(|(i, h)| h.starts_with(prefix) && !exclude.contains(i))
                .map(|(i, _)| i)
                .collect(),
            None => header.iter().position(|h| h == pat).into_iter().collect(),
        };
        if hits.is_empty() && !pat.ends_with('*') {
            return Err(Error::InvalidArgument(format!("{what} column {pat:?} not found in header")));
        }
        for h in hits {
            if !out.contains(&h) {
                out.push(h);
            }
        }
    }
    Ok(out)
}

/// Parses a dataset from delimited text; comma or tab is detected from the
/// header line.
pub fn parse_dataset(text: &str, spec: &ColumnSpec) -> Result<CaseControlDataset> {
    let first = text.lines().next().unwrap_or("");
    let delimiter = if first.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();

    let pheno = header
        .iter()
        .position(|h| *h == spec.phenotype)
        .ok_or_else(|| Error::InvalidArgument(format!("phenotype column {:?} not found in header", spec.phenotype)))?;
    let cov = resolve(&header, &spec.covariates, &[pheno], "covariate")?;
    let mut taken = cov.clone();
    taken.push(pheno);
    let geno = resolve(&header, &spec.genotypes, &taken, "genotype")?;
    if let Some(c) = geno.iter().find(|g| cov.contains(g) || **g == pheno) {
        return Err(Error::InvalidArgument(format!("column {:?} is used twice", header[*c])));
    }

    let mut d = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                Error::Parse(format!("row {}, column {:?}: not a number: {raw:?}", row + 2, header[col]))
            })
        };
        d.push(cell(pheno)?);
        for &c in &cov {
            xs.push(cell(c)?);
        }
        for &c in &geno {
            ys.push(cell(c)?);
        }
    }
    let n = d.len();
    let raw = RawDataset {
        d,
        x: DMatrix::from_row_slice(n, cov.len(), &xs),
        y: DMatrix::from_row_slice(n, geno.len(), &ys),
    };
    validate_dataset(&raw)
}

pub fn read_dataset(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<CaseControlDataset> {
    parse_dataset(&fs::read_to_string(path)?, spec)
}

/// Writes a dataset with headers `d, x1.., y1..`.
pub fn write_dataset(path: impl AsRef<Path>, ds: &CaseControlDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["d".to_string()];
    header.extend((1..=ds.dx()).map(|j| format!("x{j}")));
    header.extend((1..=ds.q()).map(|j| format!("y{j}")));
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut row = vec![ds.d()[i].to_string()];
        row.extend(ds.x().row(i).iter().map(|v| v.to_string()));
        row.extend(ds.y().row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace- or comma-separated numbers, one matrix row per line.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .filter(|l| !l.trim().is_empty())
        .map(parse_numbers)
        .collect::<Result<_>>()?;
    let ncol = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != ncol) {
        return Err(Error::Parse("matrix rows are empty or ragged".into()));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncol, rows.into_iter().flatten()))
}

/// All numbers in `text`, separated by whitespace or commas.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub command: String,
    pub args: Vec<String>,
    /// Resolved parameters, including defaults that were not on the command line.
    pub parameters: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub scenario: SimulationScenario,
    pub methods: Vec<SimMethod>,
    pub config: RunConfig,
    pub table: RejectionTable,
}

impl From<&SimulationOutput> for SimulationSummary {
    fn from(out: &SimulationOutput) -> Self {
        Self {
            scenario: out.scenario.clone(),
            methods: out.methods.clone(),
            config: out.config,
            table: out.table.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub tool: String,
    pub version: String,
    pub invocation: Invocation,
    pub seed: u64,
    /// Seconds since the Unix epoch; only recorded on request so that repeat
    /// runs produce identical files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
    #[serde(default)]
    pub records: Vec<TestResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSummary>,
}

impl ResultDocument {
    pub fn new(invocation: Invocation, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            invocation,
            seed,
            created_unix: None,
            records: Vec::new(),
            simulation: None,
        }
    }

    pub fn stamp_now(&mut self) {
        self.created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn write_document(path: impl AsRef<Path>, doc: &ResultDocument) -> Result<()> {
    let mut text = doc.to_json()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_document(path: impl AsRef<Path>) -> Result<ResultDocument> {
    ResultDocument::from_json(&fs::read_to_string(path)?)
}

/// One p-value per line, in replicate order.
pub fn write_p_values(path: impl AsRef<Path>, p: &[f64]) -> Result<()> {
    let mut text = String::with_capacity(p.len() * 20);
    for v in p {
        text.push_str(&format!("{v:e}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn table_tsv(table: &RejectionTable) -> String {
    let mut s = String::from("method\tscenario\tk\tlevel\trejections\treps\tskipped\tpercent\tstd_error\tmean_prevalence\n");
    for c in &table.cells {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.2}\t{:.4}\t{}\n",
            c.method,
            c.scenario,
            c.k.map_or("-".to_string(), |k| k.to_string()),
            c.level,
            c.rejections,
            c.reps,
            c.skipped,
            100.0 * c.proportion,
            c.std_error,
            c.mean_prevalence.map_or("-".to_string(), |p| format!("{p:.4}")),
        ));
    }
    s
}

/// File-name-safe form of a method label, e.g. `RS(alpha_p)` → `RS_alpha_p`.
pub fn method_slug(m: SimMethod) -> String {
    let s: String = m
        .label()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    s.trim_matches('_').to_string()
}
