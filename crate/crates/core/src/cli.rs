//! Command-line front end: `synth`, `analyze`, `batch` and `correlate`.
//!
//! Every output file is written to a temporary file in its destination
//! directory and renamed into place.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{parse_covariates, BaselineError, BaselineKind};
use crate::detect::Penalty;
use crate::indices::{IndexPair, Quadrature, RhoBasis, SpanMode, Thresholds};
use crate::pipeline::{analyze, sha256_hex, Analysis, AnalysisConfig, BaselineSource, PipelineError, ReportMetadata};
use crate::plot::{rankings_chart, series_chart};
use crate::series::{parse_series, MonthStamp};
use crate::stats::{correlation_table, group_mean_ci, CorrelationTable, GroupSummary, StatsError, UnitTable};
use crate::synth::{generate, ScenarioSpec, SynthError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FIT_FAILED: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_BASELINE: i32 = 4;
pub const EXIT_ANALYSIS: i32 = 5;
pub const EXIT_SPEC: i32 = 6;
pub const EXIT_IO: i32 = 7;
pub const EXIT_STATS: i32 = 8;
pub const EXIT_BATCH_ROWS: i32 = 9;
pub const EXIT_USAGE: i32 = 64;

const EXIT_CODES_HELP: &str = "\
Exit codes:
  0   success
  2   at least one disruption could not be fitted (report still written)
  3   an input file could not be parsed (series, covariates, manifest, tables)
  4   the baseline could not be fitted or forecast
  5   detection or index computation failed
  6   the scenario spec is invalid
  7   a file could not be read or written
  8   correlation failed (for example no shared units)
  9   batch finished but some rows failed (see summary.json)
  64  invalid command-line usage";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Input { .. } => EXIT_INPUT,
            CliError::Pipeline(PipelineError::Series(_)) => EXIT_INPUT,
            CliError::Pipeline(PipelineError::ExpectedMisaligned) => EXIT_INPUT,
            CliError::Pipeline(PipelineError::Baseline(_)) => EXIT_BASELINE,
            CliError::Pipeline(PipelineError::CutoffRequired) => EXIT_USAGE,
            CliError::Pipeline(_) => EXIT_ANALYSIS,
            CliError::Synth(_) => EXIT_SPEC,
            CliError::Stats(StatsError::MalformedRow { .. }) => EXIT_INPUT,
            CliError::Stats(_) => EXIT_STATS,
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<(String, String), CliError> {
    let bytes = read(path)?;
    let digest = sha256_hex(&bytes);
    let text = String::from_utf8(bytes).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((text, digest))
}

fn input_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    create_dir(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s.into_bytes()
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Debug, Parser)]
#[command(
    name = "resilience",
    version,
    about = "Resilience and adaptability indices for monthly performance series",
    after_help = EXIT_CODES_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario: observed.csv, expected.csv,
    /// covariates.csv and truth.json.
    #[command(after_help = EXIT_CODES_HELP)]
    Synth(SynthArgs),
    /// Analyse one series and write report.json (and plot.svg with --plot).
    #[command(after_help = EXIT_CODES_HELP)]
    Analyze(AnalyzeArgs),
    /// Analyse every series listed in a manifest.
    #[command(after_help = EXIT_CODES_HELP)]
    Batch(BatchArgs),
    /// Pearson correlations between indices and covariates per unit.
    #[command(after_help = EXIT_CODES_HELP)]
    Correlate(CorrelateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Scenario spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Covariate,
    Logistic,
    Ets,
}

impl From<BaselineArg> for BaselineKind {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Covariate => BaselineKind::Covariate,
            BaselineArg::Logistic => BaselineKind::GeneralizedLogistic,
            BaselineArg::Ets => BaselineKind::ExponentialSmoothing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpanArg {
    Contiguous,
    Windows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuadratureArg {
    CurveCorrected,
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RhoBasisArg {
    Disruption,
    Recovery,
}

fn parse_penalty(s: &str) -> Result<Penalty, String> {
    if s == "auto" {
        return Ok(Penalty::Auto);
    }
    match s.parse::<f64>() {
        Ok(p) if p.is_finite() && p >= 0.0 => Ok(Penalty::Fixed(p)),
        _ => Err(format!("expected `auto` or a non-negative number, got {s:?}")),
    }
}

/// Analysis settings shared by `analyze` and `batch`.
#[derive(Debug, Clone, Args)]
pub struct AnalysisFlags {
    /// Baseline model fitted on the months before --cutoff.
    #[arg(long, value_enum, default_value = "covariate")]
    pub baseline: BaselineArg,
    /// First month of the disrupted period (YYYY-MM).
    #[arg(long)]
    pub cutoff: Option<MonthStamp>,
    /// Trailing moving-average window; 1 disables smoothing.
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    /// Shortest admitted disruption, in months of loss.
    #[arg(long, default_value_t = 3)]
    pub min_duration: usize,
    /// Smallest admitted peak relative loss.
    #[arg(long, default_value_t = 0.05)]
    pub min_peak_ratio: f64,
    /// Segmentation penalty: `auto` or a number.
    #[arg(long, default_value = "auto", value_parser = parse_penalty)]
    pub penalty: Penalty,
    /// Span over which the resilience index integrates.
    #[arg(long, value_enum, default_value = "contiguous")]
    pub span: SpanArg,
    /// Loss quadrature for the resilience index.
    #[arg(long, value_enum, default_value = "curve-corrected")]
    pub quadrature: QuadratureArg,
    /// Rate compared by the adaptability index.
    #[arg(long, value_enum, default_value = "disruption")]
    pub rho_basis: RhoBasisArg,
    /// Keep the original units instead of dividing by the first value.
    #[arg(long)]
    pub no_normalize: bool,
    /// Adaptability above this counts as high.
    #[arg(long, default_value_t = 0.5)]
    pub rho_threshold: f64,
    /// Resilience above this counts as high.
    #[arg(long, default_value_t = 0.7)]
    pub r_threshold: f64,
    /// Also write an SVG chart.
    #[arg(long)]
    pub plot: bool,
}

impl AnalysisFlags {
    pub fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            window: self.window,
            min_duration: self.min_duration,
            min_peak_ratio: self.min_peak_ratio,
            penalty: self.penalty,
            span: match self.span {
                SpanArg::Contiguous => SpanMode::Contiguous,
                SpanArg::Windows => SpanMode::Windows,
            },
            quadrature: match self.quadrature {
                QuadratureArg::CurveCorrected => Quadrature::CurveCorrected,
                QuadratureArg::Trapezoid => Quadrature::Trapezoid,
            },
            rho_basis: match self.rho_basis {
                RhoBasisArg::Disruption => RhoBasis::Disruption,
                RhoBasisArg::Recovery => RhoBasis::Recovery,
            },
            cutoff: self.cutoff,
            normalize: !self.no_normalize,
            thresholds: Thresholds {
                adaptability: self.rho_threshold,
                resilience: self.r_threshold,
            },
            ..AnalysisConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Observed series CSV (month,value[,label]).
    #[arg(long)]
    pub observed: PathBuf,
    /// Expected series CSV on the same months; replaces the fitted baseline.
    #[arg(long)]
    pub expected: Option<PathBuf>,
    /// Covariate CSV (month,physicians,population) for --baseline covariate.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Label for the report; defaults to the series label or file stem.
    #[arg(long)]
    pub label: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: AnalysisFlags,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    /// CSV with columns label,observed_path and optional covariate_path,
    /// expected_path, group. Relative paths resolve against its directory.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: AnalysisFlags,
}

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    /// Index table CSV (unit,<index>...).
    #[arg(long, requires = "covariates", conflicts_with = "pairs")]
    pub indices: Option<PathBuf>,
    /// Covariate table CSV (unit,<covariate>...).
    #[arg(long, requires = "indices")]
    pub covariates: Option<PathBuf>,
    /// Single-pair CSV (unit,index_value,covariate_value).
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

/// Files written by `synth`.
#[derive(Debug, Clone)]
pub struct SynthOutputs {
    pub observed: PathBuf,
    pub expected: PathBuf,
    pub covariates: PathBuf,
    pub truth: PathBuf,
}

pub fn run_synth(args: &SynthArgs) -> Result<SynthOutputs, CliError> {
    let (text, _) = read_text(&args.spec)?;
    let spec: ScenarioSpec = serde_json::from_str(&text).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let truth = generate(&spec)?;
    let out = SynthOutputs {
        observed: args.out.join("observed.csv"),
        expected: args.out.join("expected.csv"),
        covariates: args.out.join("covariates.csv"),
        truth: args.out.join("truth.json"),
    };
    write_atomic(&out.observed, truth.observed.to_csv().as_bytes())?;
    write_atomic(&out.expected, truth.expected.to_csv().as_bytes())?;
    write_atomic(&out.covariates, truth.covariates.to_csv().as_bytes())?;
    write_atomic(&out.truth, &to_json(&truth.record()))?;
    Ok(out)
}

/// Inputs of one analysis, resolved to paths.
#[derive(Debug, Clone)]
struct AnalysisInputs {
    observed: PathBuf,
    expected: Option<PathBuf>,
    covariates: Option<PathBuf>,
    label: Option<String>,
}

fn run_one(inputs: &AnalysisInputs, flags: &AnalysisFlags) -> Result<Analysis, CliError> {
    let mut digests = BTreeMap::new();
    let (text, digest) = read_text(&inputs.observed)?;
    digests.insert("observed".to_string(), digest);
    let mut observed = parse_series(&text).map_err(|e| input_error(&inputs.observed, e))?;
    let label = inputs
        .label
        .clone()
        .or_else(|| (!observed.label().is_empty()).then(|| observed.label().to_string()))
        .or_else(|| inputs.observed.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();
    observed = observed.with_label(label);

    let source = if let Some(path) = &inputs.expected {
        let (text, digest) = read_text(path)?;
        digests.insert("expected".to_string(), digest);
        BaselineSource::Supplied(parse_series(&text).map_err(|e| input_error(path, e))?)
    } else {
        let kind: BaselineKind = flags.baseline.into();
        let covariates = match &inputs.covariates {
            Some(path) => {
                let (text, digest) = read_text(path)?;
                digests.insert("covariates".to_string(), digest);
                Some(parse_covariates(&text).map_err(|e| input_error(path, e))?)
            }
            None if kind == BaselineKind::Covariate => {
                return Err(CliError::Pipeline(PipelineError::Baseline(BaselineError::CovariateMissing)));
            }
            None => None,
        };
        BaselineSource::Fitted { kind, covariates }
    };
    Ok(analyze(&observed, &source, &flags.config(), digests)?)
}

/// Writes `report.json` (and `plot.svg`) for one analysis into `out`.
fn write_analysis(analysis: &Analysis, report_path: &Path, plot_path: Option<&Path>) -> Result<(), CliError> {
    let mut report = analysis.report.clone();
    report.metadata = Some(ReportMetadata {
        generated_at: timestamp(),
    });
    write_atomic(report_path, report.to_json().as_bytes())?;
    if let Some(p) = plot_path {
        write_atomic(p, series_chart(analysis).as_bytes())?;
    }
    Ok(())
}

/// Runs `analyze`; the returned analysis may carry fit failures, which map
/// to exit code 2.
pub fn run_analyze(args: &AnalyzeArgs) -> Result<Analysis, CliError> {
    let inputs = AnalysisInputs {
        observed: args.observed.clone(),
        expected: args.expected.clone(),
        covariates: args.covariates.clone(),
        label: args.label.clone(),
    };
    let analysis = run_one(&inputs, &args.flags)?;
    let plot = args.out.join("plot.svg");
    write_analysis(
        &analysis,
        &args.out.join("report.json"),
        args.flags.plot.then_some(plot.as_path()),
    )?;
    Ok(analysis)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct ManifestRow {
    label: String,
    observed_path: String,
    #[serde(default)]
    covariate_path: Option<String>,
    #[serde(default)]
    expected_path: Option<String>,
    #[serde(default)]
    group: Option<String>,
}

/// Outcome of one manifest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub label: String,
    pub group: String,
    /// `ok`, `fit_failures` or `failed`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indices: Option<IndexPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub rows: Vec<BatchRow>,
    pub succeeded: usize,
    pub failed: usize,
}

/// Per-group summaries of both indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupIndices {
    pub group: String,
    pub r: GroupSummary,
    pub rho: GroupSummary,
}

const DEFAULT_GROUP: &str = "all";

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn safe_file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn parse_manifest(path: &Path) -> Result<Vec<ManifestRow>, CliError> {
    let (text, _) = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<ManifestRow>().enumerate() {
        let mut row = record.map_err(|e| input_error(path, format!("row {}: {e}", i + 2)))?;
        for opt in [&mut row.covariate_path, &mut row.expected_path, &mut row.group] {
            if opt.as_deref() == Some("") {
                *opt = None;
            }
        }
        rows.push(row);
    }
    let mut seen = std::collections::BTreeSet::new();
    for row in &rows {
        if !seen.insert(safe_file_stem(&row.label)) {
            return Err(input_error(path, format!("duplicate label {:?}", row.label)));
        }
    }
    Ok(rows)
}

/// Runs every manifest row (in parallel); failures are recorded, not fatal.
pub fn run_batch(args: &BatchArgs) -> Result<BatchSummary, CliError> {
    let rows = parse_manifest(&args.manifest)?;
    let base = args.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let reports = args.out.join("reports");
    create_dir(&reports)?;

    let results: Vec<BatchRow> = rows
        .par_iter()
        .map(|row| {
            let inputs = AnalysisInputs {
                observed: resolve(&base, &row.observed_path),
                expected: row.expected_path.as_deref().map(|p| resolve(&base, p)),
                covariates: row.covariate_path.as_deref().map(|p| resolve(&base, p)),
                label: Some(row.label.clone()),
            };
            let group = row.group.clone().unwrap_or_else(|| DEFAULT_GROUP.to_string());
            let stem = safe_file_stem(&row.label);
            let report_path = reports.join(format!("{stem}.json"));
            let plot_path = reports.join(format!("{stem}.svg"));
            let outcome = run_one(&inputs, &args.flags).and_then(|a| {
                write_analysis(&a, &report_path, args.flags.plot.then_some(plot_path.as_path()))?;
                Ok(a)
            });
            match outcome {
                Ok(a) => BatchRow {
                    label: row.label.clone(),
                    group,
                    status: if a.has_fit_failures() { "fit_failures" } else { "ok" }.to_string(),
                    error: None,
                    indices: Some(a.report.indices.clone()),
                    report: Some(format!("reports/{stem}.json")),
                },
                Err(e) => BatchRow {
                    label: row.label.clone(),
                    group,
                    status: "failed".to_string(),
                    error: Some(e.to_string()),
                    indices: None,
                    report: None,
                },
            }
        })
        .collect();

    let succeeded = results.iter().filter(|r| r.indices.is_some()).count();
    let summary = BatchSummary {
        failed: results.len() - succeeded,
        succeeded,
        rows: results,
    };

    let mut by_group: BTreeMap<&str, Vec<&IndexPair>> = BTreeMap::new();
    for row in &summary.rows {
        if let Some(ix) = &row.indices {
            by_group.entry(row.group.as_str()).or_default().push(ix);
        }
    }
    let mut groups = Vec::new();
    for (group, pairs) in &by_group {
        let rs: Vec<f64> = pairs.iter().map(|p| p.r).collect();
        let rhos: Vec<f64> = pairs.iter().map(|p| p.rho).collect();
        groups.push(GroupIndices {
            group: group.to_string(),
            r: group_mean_ci(*group, &rs)?,
            rho: group_mean_ci(*group, &rhos)?,
        });
    }

    let mut csv = String::from("unit,rho,r\n");
    for row in &summary.rows {
        if let Some(ix) = &row.indices {
            csv.push_str(&format!("{},{},{}\n", csv_field(&row.label), ix.rho, ix.r));
        }
    }
    write_atomic(&args.out.join("summary.json"), &to_json(&summary))?;
    write_atomic(&args.out.join("groups.json"), &to_json(&groups))?;
    write_atomic(&args.out.join("indices.csv"), csv.as_bytes())?;
    if args.flags.plot {
        let pairs: Vec<IndexPair> = summary.rows.iter().filter_map(|r| r.indices.clone()).collect();
        write_atomic(&args.out.join("rankings.svg"), rankings_chart(&pairs).as_bytes())?;
    }
    Ok(summary)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn run_correlate(args: &CorrelateArgs) -> Result<CorrelationTable, CliError> {
    let table = match (&args.indices, &args.covariates, &args.pairs) {
        (Some(i), Some(c), None) => {
            let (ti, _) = read_text(i)?;
            let (tc, _) = read_text(c)?;
            let indices = UnitTable::parse(&ti).map_err(|e| input_error(i, e))?;
            let covariates = UnitTable::parse(&tc).map_err(|e| input_error(c, e))?;
            correlation_table(&indices, &covariates)?
        }
        (None, None, Some(p)) => {
            let (text, _) = read_text(p)?;
            let (indices, covariates) = UnitTable::split_pairs(&text).map_err(|e| input_error(p, e))?;
            correlation_table(&indices, &covariates)?
        }
        _ => {
            return Err(CliError::Usage(
                "give either --indices and --covariates, or --pairs".to_string(),
            ))
        }
    };
    write_atomic(&args.out, &to_json(&table))?;
    Ok(table)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => run_synth(a).map(|out| {
            println!("wrote {}", out.truth.display());
            EXIT_OK
        }),
        Command::Analyze(a) => run_analyze(a).map(|analysis| {
            let ix = &analysis.report.indices;
            println!(
                "{}: {} disruption(s), rho {:.4}, r {:.4}",
                analysis.report.label, ix.n_disruptions, ix.rho, ix.r
            );
            for f in &analysis.report.fit_failures {
                eprintln!("fit failed for window starting {}: {}", f.window.start_month, f.error);
            }
            if analysis.has_fit_failures() {
                EXIT_FIT_FAILED
            } else {
                EXIT_OK
            }
        }),
        Command::Batch(a) => run_batch(a).map(|s| {
            println!("{} succeeded, {} failed", s.succeeded, s.failed);
            for row in s.rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("{}: {}", row.label, row.error.as_deref().unwrap_or_default());
            }
            if s.failed > 0 {
                EXIT_BATCH_ROWS
            } else {
                EXIT_OK
            }
        }),
        Command::Correlate(a) => run_correlate(a).map(|t| {
            println!("{} units joined, {} dropped", t.joined_units, t.dropped_units);
            EXIT_OK
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
