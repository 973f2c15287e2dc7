//! Command-line front end for the `adjsar` crate.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 on numeric or
//! diagnostic failures such as an Assumption 1 violation.

use adjsar::estimate::{estimate, EstimateOptions};
use adjsar::fixtures::split_blocks;
use adjsar::infer::{saddlepoint_ci, wald_ci, Interval, Side};
use adjsar::io::{read_matrix_file, read_table_file, write_matrix_file, DataTable};
use adjsar::mc::{
    replicate_table_with, row_fields, run_bias_experiment, run_coverage_experiment, with_threads, ExperimentConfig,
    SummaryRow, TableId,
};
use adjsar::panels::{lll_estimator, NetworkPanel, SemModel};
use adjsar::sar::SpatialContext;
use adjsar::spectral::{check_assumption1, check_c1, default_assumption1_tol, Assumption1};
use adjsar::weights::{circulant_ahead_behind, erdos_renyi_connected, group_interaction, normalize, normalize_matrix, watts_strogatz};
use adjsar::{Error, EstimateResult, Method, Normalization, SarData, WeightsMatrix};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "adjsar", version, about = "Adjusted QMLE for spatial autoregressive models")]
pub struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "ADJSAR_THREADS")]
    pub threads: Option<usize>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a weights matrix.
    GenWeights(GenWeightsArgs),
    /// Report parameter spaces and assumption checks for a data set.
    Diagnose(DataArgs),
    /// Estimate λ.
    Estimate(EstimateArgs),
    /// Confidence interval for λ.
    Ci(CiArgs),
    /// Run one Monte Carlo experiment from the configuration file.
    Simulate(SimulateArgs),
    /// Regenerate a published table at reduced replication count.
    ReplicateTable(ReplicateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Ws,
    Er,
    Circulant,
    Group,
}

#[derive(Debug, Args)]
pub struct GenWeightsArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Number of units (ws, er, circulant).
    #[arg(long)]
    pub n: Option<usize>,
    /// Neighbours ahead and behind (ws, circulant).
    #[arg(long)]
    pub h: Option<usize>,
    /// Rewiring (ws) or edge (er) probability.
    #[arg(long)]
    pub p: Option<f64>,
    /// Number of groups (group).
    #[arg(long)]
    pub groups: Option<usize>,
    /// Group size (group).
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long, default_value = "none")]
    pub normalize: String,
    /// Output file; `.mtx` writes Matrix Market, anything else CSV.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Weights or adjacency matrix (`.mtx` or CSV).
    #[arg(long)]
    pub weights: PathBuf,
    /// Normalization applied to the matrix after reading.
    #[arg(long, default_value = "none")]
    pub normalize: String,
    /// CSV with a header row; every column other than `--y` is a regressor.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub y: String,
    /// Prepend a column of ones to X.
    #[arg(long)]
    pub intercept: bool,
    /// Long panel layout `network_id, unit_id, y, x1..`; X gets the network fixed effects.
    #[arg(long)]
    pub panel: bool,
    /// Also write the JSON result here.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// qmle, aqmle, censored, uqmle, lll (with --panel) or sem.
    #[arg(long, default_value = "aqmle")]
    pub method: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CiMethodArg {
    Saddlepoint,
    Wald,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "two")]
    pub side: String,
    #[arg(long, value_enum, default_value = "saddlepoint")]
    pub method: CiMethodArg,
    /// Estimator the Wald interval is centred on.
    #[arg(long, default_value = "aqmle")]
    pub estimator: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Override the configured replication count.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Output prefix; writes `<prefix>.json` and `<prefix>.csv`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    /// 1, 2, 3, 4, S1, S2, S3 or S4.
    #[arg(long)]
    pub table: String,
    /// Replications per cell are `10⁶ / scale`.
    #[arg(long, default_value_t = 100.0)]
    pub scale: f64,
    /// Output prefix; writes `<prefix>.json` and `<prefix>.csv`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub estimate: Option<EstimateOptions>,
    pub experiment: Option<ExperimentConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Numeric(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::Dimension(_)
            | Error::Unknown { .. }
            | Error::Io(_)
            | Error::Parse(_)
            | Error::ZeroRow { .. } => Self::Usage(e.to_string()),
            _ => Self::Numeric(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(1);
    let threads = cli.threads.or(cfg.threads);
    if threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let opts = cfg.estimate.clone().unwrap_or_default();
    with_threads(threads, move || match cli.command {
        Command::GenWeights(a) => gen_weights(&a, seed),
        Command::Diagnose(a) => diagnose(&a),
        Command::Estimate(a) => estimate_cmd(&a, &opts),
        Command::Ci(a) => ci(&a, &opts),
        Command::Simulate(a) => simulate(&a, &cfg, cli.seed),
        Command::ReplicateTable(a) => replicate(&a, seed),
    })?
}

fn need<T>(v: Option<T>, name: &str, kind: &str) -> CliResult<T> {
    v.ok_or_else(|| usage(format!("--{name} is required for --kind {kind}")))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(CliError::from)
}

fn gen_weights(a: &GenWeightsArgs, seed: u64) -> CliResult<()> {
    let mode: Normalization = parse(&a.normalize)?;
    let w = match a.kind {
        Kind::Ws => {
            let adj = watts_strogatz(need(a.n, "n", "ws")?, need(a.h, "h", "ws")?, need(a.p, "p", "ws")?, seed)?;
            normalize(&adj, mode)?
        }
        Kind::Er => {
            let (adj, _) = erdos_renyi_connected(need(a.n, "n", "er")?, need(a.p, "p", "er")?, seed, 1000)?;
            normalize(&adj, mode)?
        }
        Kind::Circulant => normalize(&circulant_ahead_behind(need(a.n, "n", "circulant")?, need(a.h, "h", "circulant")?)?, mode)?,
        Kind::Group => {
            let w = group_interaction(need(a.groups, "groups", "group")?, need(a.group_size, "group-size", "group")?)?;
            match mode {
                Normalization::None | Normalization::Row => w,
                Normalization::Spectral => normalize_matrix(w.entries(), mode)?,
            }
        }
    };
    write_matrix_file(&a.out, w.entries())?;
    emit(&json!({ "kind": format!("{:?}", a.kind).to_lowercase(), "n": w.n(), "seed": seed, "out": a.out }), None)
}

fn read_weights(a: &DataArgs) -> CliResult<WeightsMatrix> {
    Ok(normalize_matrix(&read_matrix_file(&a.weights)?, parse(&a.normalize)?)?)
}

/// Data ready for estimation: a plain SAR sample, optionally backed by a panel.
struct Loaded {
    data: SarData,
    panel: Option<NetworkPanel>,
}

fn network_sizes(table: &DataTable) -> CliResult<Vec<usize>> {
    let ids = table.column("network_id")?;
    let mut sizes: Vec<usize> = Vec::new();
    let mut last = f64::NAN;
    for &g in ids.iter() {
        if g != last {
            sizes.push(0);
            last = g;
        }
        *sizes.last_mut().expect("nonempty") += 1;
    }
    Ok(sizes)
}

fn with_intercept(x: DMatrix<f64>) -> DMatrix<f64> {
    x.insert_column(0, 1.0)
}

fn load(a: &DataArgs) -> CliResult<Loaded> {
    let table = read_table_file(&a.data)?;
    let w = read_weights(a)?;
    if a.panel {
        if a.y != "y" || a.intercept {
            return Err(usage("--panel expects a `y` column and supplies its own fixed effects"));
        }
        let blocks = split_blocks(w.entries(), &network_sizes(&table)?, w.normalization())?;
        let panel = NetworkPanel::from_long_table(&table, blocks)?;
        return Ok(Loaded { data: panel.sar_data()?, panel: Some(panel) });
    }
    let y = table.column(&a.y)?;
    let mut x = table.matrix_without(&[a.y.as_str()]);
    if a.intercept {
        x = with_intercept(x);
    }
    Ok(Loaded { data: SarData::new(SpatialContext::new(w)?, x, y)?, panel: None })
}

/// Writes to stdout, treating a closed pipe as success.
fn say(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(usage(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn emit(v: &serde_json::Value, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Numeric(e.to_string()))?;
    say(&format!("{text}\n"))?;
    if let Some(p) = out {
        std::fs::write(p, text + "\n").map_err(|e| usage(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn diagnose(a: &DataArgs) -> CliResult<()> {
    let Loaded { data, .. } = load(a)?;
    let ctx = data.ctx();
    let info = ctx.info();
    let a1 = check_assumption1(ctx.w(), info, data.annihilator(), default_assumption1_tol(info))?;
    let lambda_space = data.lambda_space().ok().cloned();
    let adjusted = data.adjusted_space().ok().cloned();
    let c1 = adjusted.as_ref().map(|s| check_c1(info, data.m_kernel(), data.n() - data.k(), s, 512));
    let report = json!({
        "n": data.n(),
        "k": data.k(),
        "normalization": ctx.w().normalization(),
        "omega_min": info.omega_min(),
        "omega_max": info.omega_max_real(),
        "real_semisimple": info.real_semisimple(),
        "lambda_space": lambda_space,
        "adjusted_space": adjusted,
        "adjusted_space_failure": data.adjusted_report().failure,
        "endpoints": data.adjusted_report().visited,
        "assumption1": a1,
        "c1": c1,
    });
    emit(&report, a.out.as_deref())?;
    if let Assumption1::ViolatedAt(omega) = a1 {
        return Err(Error::Assumption1 { omega }.into());
    }
    Ok(())
}

fn run_estimate(l: &Loaded, method: &str, opts: &EstimateOptions) -> CliResult<(EstimateResult, Option<SarData>)> {
    match method {
        "lll" => {
            let panel = l.panel.as_ref().ok_or_else(|| usage("method lll needs --panel"))?;
            let sys = panel.lll_transform()?;
            Ok((lll_estimator(&sys, opts)?, Some(sys.data)))
        }
        m => Ok((estimate(&l.data, parse::<Method>(m)?, opts)?, None)),
    }
}

fn estimate_cmd(a: &EstimateArgs, opts: &EstimateOptions) -> CliResult<()> {
    let l = load(&a.data)?;
    if a.method == "sem" {
        if l.panel.is_some() {
            return Err(usage("method sem does not take --panel"));
        }
        let sem = SemModel::new(l.data.ctx().clone(), l.data.x().clone(), l.data.y().clone())?;
        let r = sem.estimate(opts)?;
        return emit(&json!({ "method": "sem", "result": r }), a.data.out.as_deref());
    }
    let (r, _) = run_estimate(&l, &a.method, opts)?;
    emit(&json!({ "method": a.method, "lambda_hat": r.lambda_hat, "result": r }), a.data.out.as_deref())
}

fn ci(a: &CiArgs, opts: &EstimateOptions) -> CliResult<()> {
    let side: Side = parse(&a.side)?;
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(usage(format!("--level must lie in (0, 1), got {}", a.level)));
    }
    let l = load(&a.data)?;
    let (interval, centre): (Interval, EstimateResult) = match a.method {
        CiMethodArg::Saddlepoint => {
            let r = estimate(&l.data, Method::Aqmle, opts)?;
            let (a1, a2) = match side {
                Side::Two => (0.5 * (1.0 - a.level), 0.5 * (1.0 - a.level)),
                Side::Right => (0.0, 1.0 - a.level),
            };
            (saddlepoint_ci(&l.data, r.lambda_hat, a1, a2)?, r)
        }
        CiMethodArg::Wald => {
            let (r, sys) = run_estimate(&l, &a.estimator, opts)?;
            (wald_ci(sys.as_ref().unwrap_or(&l.data), &r, a.level, side)?, r)
        }
    };
    emit(
        &json!({
            "method": format!("{:?}", a.method).to_lowercase(),
            "side": side,
            "level": a.level,
            "lambda_hat": centre.lambda_hat,
            "interval": interval,
        }),
        a.data.out.as_deref(),
    )
}

fn write_outputs(prefix: &Path, json_text: &str, csv_text: &str) -> CliResult<()> {
    let io = |p: PathBuf, s: &str| std::fs::write(&p, s).map_err(|e| usage(format!("{}: {e}", p.display())));
    io(prefix.with_extension("json"), json_text)?;
    io(prefix.with_extension("csv"), csv_text)
}

fn row_csv(row: &SummaryRow) -> String {
    let f = row_fields(row);
    let head: Vec<&str> = f.iter().map(|(k, _)| k.as_str()).collect();
    let vals: Vec<&str> = f.iter().map(|(_, v)| v.as_str()).collect();
    format!("{}\n{}\n", head.join(","), vals.join(","))
}

fn simulate(a: &SimulateArgs, cfg: &RunConfig, seed: Option<u64>) -> CliResult<()> {
    let mut exp = cfg.experiment.clone().ok_or_else(|| usage("simulate needs an [experiment] table in --config"))?;
    if let Some(s) = seed.or(cfg.seed) {
        exp.seed = s;
    }
    if let Some(r) = a.reps {
        exp.reps = r;
    }
    let row = if exp.ci_methods.is_empty() { run_bias_experiment(&exp)? } else { run_coverage_experiment(&exp)? };
    let text = serde_json::to_string_pretty(&row).map_err(|e| CliError::Numeric(e.to_string()))?;
    say(&format!("{text}\n"))?;
    if let Some(p) = &a.out {
        write_outputs(p, &(text + "\n"), &row_csv(&row))?;
    }
    Ok(())
}

fn replicate(a: &ReplicateArgs, seed: u64) -> CliResult<()> {
    let id: TableId = parse(&a.table)?;
    let report = replicate_table_with(id, a.scale, seed, |i, row| {
        eprintln!("cell {i}: {} reps, {} failed", row.config.reps, row.failed_reps);
    })?;
    let csv = report.to_csv();
    say(&csv)?;
    if let Some(p) = &a.out {
        write_outputs(p, &(report.to_json()? + "\n"), &csv)?;
    }
    Ok(())
}
