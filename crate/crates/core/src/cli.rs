//! The `displace` command line.
//!
//! Every command reads and validates all of its inputs, computes its result in
//! memory, and only then writes the output file together with `run_meta.json`
//! in the same directory. Files are staged under temporary names and renamed
//! into place, so a failed run leaves existing outputs untouched.
//!
//! Exit status: 0 on success, 1 for unreadable or malformed input, 2 when the
//! data does not satisfy a computation's preconditions, 3 when writing fails.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::correlation::{aggregate_flow, lag_sweep, CorrelationError};
use crate::estimator::{estimate, to_absolute, EstimatorInput, DEFAULT_TOTAL_POPULATION};
use crate::ingest::{self, format_value, IngestError, ParseOptions, OUTPUT_DIGITS};
use crate::model::{round_sig, CountryCode, DailySeries, EventWindow, ModelError, YearMonth};
use crate::synth::{self, GroundTruth, SynthError};
use crate::timeseries::{self, SeriesError};

pub const META_FILE: &str = "run_meta.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Compute(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Compute(_) => "computation",
            CliError::Io(_) => "io",
        }
    }

    /// One-line JSON description written to stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() })
            .to_string()
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<CorrelationError> for CliError {
    fn from(e: CorrelationError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidTruth(_) => CliError::Input(e.to_string()),
            other => CliError::Compute(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "displace",
    version,
    about = "Map displaced populations from Internet measurement data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-country presence estimate from site analytics.
    Estimate(EstimateArgs),
    /// Extract a daily trend series, optionally as a ratio or max-normalized.
    Trend(TrendArgs),
    /// Mean level before and after an event date.
    Change(ChangeArgs),
    /// Pearson correlation of a series with border-crossing flows over a lag range.
    Correlate(CorrelateArgs),
    /// Daily connected-probe counts with baseline and post-event statistics.
    Probes(ProbesArgs),
    /// Rank changes between two months.
    Ranks(RanksArgs),
    /// Check the estimator against seeded synthetic samples.
    SynthValidate(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Trend(_) => "trend",
            Command::Change(_) => "change",
            Command::Correlate(_) => "correlate",
            Command::Probes(_) => "probes",
            Command::Ranks(_) => "ranks",
            Command::SynthValidate(_) => "synth-validate",
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// site_analytics.json
    #[arg(long)]
    pub sites: PathBuf,
    /// Site to leave out (repeatable).
    #[arg(long = "exclude")]
    pub exclude: Vec<String>,
    /// File listing sites to leave out, one per line.
    #[arg(long)]
    pub exclude_file: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOTAL_POPULATION)]
    pub total_population: f64,
    /// Share values in the input are percentages.
    #[arg(long)]
    pub percent: bool,
    /// Keep the ZZ rest-of-world row in the output table.
    #[arg(long)]
    pub include_rest: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["shares", "traffic"]))]
pub struct TrendArgs {
    /// share_series.csv; requires --country, --metric and --key.
    #[arg(long, requires_all = ["country", "metric", "key"])]
    pub shares: Option<PathBuf>,
    /// traffic.csv; intraday samples are reduced to daily peaks.
    #[arg(long)]
    pub traffic: Option<PathBuf>,
    #[arg(long)]
    pub country: Option<CountryCode>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub key: Option<String>,
    /// Divide by the series of this key (same country and metric).
    #[arg(long, requires = "shares")]
    pub denominator_key: Option<String>,
    /// Divide the result by its maximum.
    #[arg(long)]
    pub normalize: bool,
    /// Share values in the input are percentages.
    #[arg(long)]
    pub percent: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChangeArgs {
    /// traffic.csv; intraday samples are reduced to daily peaks.
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long)]
    pub event: NaiveDate,
    /// Days in the pre-event window.
    #[arg(long)]
    pub pre: u32,
    /// Days in the post-event window, starting on the event date.
    #[arg(long)]
    pub post: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// flows.csv
    #[arg(long)]
    pub flows: PathBuf,
    /// traffic.csv; intraday samples are reduced to daily peaks.
    #[arg(long)]
    pub series: PathBuf,
    /// Only count crossings into this country.
    #[arg(long)]
    pub destination: Option<CountryCode>,
    #[arg(long, default_value_t = -14, allow_negative_numbers = true)]
    pub min_lag: i64,
    #[arg(long, default_value_t = 14, allow_negative_numbers = true)]
    pub max_lag: i64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProbesArgs {
    /// probes.csv
    #[arg(long)]
    pub probes: PathBuf,
    #[arg(long, requires = "baseline_end")]
    pub baseline_start: Option<NaiveDate>,
    #[arg(long, requires = "baseline_start")]
    pub baseline_end: Option<NaiveDate>,
    #[arg(long, requires = "post")]
    pub event: Option<NaiveDate>,
    /// Days after the event (inclusive of it) to search for the minimum.
    #[arg(long, requires = "event")]
    pub post: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RanksArgs {
    /// ranks.csv
    #[arg(long)]
    pub ranks: PathBuf,
    #[arg(long)]
    pub country: CountryCode,
    #[arg(long)]
    pub from: YearMonth,
    #[arg(long)]
    pub to: YearMonth,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// synth.json ground truth.
    #[arg(long)]
    pub truth: PathBuf,
    /// Site volumes: site_analytics.json, `shares` optional.
    #[arg(long)]
    pub sites: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    /// Overrides the seed in the truth file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.01)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub output: PathBuf,
    pub meta: PathBuf,
}

struct Inputs {
    digests: Vec<Value>,
}

impl Inputs {
    fn new() -> Self {
        Inputs {
            digests: Vec::new(),
        }
    }

    fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        self.digests.push(json!({
            "path": path.display().to_string(),
            "sha256": hex::encode(Sha256::digest(&bytes)),
            "bytes": bytes.len(),
        }));
        Ok(bytes)
    }
}

fn input_err(path: &Path) -> impl Fn(IngestError) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

/// Rounds every float in a JSON tree to the output precision.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let f = round_sig(n.as_f64().unwrap_or(0.0), OUTPUT_DIGITS);
            json!(if f == 0.0 { 0.0 } else { f })
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn to_json_bytes(v: impl Serialize) -> Vec<u8> {
    let value = serde_json::to_value(v).expect("serializable output");
    let mut s = serde_json::to_string_pretty(&round_json(value)).expect("json");
    s.push('\n');
    s.into_bytes()
}

fn series_csv(series: &DailySeries) -> Vec<u8> {
    let mut out = String::from("date,value\n");
    for (d, v) in series.points() {
        out.push_str(&format!("{d},{}\n", format_value(*v)));
    }
    out.into_bytes()
}

fn load_daily(inputs: &mut Inputs, path: &Path) -> Result<DailySeries, CliError> {
    let bytes = inputs.read(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let traffic = ingest::parse_traffic_series(&bytes, &name).map_err(input_err(path))?;
    Ok(timeseries::to_daily(&traffic)?)
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<RunReport, CliError> {
    let mut inputs = Inputs::new();
    let (out, body, params) = match &cli.command {
        Command::Estimate(a) => run_estimate(a, &mut inputs)?,
        Command::Trend(a) => run_trend(a, &mut inputs)?,
        Command::Change(a) => run_change(a, &mut inputs)?,
        Command::Correlate(a) => run_correlate(a, &mut inputs)?,
        Command::Probes(a) => run_probes(a, &mut inputs)?,
        Command::Ranks(a) => run_ranks(a, &mut inputs)?,
        Command::SynthValidate(a) => run_synth(a, &mut inputs)?,
    };
    let meta = json!({
        "artifact": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "parameters": round_json(params),
        "inputs": inputs.digests,
        "digest_algorithm": "sha256",
        "output": out.file_name().map(|n| n.to_string_lossy().into_owned()),
        "number_format": "9 significant digits, shortest round-trip",
        "timestamp": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    });
    let mut meta_bytes = serde_json::to_string_pretty(&meta).expect("json");
    meta_bytes.push('\n');
    let meta_path = out.with_file_name(META_FILE);
    write_atomically(&[
        (out.clone(), body),
        (meta_path.clone(), meta_bytes.into_bytes()),
    ])?;
    Ok(RunReport {
        output: out.clone(),
        meta: meta_path,
    })
}

/// Stages every file next to its destination, then renames them into place.
fn write_atomically(files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    let mut staged = Vec::new();
    for (path, bytes) in files {
        let name = path
            .file_name()
            .ok_or_else(|| CliError::Io(format!("{}: not a file path", path.display())))?;
        let tmp = path.with_file_name(format!(
            ".{}.tmp{}",
            name.to_string_lossy(),
            std::process::id()
        ));
        if let Err(e) = fs::write(&tmp, bytes) {
            for t in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(io(path, e));
        }
        staged.push(tmp);
    }
    for (tmp, (path, _)) in staged.iter().zip(files) {
        fs::rename(tmp, path).map_err(|e| io(path, e))?;
    }
    Ok(())
}

type CommandOutput = (PathBuf, Vec<u8>, Value);

fn run_estimate(a: &EstimateArgs, inputs: &mut Inputs) -> Result<CommandOutput, CliError> {
    let bytes = inputs.read(&a.sites)?;
    let entries = ingest::parse_site_entries(&bytes, ParseOptions { percent: a.percent })
        .map_err(input_err(&a.sites))?;
    let mut exclusions = a.exclude.clone();
    if let Some(path) = &a.exclude_file {
        let text = String::from_utf8(inputs.read(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        exclusions.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from),
        );
    }
    let entries = ingest::filter_top_sites(entries, &exclusions)
        .map_err(|e| CliError::Compute(e.to_string()))?;
    let (shares, volumes) = ingest::site_pair(&entries).map_err(input_err(&a.sites))?;
    let est = to_absolute(
        estimate(&EstimatorInput::new(shares, volumes)?),
        a.total_population,
    )?;

    let absolute = est.absolute().expect("population attached");
    let mut csv = String::from("country,p_hat,stdev,binomial_stderr,absolute\n");
    for (i, c) in est.countries().iter().enumerate() {
        if c.is_rest() && !a.include_rest {
            continue;
        }
        csv.push_str(&format!(
            "{c},{},{},{},{}\n",
            format_value(est.p_hat()[i]),
            format_value(est.stdev()[i]),
            format_value(est.binomial_stderr()[i]),
            format_value(absolute[i]),
        ));
    }
    let params = json!({
        "sites_used": entries.len(),
        "excluded": exclusions,
        "total_population": a.total_population,
        "percent": a.percent,
        "include_rest": a.include_rest,
        "stdev": "volume-weighted cross-site standard deviation of per-site shares",
        "binomial_stderr": "sqrt(p_hat (1 - p_hat) / total monthly visits)",
    });
    Ok((a.out.clone(), csv.into_bytes(), params))
}

fn run_trend(a: &TrendArgs, inputs: &mut Inputs) -> Result<CommandOutput, CliError> {
    let series = match (&a.shares, &a.traffic) {
        (Some(path), _) => {
            let bytes = inputs.read(path)?;
            let recs = ingest::parse_share_series_with(&bytes, ParseOptions { percent: a.percent })
                .map_err(input_err(path))?;
            // clap enforces these alongside --shares.
            let country = a.country.expect("country");
            let metric = a.metric.as_deref().expect("metric");
            let num =
                timeseries::share_trend(&recs, country, metric, a.key.as_deref().expect("key"))?;
            match &a.denominator_key {
                Some(den) => timeseries::ratio_series(
                    &num,
                    &timeseries::share_trend(&recs, country, metric, den)?,
                )?,
                None => num,
            }
        }
        (None, Some(path)) => load_daily(inputs, path)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    let series = if a.normalize {
        timeseries::normalize_max(&series)?
    } else {
        series
    };
    let params = json!({
        "country": a.country.map(|c| c.to_string()),
        "metric": a.metric,
        "key": a.key,
        "denominator_key": a.denominator_key,
        "normalize": if a.normalize { "max" } else { "none" },
        "percent": a.percent,
        "points": series.len(),
    });
    Ok((a.out.clone(), series_csv(&series), params))
}

fn run_change(a: &ChangeArgs, inputs: &mut Inputs) -> Result<CommandOutput, CliError> {
    let series = load_daily(inputs, &a.series)?;
    let window = EventWindow::new(a.event, a.pre, a.post)?;
    let change = timeseries::window_change(&series, &window)?;
    let params = json!({
        "event": a.event.to_string(),
        "pre_days": a.pre,
        "post_days": a.post,
        "pre_window": [window.pre_range().0.to_string(), window.pre_range().1.to_string()],
        "post_window": [window.post_range().0.to_string(), window.post_range().1.to_string()],
        "gap_policy": "skip missing days",
    });
    Ok((a.out.clone(), to_json_bytes(change), params))
}

fn run_correlate(a: &CorrelateArgs, inputs: &mut Inputs) -> Result<CommandOutput, CliError> {
    let bytes = inputs.read(&a.flows)?;
    let mut flows = ingest::parse_flows(&bytes).map_err(input_err(&a.flows))?;
    if let Some(dest) = a.destination {
        flows.retain(|f| f.destination == dest);
    }
    let flow = aggregate_flow(&flows);
    let series = load_daily(inputs, &a.series)?;
    if a.min_lag > a.max_lag {
        return Err(CliError::Input(format!(
            "--min-lag {} exceeds --max-lag {}",
            a.min_lag, a.max_lag
        )));
    }
    let sweep = lag_sweep(&flow, &series, a.min_lag..=a.max_lag);
    let mut csv = String::from("lag_days,r,n\n");
    let mut skipped = Vec::new();
    for (lag, result) in &sweep {
        match result {
            Ok(c) => csv.push_str(&format!("{},{},{}\n", c.lag_days, format_value(c.r), c.n)),
            Err(e) => skipped.push(json!({ "lag_days": lag, "reason": e.to_string() })),
        }
    }
    if skipped.len() == sweep.len() {
        let first = sweep.into_iter().next().map(|(_, r)| r);
        return Err(match first {
            Some(Err(e)) => e.into(),
            _ => CliError::Compute("empty lag range".into()),
        });
    }
    let params = json!({
        "destination": a.destination.map(|c| c.to_string()),
        "min_lag": a.min_lag,
        "max_lag": a.max_lag,
        "lag_convention": "flow(t) paired with series(t + lag_days)",
        "statistic": "pearson",
        "skipped_lags": skipped,
    });
    Ok((a.out.clone(), csv.into_bytes(), params))
}

#[derive(Serialize)]
struct ProbeSummary {
    counts: Vec<ProbeCount>,
    baseline: Option<RangeStat>,
    post_event: Option<RangeStat>,
}

#[derive(Serialize)]
struct ProbeCount {
    date: String,
    connected: u64,
}

#[derive(Serialize)]
struct RangeStat {
    start: String,
    end: String,
    statistic: &'static str,
    value: f64,
}

fn run_probes(a: &ProbesArgs, inputs: &mut Inputs) -> Result<CommandOutput, CliError> {
    let bytes = inputs.read(&a.probes)?;
    let records = ingest::parse_probe_status(&bytes).map_err(input_err(&a.probes))?;
    let counts = timeseries::count_connected(&records);
    let baseline = match (a.baseline_start, a.baseline_end) {
        (Some(start), Some(end)) => Some(RangeStat {
            start: start.to_string(),
            end: end.to_string(),
            statistic: "mean",
            value: timeseries::mean_over(&counts, start, end)?,
        }),
        _ => None,
    };
    let post_event = match (a.event, a.post) {
        (Some(event), Some(post)) => {
            let (start, end) = EventWindow::new(event, 1, post)?.post_range();
            Some(RangeStat {
                start: start.to_string(),
                end: end.to_string(),
                statistic: "min",
                value: timeseries::min_over(&counts, start, end)?,
            })
        }
        _ => None,
    };
    let summary = ProbeSummary {
        counts: counts
            .points()
            .iter()
            .map(|(d, v)| ProbeCount {
                date: d.to_string(),
                connected: *v as u64,
            })
            .collect(),
        baseline,
        post_event,
    };
    let params = json!({
        "baseline_start": a.baseline_start.map(|d| d.to_string()),
        "baseline_end": a.baseline_end.map(|d| d.to_string()),
        "event": a.event.map(|d| d.to_string()),
        "post_days": a.post,
    });
    Ok((a.out.clone(), to_json_bytes(summary), params))
}

fn run_ranks(a: &RanksArgs, inputs: &mut Inputs) -> Result<CommandOutput, CliError> {
    let bytes = inputs.read(&a.ranks)?;
    let records = ingest::parse_ranks(&bytes).map_err(input_err(&a.ranks))?;
    let deltas = timeseries::rank_deltas(&records, a.country, a.from, a.to)?;
    let mut csv = String::from("country,kind,from_month,to_month,delta\n");
    for (kind, delta) in deltas {
        csv.push_str(&format!(
            "{},{kind},{},{},{delta}\n",
            a.country, a.from, a.to
        ));
    }
    let params = json!({
        "country": a.country.to_string(),
        "from": a.from.to_string(),
        "to": a.to.to_string(),
        "sign": "positive delta means ranked lower",
    });
    Ok((a.out.clone(), csv.into_bytes(), params))
}

fn run_synth(a: &SynthArgs, inputs: &mut Inputs) -> Result<CommandOutput, CliError> {
    let truth = GroundTruth::from_json(&inputs.read(&a.truth)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.truth.display())))?;
    let truth = match a.seed {
        Some(seed) => truth.with_seed(seed),
        None => truth,
    };
    let bytes = inputs.read(&a.sites)?;
    let volumes = ingest::parse_site_volumes(&bytes).map_err(input_err(&a.sites))?;
    let report = synth::validate(&truth, &volumes, a.trials, a.threshold)?;
    let params = json!({
        "trials": a.trials,
        "seed": truth.seed(),
        "threshold": a.threshold,
        "generator": "xoshiro256++ seeded by SplitMix64, site j jumped j times",
        "trial_seed": "seed + trial index",
        "volume_rounding": "round half up, at least one visit",
    });
    Ok((a.out.clone(), to_json_bytes(report), params))
}
