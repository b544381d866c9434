//! Command-line front end. Settings resolve as flag, then `--config` TOML
//! key, then built-in default.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use crate::adapter::FilmHead;
use crate::apcc::{self, Aggregation, ApccOptions, Correlation, OnsetParams, OnsetStatistic, WavDir};
use crate::cfm::{self, ToyConfig, ToyModel, ToyModelFile};
use crate::check;
use crate::error::Error;
use crate::report;
use crate::trace::parse_trace;
use crate::velocity::{CentroidMode, TracksDocument};

pub const LOG_ENV: &str = "PHYSFOLEY_LOG";

#[derive(Debug, Parser)]
#[command(name = "physfoley", version, about = "Physics conditioning, toy flow matching and audio-physics correlation")]
pub struct Cli {
    /// TOML file supplying defaults for any flag (snake_case keys).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate per-object metric speeds from a trace.
    Velocity(VelocityArgs),
    /// Zero-init transparency and gradient checks of the physics adapter.
    AdapterCheck(AdapterCheckArgs),
    /// Train the toy flow-matching model on the synthetic impact set.
    ToyTrain(ToyTrainArgs),
    /// Sample a trained toy model over the held-out (mass, speed) grid.
    ToyEval(ToyEvalArgs),
    /// Audio-physics correlation over annotated impacts.
    Apcc(ApccArgs),
    /// Re-emit an APCC report or a toy model's loss curve as CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct VelocityArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub centroid: Option<CentroidMode>,
}

#[derive(Debug, Args)]
pub struct AdapterCheckArgs {
    /// Seeds for the checks.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Random inputs per transparency check.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Entries per tensor for the sampled check at full size.
    #[arg(long)]
    pub sampled: Option<usize>,
    #[arg(long, value_enum)]
    pub film_head: Option<FilmHead>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct ToyTrainArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub conditioned: Option<Switch>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout_p: Option<f64>,
    #[arg(long, value_enum)]
    pub film_head: Option<FilmHead>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write the per-step loss curve as CSV.
    #[arg(long, value_name = "FILE")]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyEvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Grid points per axis (masses × speeds per class).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub sampler_steps: Option<usize>,
    #[arg(long, value_enum)]
    pub correlation: Option<Correlation>,
    /// Also write the JSON summary printed on stdout.
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApccArgs {
    #[arg(long, value_name = "FILE")]
    pub impacts: Option<PathBuf>,
    /// Tracks file from `velocity`; repeat for several videos.
    #[arg(long, value_name = "FILE")]
    pub tracks: Vec<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub gt_dir: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub gen_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write the per-event table.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub correlation: Option<Correlation>,
    #[arg(long, value_enum)]
    pub aggregation: Option<Aggregation>,
    #[arg(long, value_enum)]
    pub statistic: Option<OnsetStatistic>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub half_window_s: Option<f64>,
    /// Frames on each side of an impact for pre/post speeds.
    #[arg(long)]
    pub velocity_window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// APCC report.json or toy model.json.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Per-class table for a report, loss curve for a model.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also re-emit the APCC report JSON with rounded floats.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub centroid: Option<CentroidMode>,
    pub seeds: Option<Vec<u64>>,
    pub trials: Option<usize>,
    pub sampled: Option<usize>,
    pub film_head: Option<FilmHead>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub conditioned: Option<Switch>,
    pub samples: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub dropout_p: Option<f64>,
    pub loss_csv: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub grid: Option<usize>,
    pub sampler_steps: Option<usize>,
    pub summary: Option<PathBuf>,
    pub impacts: Option<PathBuf>,
    pub tracks: Option<Vec<PathBuf>>,
    pub gt_dir: Option<PathBuf>,
    pub gen_dir: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub correlation: Option<Correlation>,
    pub aggregation: Option<Aggregation>,
    pub statistic: Option<OnsetStatistic>,
    pub window: Option<usize>,
    pub hop: Option<usize>,
    pub half_window_s: Option<f64>,
    pub velocity_window: Option<usize>,
    pub input: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| {
                    let before = &text[..s.start.min(text.len())];
                    let line = before.matches('\n').count() + 1;
                    (line, s.start - before.rfind('\n').map_or(0, |i| i + 1) + 1)
                })
                .unwrap_or((0, 0));
            Error::Parse {
                source_name: path.display().to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut() {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        for p in [
            &mut self.trace,
            &mut self.out,
            &mut self.loss_csv,
            &mut self.model,
            &mut self.summary,
            &mut self.impacts,
            &mut self.gt_dir,
            &mut self.gen_dir,
            &mut self.csv,
            &mut self.input,
            &mut self.json,
        ] {
            fix(p);
        }
        if let Some(ts) = self.tracks.as_mut() {
            for t in ts.iter_mut().filter(|t| t.is_relative()) {
                *t = base.join(&*t);
            }
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(Error),
    /// A check ran but did not pass.
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing required argument --{flag} (flag or config key)")))
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    Ok(std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

fn print_json(value: &serde_json::Value) -> CliResult {
    let bytes = report::to_json_bytes(value)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

pub fn run(cli: Cli) -> CliResult {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Velocity(a) => velocity(a, cfg),
        Command::AdapterCheck(a) => adapter_check(a, cfg),
        Command::ToyTrain(a) => toy_train(a, cfg),
        Command::ToyEval(a) => toy_eval(a, cfg),
        Command::Apcc(a) => apcc_cmd(a, cfg),
        Command::Report(a) => report_cmd(a, cfg),
    }
}

fn velocity(a: VelocityArgs, cfg: FileConfig) -> CliResult {
    let trace_path = required(a.trace.or(cfg.trace), "trace")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let mode = a.centroid.or(cfg.centroid).unwrap_or_default();
    let trace = parse_trace(&trace_path)?;
    let doc = TracksDocument::from_trace(&trace, mode)?;
    report::write_json(&out, &doc)?;
    log::info!("wrote {} tracks to {}", doc.tracks.len(), out.display());
    Ok(())
}

fn adapter_check(a: AdapterCheckArgs, cfg: FileConfig) -> CliResult {
    let seeds = a.seeds.or(cfg.seeds).unwrap_or_else(|| vec![0, 1, 2]);
    let trials = a.trials.or(cfg.trials).unwrap_or(100);
    let sampled = a.sampled.or(cfg.sampled).unwrap_or(3);
    let film_head = a.film_head.or(cfg.film_head).unwrap_or_default();
    let full = ToyConfig {
        film_head,
        ..ToyConfig::default()
    };
    let reduced = ToyConfig {
        film_head,
        ..check::reduced_config()
    };
    let mut transparency = Vec::new();
    let mut gradients = Vec::new();
    for &seed in &seeds {
        transparency.push(check::transparency(&full, seed, trials)?);
        gradients.push(check::gradient(&reduced, seed, None)?);
        if sampled > 0 {
            gradients.push(check::gradient(&full, seed, Some(sampled))?);
        }
    }
    let max_err = gradients.iter().map(|g| g.max_rel_error).fold(0.0, f64::max);
    let mismatches: usize = transparency.iter().map(|t| t.mismatches).sum();
    let passed = mismatches == 0 && max_err < check::GRADCHECK_TOLERANCE;
    let summary = json!({
        "passed": passed,
        "max_rel_error": max_err,
        "tolerance": check::GRADCHECK_TOLERANCE,
        "transparency": transparency,
        "gradients": gradients,
    });
    if let Some(out) = a.out.or(cfg.out) {
        report::write_json(&out, &summary)?;
    }
    print_json(&summary)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "adapter check failed: {mismatches} transparency mismatches, max gradient error {max_err:e}"
        )))
    }
}

fn toy_train(a: ToyTrainArgs, cfg: FileConfig) -> CliResult {
    let out = required(a.out.or(cfg.out), "out")?;
    let d = ToyConfig::default();
    let config = ToyConfig {
        steps: a.steps.or(cfg.steps).unwrap_or(d.steps),
        samples: a.samples.or(cfg.samples).unwrap_or(d.samples),
        batch: a.batch.or(cfg.batch).unwrap_or(d.batch),
        lr: a.lr.or(cfg.lr).unwrap_or(d.lr),
        dropout_p: a.dropout_p.or(cfg.dropout_p).unwrap_or(d.dropout_p),
        film_head: a.film_head.or(cfg.film_head).unwrap_or(d.film_head),
        ..d
    };
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let conditioned = a.conditioned.or(cfg.conditioned).unwrap_or(Switch::On) == Switch::On;
    let (model, data) = cfm::init_model(&config, seed, conditioned)?;
    let run = cfm::train(model, &data)?;
    log::info!(
        "trained {} steps: loss {:.5} -> {:.5}",
        run.losses.len(),
        run.losses[0],
        run.losses[run.losses.len() - 1]
    );
    if let Some(p) = a.loss_csv.or(cfg.loss_csv) {
        report::write_atomic(&p, &report::loss_csv(&run.losses))?;
    }
    let file = run.model.to_file(run.losses);
    report::write_atomic(&out, &report::to_exact_json_bytes(&file)?)?;
    Ok(())
}

fn load_model(path: &Path) -> CliResult<(ToyModel, ToyModelFile)> {
    let bytes = read(path)?;
    let file: ToyModelFile =
        serde_json::from_slice(&bytes).map_err(|e| Error::from_json(path.display().to_string(), &e))?;
    Ok((ToyModel::from_file(&file)?, file))
}

fn toy_eval(a: ToyEvalArgs, cfg: FileConfig) -> CliResult {
    let model_path = required(a.model.or(cfg.model), "model")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let grid = a.grid.or(cfg.grid).unwrap_or(6);
    if grid < 2 {
        return Err(Error::validation("grid", "must be >= 2").into());
    }
    let (mut model, _) = load_model(&model_path)?;
    if let Some(n) = a.sampler_steps.or(cfg.sampler_steps) {
        model.config.sampler_steps = n;
        model.config.validate()?;
    }
    let rows = cfm::evaluate_grid(&model, grid)?;
    report::write_atomic(&out, &report::grid_csv(&rows))?;
    let summary = cfm::summarize(&rows, a.correlation.or(cfg.correlation).unwrap_or_default())?;
    if let Some(p) = a.summary.or(cfg.summary) {
        report::write_json(&p, &summary)?;
    }
    print_json(&serde_json::to_value(&summary).map_err(|e| Error::Evaluation(e.to_string()))?)
}

fn apcc_cmd(a: ApccArgs, cfg: FileConfig) -> CliResult {
    let impacts_path = required(a.impacts.or(cfg.impacts), "impacts")?;
    let tracks = if a.tracks.is_empty() { cfg.tracks.unwrap_or_default() } else { a.tracks };
    if tracks.is_empty() {
        return Err(CliError::Usage("missing required argument --tracks (flag or config key)".into()));
    }
    let gt_dir = required(a.gt_dir.or(cfg.gt_dir), "gt-dir")?;
    let gen_dir = required(a.gen_dir.or(cfg.gen_dir), "gen-dir")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let d = OnsetParams::default();
    let options = ApccOptions {
        onset: OnsetParams {
            window: a.window.or(cfg.window).unwrap_or(d.window),
            hop: a.hop.or(cfg.hop).unwrap_or(d.hop),
            half_window_s: a.half_window_s.or(cfg.half_window_s).unwrap_or(d.half_window_s),
            statistic: a.statistic.or(cfg.statistic).unwrap_or(d.statistic),
        },
        velocity_window: a.velocity_window.or(cfg.velocity_window).unwrap_or(3),
        correlation: a.correlation.or(cfg.correlation).unwrap_or_default(),
        aggregation: a.aggregation.or(cfg.aggregation).unwrap_or_default(),
    };
    let impacts = apcc::parse_impacts(&read(&impacts_path)?, &impacts_path.display().to_string())?;
    let docs = tracks
        .iter()
        .map(|p| {
            let doc: TracksDocument =
                serde_json::from_slice(&read(p)?).map_err(|e| Error::from_json(p.display().to_string(), &e))?;
            doc.validate()?;
            Ok(doc)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let report = apcc::evaluate(&impacts, &docs, &WavDir(&gt_dir), &WavDir(&gen_dir), options)?;
    report::write_json(&out, &report)?;
    if let Some(p) = a.csv.or(cfg.csv) {
        report::write_atomic(&p, &report::events_csv(&report.events))?;
    }
    log::info!(
        "APCC-delta {:.4} over {} classes ({} events, {} excluded)",
        report.apcc_delta,
        report.classes.len(),
        report.events.len(),
        report.excluded_events.len()
    );
    Ok(())
}

fn report_cmd(a: ReportArgs, cfg: FileConfig) -> CliResult {
    let input = required(a.input.or(cfg.input), "input")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let bytes = read(&input)?;
    let name = input.display().to_string();
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| Error::from_json(&name, &e))?;
    if value.get("loss_curve").is_some() {
        let file: ToyModelFile = serde_json::from_value(value).map_err(|e| Error::validation(&name, e.to_string()))?;
        report::write_atomic(&out, &report::loss_csv(&file.loss_curve))?;
    } else {
        let r = report::parse_report(&bytes, &name)?;
        report::write_atomic(&out, &report::classes_csv(&r.classes))?;
        if let Some(p) = a.json.or(cfg.json) {
            report::write_json(&p, &r)?;
        }
    }
    Ok(())
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Entry point: 0 on success, 1 with a JSON error on stderr for domain
/// failures, 2 for usage errors.
pub fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Domain(e)) => {
            let mut body = json!({ "kind": e.kind(), "message": e.to_string() });
            match &e {
                Error::Validation { field, .. } => body["field"] = json!(field),
                Error::Parse { source_name, line, column, .. } => {
                    body["source"] = json!(source_name);
                    body["line"] = json!(line);
                    body["column"] = json!(column);
                }
                Error::Io { path, .. } => body["path"] = json!(path.display().to_string()),
                _ => {}
            }
            eprintln!("{}", json!({ "error": body }));
            ExitCode::from(1)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("{}", json!({ "error": { "kind": "check", "message": msg } }));
            ExitCode::from(1)
        }
    }
}
