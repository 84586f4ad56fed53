//! Command implementations behind the `smurf` binary.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 I/O failure while
//! writing outputs, 4 numeric abort. Human-readable output goes to stderr;
//! stdout carries a JSON summary only when `--json` is given.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use smurf::io::{effect_csv, read_draws, surface_csv, write_atomic, write_draws, Detection, FitDocument};
use smurf::sweep::{sweep_csv, sweep_outcomes, tabulate};
use smurf::{
    detect_learning, fit_em_observed, simulate_raster, summarize, BaselineSpec, FitConfig, Raster,
    SimConfig, SmurfError, SweepConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub const FIT_FILE: &str = "fit.json";
pub const DRAWS_FILE: &str = "draws.bin";

#[derive(Debug, Parser)]
#[command(name = "smurf", version, about = "Two-dimensional state-space analysis of spike rasters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a conditioning-experiment raster.
    Simulate(SimulateArgs),
    /// Fit the model to a raster by Monte-Carlo EM.
    Fit(FitArgs),
    /// Turn a fit with draws into effect curves, probability map and detection.
    Summarize(SummarizeArgs),
    /// Run the detection sensitivity sweep over firing-rate ratios.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed; overrides the config file. Falls back to SMURF_SEED.
    #[arg(long, env = "SMURF_SEED")]
    pub seed: Option<u64>,
    /// Worker threads. 1 gives bit-reproducible output.
    #[arg(long, default_value_t = 1, value_parser = parse_jobs)]
    pub jobs: usize,
    /// Print a JSON summary on stdout.
    #[arg(long)]
    pub json: bool,
}

fn parse_jobs(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected a positive worker count, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output raster JSON file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct RasterLandmarks {
    /// Bin width in seconds (CSV rasters only).
    #[arg(long)]
    pub delta_s: Option<f64>,
    /// First post-cue bin, 1-based (CSV rasters only).
    #[arg(long)]
    pub cue_bin: Option<usize>,
    /// First conditioning trial, 1-based (CSV rasters only).
    #[arg(long)]
    pub cond_start_trial: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Raster as JSON, or CSV with one row per trial.
    #[arg(long)]
    pub raster: PathBuf,
    /// Fit config (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the retained draws, needed by `summarize`.
    #[arg(long)]
    pub draws_sidecar: bool,
    #[command(flatten)]
    pub landmarks: RasterLandmarks,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// fit.json written by `fit --draws-sidecar`.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub raster: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Trials forming the baseline; defaults to those before conditioning.
    #[arg(long)]
    pub baseline_trials: Option<usize>,
    /// Bins forming the baseline; defaults to those before the cue.
    #[arg(long)]
    pub baseline_bins: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    #[command(flatten)]
    pub landmarks: RasterLandmarks,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

/// A failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<SmurfError> for CliError {
    fn from(e: SmurfError) -> Self {
        let code = match e {
            SmurfError::NumericAbort(_) => EXIT_NUMERIC,
            SmurfError::Io(_) => EXIT_IO,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(msg: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_INPUT,
        message: msg.into(),
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError {
        code: EXIT_IO,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError {
        code: EXIT_IO,
        message: format!("cannot create {}: {e}", dir.display()),
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn load_raster(path: &Path, lm: &RasterLandmarks) -> Result<Raster, CliError> {
    let text = read_input(path)?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        match (lm.delta_s, lm.cue_bin, lm.cond_start_trial) {
            (Some(d), Some(c), Some(s)) => Ok(Raster::from_csv(&text, d, c, s)?),
            _ => Err(input_error(
                "CSV rasters need --delta-s, --cue-bin and --cond-start-trial",
            )),
        }
    } else {
        Ok(Raster::from_json(&text)?)
    }
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Simulate,
    Fit,
    Summarize,
    Sweep,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: CommandKind,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

impl RunManifest {
    fn start(command: CommandKind, config_path: Option<PathBuf>, seed: u64) -> Self {
        RunManifest {
            command,
            config_path,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: unix_ms(),
            finished_unix_ms: 0,
        }
    }

    fn finish(mut self, path: &Path) -> Result<RunManifest, CliError> {
        self.finished_unix_ms = unix_ms();
        write_output(path, &to_json(&self))?;
        Ok(self)
    }
}

fn with_pool<T>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| input_error(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn emit_json(common: &Common, value: serde_json::Value) {
    if common.json {
        println!("{value}");
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut cfg: SimConfig = match &args.config {
        Some(p) => parse_json(p)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    let mut manifest = RunManifest::start(CommandKind::Simulate, args.config.clone(), cfg.seed);
    let raster = simulate_raster(&cfg, &mut smurf::rng_from_seed(cfg.seed))?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let mut text = raster.to_json()?;
    text.push('\n');
    write_output(&args.out, text.as_bytes())?;
    manifest.outputs.push(args.out.clone());
    let stem = args
        .out
        .file_stem()
        .map_or_else(|| "raster".into(), |s| s.to_string_lossy().into_owned());
    let manifest = manifest.finish(&args.out.with_file_name(format!("{stem}.manifest.json")))?;
    eprintln!(
        "simulated {} bins x {} trials ({} events) -> {}",
        raster.n_bins,
        raster.n_trials,
        raster.total_events(),
        args.out.display()
    );
    emit_json(&args.common, json!({ "manifest": manifest, "total_events": raster.total_events() }));
    Ok(())
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let raster = load_raster(&args.raster, &args.landmarks)?;
    let mut cfg: FitConfig = match &args.config {
        Some(p) => parse_json(p)?,
        None => FitConfig::default(),
    };
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let mut manifest = RunManifest::start(CommandKind::Fit, args.config.clone(), cfg.seed);
    manifest.inputs.push(args.raster.clone());
    ensure_dir(&args.out_dir)?;

    let fit = with_pool(args.common.jobs, || {
        fit_em_observed(&raster, &cfg, |e| {
            eprintln!(
                "iteration {:>3}: sigma2_eps {:.6e}  sigma2_del {:.6e}",
                e.iteration, e.sigma2_eps, e.sigma2_del
            )
        })
    })??;

    let sidecar = args.draws_sidecar.then(|| DRAWS_FILE.to_string());
    if sidecar.is_some() {
        let mut buf = Vec::new();
        write_draws(&mut buf, &fit.draws)?;
        let path = args.out_dir.join(DRAWS_FILE);
        write_output(&path, &buf)?;
        manifest.outputs.push(path);
    }
    let doc = FitDocument::from_fit(&fit, cfg.seed, sidecar);
    let path = args.out_dir.join(FIT_FILE);
    let mut text = doc.to_json()?;
    text.push('\n');
    write_output(&path, text.as_bytes())?;
    manifest.outputs.push(path);
    let manifest = manifest.finish(&args.out_dir.join("fit.manifest.json"))?;
    eprintln!(
        "{} after {} iterations: sigma2_eps {:.6e}, sigma2_del {:.6e}",
        if fit.converged { "converged" } else { "not converged" },
        fit.iterations,
        fit.params_hat.sigma2_eps,
        fit.params_hat.sigma2_del
    );
    emit_json(
        &args.common,
        json!({
            "converged": fit.converged,
            "iterations": fit.iterations,
            "params_hat": fit.params_hat,
            "manifest": manifest,
        }),
    );
    Ok(())
}

pub fn cmd_summarize(args: &SummarizeArgs) -> Result<(), CliError> {
    let doc = FitDocument::from_json(&read_input(&args.fit)?)?;
    let raster = load_raster(&args.raster, &args.landmarks)?;
    let sidecar_name = doc
        .draws_sidecar
        .as_deref()
        .ok_or_else(|| input_error("fit result has no draws sidecar; refit with --draws-sidecar"))?;
    let sidecar = args.fit.with_file_name(sidecar_name);
    let bytes = fs::read(&sidecar)
        .map_err(|e| input_error(format!("cannot read draws sidecar {}: {e}", sidecar.display())))?;
    let draws = read_draws(bytes.as_slice(), doc.draws_params, doc.burn_in_discarded, doc.seed)?;
    draws.check_against(&raster)?;

    let defaults = BaselineSpec::from_raster(&raster)?;
    let baseline = BaselineSpec {
        baseline_trials: args.baseline_trials.unwrap_or(defaults.baseline_trials),
        baseline_bins: args.baseline_bins.unwrap_or(defaults.baseline_bins),
    };
    baseline.validate(raster.n_bins, raster.n_trials)?;
    let mut manifest = RunManifest::start(CommandKind::Summarize, None, doc.seed);
    manifest.inputs.extend([args.fit.clone(), sidecar, args.raster.clone()]);
    ensure_dir(&args.out_dir)?;

    let (summary, learning) = with_pool(args.common.jobs, || -> smurf::Result<_> {
        let s = summarize(&draws, &baseline, raster.delta_s)?;
        let l = detect_learning(&s.prob_map, &baseline, args.threshold)?;
        Ok((s, l))
    })??;
    let detection = Detection::new(learning, raster.cue_bin, raster.delta_s, args.threshold);
    let outputs: [(&str, Vec<u8>); 5] = [
        ("prob_map.csv", surface_csv(&summary.prob_map).into_bytes()),
        ("cif_mean.csv", surface_csv(&summary.cif_mean).into_bytes()),
        ("wt_effect.csv", effect_csv(&summary.wt_effect).into_bytes()),
        ("ct_effect.csv", effect_csv(&summary.ct_effect).into_bytes()),
        ("detection.json", to_json(&detection)),
    ];
    for (name, bytes) in &outputs {
        let path = args.out_dir.join(name);
        write_output(&path, bytes)?;
        manifest.outputs.push(path);
    }
    let manifest = manifest.finish(&args.out_dir.join("summarize.manifest.json"))?;
    match learning {
        Some(l) => eprintln!(
            "learning detected at trial {}, bin {} ({:.1} ms after cue)",
            l.learning_trial,
            l.learning_bin,
            l.learning_time_ms(raster.cue_bin, raster.delta_s)
        ),
        None => eprintln!("no learning detected at threshold {}", args.threshold),
    }
    emit_json(&args.common, json!({ "detection": detection, "manifest": manifest }));
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mut cfg: SweepConfig = parse_json(&args.config)?;
    if let Some(seed) = args.common.seed {
        cfg.base.seed = seed;
    }
    cfg.validate()?;
    let mut manifest = RunManifest::start(CommandKind::Sweep, Some(args.config.clone()), cfg.base.seed);
    ensure_dir(&args.out_dir)?;
    eprintln!(
        "sweeping {} rates x {} replicates on {} worker(s)",
        cfg.conditioned_rates_hz.len(),
        cfg.replicates,
        args.common.jobs
    );
    let outcomes = with_pool(args.common.jobs, || sweep_outcomes(&cfg))??;
    let rows = tabulate(&cfg, &outcomes);
    let path = args.out_dir.join("sweep.csv");
    write_output(&path, sweep_csv(&rows).as_bytes())?;
    manifest.outputs.push(path);
    let manifest = manifest.finish(&args.out_dir.join("sweep.manifest.json"))?;
    for r in &rows {
        eprintln!(
            "rate {:>6.1} Hz (ratio {:.2}): {} detections, mean delay {:.1} ms, mean trial {:.1}",
            r.conditioned_rate_hz, r.ratio, r.detections, r.mean_learning_time_ms, r.mean_learning_trial
        );
    }
    emit_json(&args.common, json!({ "rows": rows, "manifest": manifest }));
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
