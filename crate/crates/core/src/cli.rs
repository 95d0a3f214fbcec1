//! Command-line front end.
//!
//! Settings resolve in the order flags > config file (`--config`, TOML) >
//! built-in defaults. The resolved settings are hashed and the hash, the
//! seed and the crate version are embedded in every file written.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::capacity::{capacity_lower_bound, stability_check, CapacityEstimate, StabilityReport};
use crate::covgain::{precompute_schedule, GainDesigner, GainSchedule};
use crate::error::{Error, Result};
use crate::harness::{
    export_results, import_results, mse_compare, run_montecarlo, write_svg, ComparisonSummary, ExportFormat,
    MonteCarloOptions,
};
use crate::linalg::spectral_norm;
use crate::model::{generate_paper_model, validate_model, ModelMeta, ModelParams, ModelSpec};

#[derive(Debug, Parser)]
#[command(name = "cikf", version, about = "Consensus+innovations distributed Kalman filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonFlags,
}

#[derive(Debug, Args)]
struct CommonFlags {
    /// TOML experiment configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Model family preset: `desk` or `paper`.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Result format: `csv` or `json`.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Worker threads. Affects speed only.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a model from a preset.
    Generate,
    /// Check the modeling assumptions of a model file.
    Validate { model: PathBuf },
    /// Design the gain schedule and write it with its theoretical MSE curve.
    Gains { model: PathBuf },
    /// Stability of the designed gains and a lower bound on tracking capacity.
    Capacity {
        model: PathBuf,
        /// Evaluation budget of the capacity search.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Monte-Carlo comparison of the distributed and centralized filters.
    Simulate { model: PathBuf, schedule: PathBuf },
    /// Steady-state summary of a simulation report.
    Compare { report: PathBuf },
}

/// Partial settings as read from a config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    /// Overrides of individual model-family parameters.
    pub params: Option<ParamOverrides>,
    /// Saved model to use instead of generating one.
    pub model: Option<PathBuf>,
    pub horizon: Option<usize>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub search_budget: Option<usize>,
    pub format: Option<String>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub state_dim: Option<usize>,
    pub agents: Option<usize>,
    pub obs_per_agent: Option<usize>,
    pub a_norm: Option<f64>,
    pub v_norm: Option<f64>,
    pub r_norm: Option<f64>,
    pub sigma0_norm: Option<f64>,
    pub edges: Option<usize>,
    pub dyn_degree: Option<usize>,
}

impl ParamOverrides {
    fn apply(&self, p: &mut ModelParams) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { p.$f = v; })* };
        }
        set!(state_dim, agents, obs_per_agent, a_norm, v_norm, r_norm, sigma0_norm, edges, dyn_degree);
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Relative paths inside the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
        Ok(ExperimentConfig {
            model: fix(cfg.model),
            output_dir: fix(cfg.output_dir),
            ..cfg
        })
    }
}

/// Fully resolved settings. Their hash identifies the experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub preset: String,
    pub params: ModelParams,
    pub model: Option<PathBuf>,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub search_budget: usize,
    pub format: String,
    /// Not part of the hash: it never changes results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

pub const DEFAULT_HORIZON: usize = 30;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_SEARCH_BUDGET: usize = 200;

impl Settings {
    fn resolve(flags: &CommonFlags, file: ExperimentConfig) -> Result<Self> {
        let preset = flags.preset.clone().or(file.preset).unwrap_or_else(|| "desk".into());
        let mut params = ModelParams::preset(&preset)?;
        if let Some(o) = &file.params {
            o.apply(&mut params);
        }
        let settings = Settings {
            preset,
            params,
            model: file.model,
            horizon: flags.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON),
            runs: flags.runs.or(file.runs).unwrap_or(DEFAULT_RUNS),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            output_dir: file.output_dir.unwrap_or_else(|| PathBuf::from(".")),
            search_budget: file.search_budget.unwrap_or(DEFAULT_SEARCH_BUDGET),
            format: flags.format.clone().or(file.format).unwrap_or_else(|| "csv".into()),
            threads: flags.threads.or(file.threads),
        };
        if settings.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if let Some(m) = &settings.model {
            if !m.exists() {
                return Err(Error::Config(format!("model file {} does not exist", m.display())));
            }
        }
        settings.format.parse::<ExportFormat>()?;
        Ok(settings)
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("settings serialize");
        hex::encode(Sha256::digest(&json))
    }

    fn meta(&self) -> ModelMeta {
        ModelMeta {
            version: crate::VERSION.into(),
            seed: Some(self.seed),
            config_hash: Some(self.hash()),
        }
    }

    fn output(&self, flag: &Option<PathBuf>, default_name: &str) -> PathBuf {
        flag.clone().unwrap_or_else(|| self.output_dir.join(default_name))
    }
}

/// Provenance header of JSON outputs.
#[derive(Debug, Serialize)]
struct Provenance<'a> {
    version: &'a str,
    seed: u64,
    config_hash: String,
}

#[derive(Debug, Serialize)]
struct CapacityOutput<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a>,
    model_hash: String,
    horizon: usize,
    stability: StabilityReport,
    capacity: CapacityEstimate,
}

#[derive(Debug, Serialize)]
struct CompareOutput<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a>,
    report_seed: u64,
    report_runs: usize,
    model_hash: String,
    summary: ComparisonSummary,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    /// A modeling assumption failed; the message names it.
    AssumptionFailed(String),
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(argv: I, stdout: &mut (dyn std::io::Write + Send), stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.kind().to_string();
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or(&msg).trim_start_matches("error: ");
            let _ = writeln!(stderr, "error: kind=usage message={}", one_line(first));
            return 2;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::AssumptionFailed(msg)) => {
            let _ = writeln!(stderr, "error: kind=assumption message={}", one_line(&msg));
            1
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: kind={} message={}", e.kind(), one_line(&e.to_string()));
            1
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn dispatch(cli: &Cli, out: &mut (dyn std::io::Write + Send)) -> Result<Outcome> {
    let file = match &cli.common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let settings = Settings::resolve(&cli.common, file)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = settings.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| execute(&cli.command, &cli.common, &settings, out))
}

fn load_model(path: &Path) -> Result<ModelSpec> {
    ModelSpec::load(path)
}

fn say(out: &mut (dyn std::io::Write + Send), line: String) {
    let _ = writeln!(out, "{line}");
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn execute(cmd: &Command, flags: &CommonFlags, s: &Settings, out: &mut (dyn std::io::Write + Send)) -> Result<Outcome> {
    let provenance = || Provenance {
        version: crate::VERSION,
        seed: s.seed,
        config_hash: s.hash(),
    };
    match cmd {
        Command::Generate => {
            let mut spec = match &s.model {
                Some(p) => load_model(p)?,
                None => generate_paper_model(&s.params, s.seed)?,
            };
            spec.meta = Some(s.meta());
            let path = s.output(&flags.output, "model.json");
            spec.save(&path)?;
            say(
                out,
                format!(
                    "wrote {} (M={} N={} |A|_2={:.6} hash={})",
                    path.display(),
                    spec.state_dim(),
                    spec.agents(),
                    spectral_norm(&spec.dynamics),
                    spec.hash()
                ),
            );
        }
        Command::Validate { model } => {
            let spec = load_model(model)?;
            let report = validate_model(&spec)?;
            for c in &report.checks {
                say(out, format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.assumption, c.detail));
            }
            say(out, format!("algebraic connectivity: {:e}", report.algebraic_connectivity));
            let failed = report.failures().next().map(|c| format!("{} failed: {}", c.assumption, c.detail));
            if let Some(msg) = failed {
                return Ok(Outcome::AssumptionFailed(msg));
            }
        }
        Command::Gains { model } => {
            let spec = load_model(model)?;
            let (mut schedule, _) = precompute_schedule(&spec, s.horizon)?;
            schedule.meta = Some(s.meta());
            let path = s.output(&flags.output, "schedule.bin");
            schedule.save(&path)?;
            // Theory curves only: a Monte-Carlo run with no trajectories.
            let mut report = run_montecarlo(&spec, &schedule, 0, s.horizon, s.seed, MonteCarloOptions::default())?;
            report.config_hash = Some(s.hash());
            let csv = theory_csv_path(&path);
            export_results(&report, &csv, ExportFormat::Csv)?;
            say(out, format!("wrote {} and {}", path.display(), csv.display()));
        }
        Command::Capacity { model, budget } => {
            let spec = load_model(model)?;
            let mut designer = GainDesigner::new(&spec)?;
            let mut last = designer.advance();
            for _ in 1..s.horizon {
                last = designer.advance();
            }
            let stability = stability_check(&last.0, designer.pseudo_model(), &last.1)?;
            let capacity =
                capacity_lower_bound(designer.pseudo_model(), designer.graph(), budget.unwrap_or(s.search_budget))?;
            let path = s.output(&flags.output, "capacity.json");
            let result = CapacityOutput {
                provenance: provenance(),
                model_hash: spec.hash(),
                horizon: s.horizon,
                stability,
                capacity,
            };
            write_json(&path, &result)?;
            say(
                out,
                format!(
                    "wrote {} (rho_pseudo={:.6} rho_state={:.6} stable={} capacity_lower={:e})",
                    path.display(),
                    result.stability.rho_pseudo,
                    result.stability.rho_state,
                    result.stability.stable(),
                    result.capacity.c_lower
                ),
            );
        }
        Command::Simulate { model, schedule } => {
            let spec = load_model(model)?;
            let sched = GainSchedule::load(schedule)?;
            let horizon = flags.horizon.unwrap_or(sched.horizon());
            let mut report = run_montecarlo(&spec, &sched, s.runs, horizon, s.seed, MonteCarloOptions::default())?;
            report.config_hash = Some(s.hash());
            let format: ExportFormat = s.format.parse()?;
            let ext = match format {
                ExportFormat::Csv => "csv",
                ExportFormat::Json => "json",
            };
            let path = s.output(&flags.output, &format!("results.{ext}"));
            export_results(&report, &path, format)?;
            let svg = path.with_extension("svg");
            write_svg(&report, &svg)?;
            say(out, format!("wrote {} and {}", path.display(), svg.display()));
        }
        Command::Compare { report } => {
            let rep = import_results(report)?;
            let summary = mse_compare(&rep)?;
            let result = CompareOutput {
                provenance: provenance(),
                report_seed: rep.seed,
                report_runs: rep.runs,
                model_hash: rep.model_hash.clone(),
                summary,
            };
            let text = serde_json::to_string_pretty(&result)?;
            match &flags.output {
                Some(p) => {
                    std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e))?;
                    say(out, format!("wrote {}", p.display()));
                }
                None => say(out, text),
            }
        }
    }
    Ok(Outcome::Ok)
}

/// `sched.bin` -> `sched.theory.csv`.
pub fn theory_csv_path(schedule: &Path) -> PathBuf {
    schedule.with_extension("theory.csv")
}
