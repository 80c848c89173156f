//! Batch driver for the `k3limit` pipeline.
//!
//! Each command writes a JSON summary `<out>/<group>_<action>.json` plus its
//! tables (CSV) and plots (SVG). Exit status is 0 when every contract
//! checked by the command holds, 1 when one fails or the computation errors,
//! and 2 for configuration errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use k3limit::periods::cache::{CacheRecord, PeriodCache, Residuals};
use k3limit::periods::{fiber_periods, PeriodPoint};
use k3limit::WeierstrassFibration;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub mod commands;
pub mod config;
pub mod output;

pub use config::JobConfig;

/// Exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const DEFAULT_OUT: &str = "k3limit-out";
pub const DEFAULT_CACHE_FILE: &str = "periods_cache.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] k3limit::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "k3limit", version, about = "Collapsed-limit geometry of elliptic K3 surfaces")]
pub struct Cli {
    /// JSON job configuration.
    #[arg(long, global = true, env = "K3LIMIT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "K3LIMIT_OUT")]
    pub out: Option<PathBuf>,
    /// Period cache file, or `off`.
    #[arg(long, global = true, env = "K3LIMIT_CACHE")]
    pub cache: Option<String>,
    #[arg(long, global = true, env = "K3LIMIT_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "K3LIMIT_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    Fibration {
        #[command(subcommand)]
        action: FibrationAction,
    },
    Periods {
        #[command(subcommand)]
        action: PeriodsAction,
    },
    Volume {
        #[command(subcommand)]
        action: VolumeAction,
    },
    Metric {
        #[command(subcommand)]
        action: MetricAction,
    },
    Sk {
        #[command(subcommand)]
        action: SkAction,
    },
    Semiflat {
        #[command(subcommand)]
        action: SemiflatAction,
    },
    /// Aggregates every JSON summary in the output directory.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum FibrationAction {
    /// Locates and classifies the singular fibers.
    Classify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum PeriodsAction {
    /// Periods and j-consistency at random regular fibers.
    Sample,
    /// Local monodromy and quasi-unipotence around every singular fiber.
    Monodromy,
    /// Single-valuedness of the untwisted sections after base change.
    Untwist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum VolumeAction {
    /// Fits the fiber-volume asymptotics at every singular fiber.
    Fit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum MetricAction {
    /// Builds the mesh hierarchy; checks area and the special Kähler density.
    Build,
    /// Distances between the configured base points.
    Distance,
    Diameter,
    /// Distances to and between the completion points.
    Completion,
    /// Length bound for circles around every puncture.
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum SkAction {
    /// Hessian, Monge-Ampère and Darboux checks on three charts.
    Check,
    /// Affine transitions: rebased series charts and loops around every fiber.
    Transitions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum SemiflatAction {
    /// Complex structure, volume identity and quaternionic relations at random points.
    Check,
    /// Decay of the rescaled translated holomorphic form.
    Scaling,
}

impl Command {
    /// `(group, action)`, also the summary file stem.
    pub fn name(&self) -> (&'static str, &'static str) {
        match self {
            Command::Fibration { action: FibrationAction::Classify } => ("fibration", "classify"),
            Command::Periods { action } => (
                "periods",
                match action {
                    PeriodsAction::Sample => "sample",
                    PeriodsAction::Monodromy => "monodromy",
                    PeriodsAction::Untwist => "untwist",
                },
            ),
            Command::Volume { action: VolumeAction::Fit } => ("volume", "fit"),
            Command::Metric { action } => (
                "metric",
                match action {
                    MetricAction::Build => "build",
                    MetricAction::Distance => "distance",
                    MetricAction::Diameter => "diameter",
                    MetricAction::Completion => "completion",
                    MetricAction::Bound => "bound",
                },
            ),
            Command::Sk { action } => (
                "sk",
                match action {
                    SkAction::Check => "check",
                    SkAction::Transitions => "transitions",
                },
            ),
            Command::Semiflat { action } => (
                "semiflat",
                match action {
                    SemiflatAction::Check => "check",
                    SemiflatAction::Scaling => "scaling",
                },
            ),
            Command::Report => ("report", ""),
        }
    }

    pub fn stem(&self) -> String {
        match self.name() {
            (g, "") => g.to_string(),
            (g, a) => format!("{g}_{a}"),
        }
    }
}

/// The JSON document every command writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub seed: u64,
    pub fibration: Option<String>,
    pub pass: bool,
    pub failures: Vec<String>,
    pub results: serde_json::Value,
}

/// What a command produced before it is wrapped into a [`Summary`].
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: serde_json::Value,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn check(&mut self, ok: bool, failure: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(failure());
        }
    }
}

/// Everything a command needs.
pub struct Context {
    pub config: JobConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub fibration: WeierstrassFibration,
    cache: Mutex<PeriodCache>,
}

impl Context {
    /// Periods at `y` in the canonical basis, through the cache.
    pub fn periods_at(&self, w: &WeierstrassFibration, y: Complex64) -> k3limit::Result<PeriodPoint> {
        let path_id = "direct";
        if let Some(p) = self.cache.lock().expect("cache lock").get(w.label(), y, path_id) {
            return Ok(p);
        }
        let p = fiber_periods(w, y)?;
        self.cache.lock().expect("cache lock").insert(CacheRecord {
            fibration: w.label().to_string(),
            y,
            pi1: p.pi1,
            pi2: p.pi2,
            path_id: path_id.to_string(),
            residuals: Residuals { j: p.j_defect(w) },
        });
        Ok(p)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn cache_stats(&self) -> (usize, usize) {
        let c = self.cache.lock().expect("cache lock");
        (c.hits(), c.misses())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    run_cli(cli)
}

fn resolve(cli: &Cli) -> Result<(JobConfig, PathBuf, u64), CliError> {
    let mut config = match &cli.config {
        Some(path) => JobConfig::load(path)?,
        None => JobConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(cache) = &cli.cache {
        config.cache = Some(cache.clone());
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    config.out = Some(out.clone());
    config.validate()?;
    if cli.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be positive".into()));
    }
    let seed = config.seed;
    Ok((config, out, seed))
}

fn open_cache(config: &JobConfig, out: &Path) -> Result<PeriodCache, CliError> {
    let path = match config.cache.as_deref() {
        Some("off") => return Ok(PeriodCache::disabled()),
        Some(p) => PathBuf::from(p),
        None => out.join(DEFAULT_CACHE_FILE),
    };
    PeriodCache::open(&path).map_err(|e| CliError::Config(format!("cache {}: {e}", path.display())))
}

pub fn run_cli(cli: Cli) -> i32 {
    let (config, out, seed) = match resolve(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    if cli.command == Command::Report {
        return match commands::report::run(&out) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("{e}");
                EXIT_CONFIG
            }
        };
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.jobs {
        pool = pool.num_threads(k);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start worker pool: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| execute(cli.command, config, out, seed)) {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_FAIL
        }
    }
}

fn execute(command: Command, config: JobConfig, out: PathBuf, seed: u64) -> Result<i32, CliError> {
    let fibration = config.fibration()?;
    fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
    let cache = open_cache(&config, &out)?;
    let ctx = Context {
        config,
        out,
        seed,
        fibration,
        cache: Mutex::new(cache),
    };
    let outcome = match commands::dispatch(&ctx, command) {
        Ok(o) => o,
        Err(CliError::Config(msg)) => return Err(CliError::Config(msg)),
        Err(e) => Outcome {
            results: serde_json::Value::Null,
            failures: vec![format!("error: {e}")],
        },
    };
    ctx.cache.lock().expect("cache lock").save()?;
    let (hits, misses) = ctx.cache_stats();
    if hits + misses > 0 {
        eprintln!("period cache: {hits} hits, {misses} misses");
    }
    let summary = Summary {
        command: format!("{} {}", command.name().0, command.name().1),
        seed,
        fibration: Some(ctx.fibration.label().to_string()),
        pass: outcome.failures.is_empty(),
        failures: outcome.failures,
        results: outcome.results,
    };
    output::write_json(&ctx.path(&format!("{}.json", command.stem())), &summary)?;
    if summary.pass {
        Ok(EXIT_PASS)
    } else {
        eprintln!("{}", serde_json::json!({ "failures": summary.failures }));
        Ok(EXIT_FAIL)
    }
}
