//! `vlfsim`: runs stop-feedback simulations and evaluates reference bounds.
//!
//! Subcommands:
//!
//! - `simulate --config FILE`: one code, every `k` in `k_sweep`.
//! - `sweep --config FILE`: every code in `codes` (default: the published
//!   memory 6/8/10 codes) times `k_sweep`, plus the reference curves in `kinds`.
//! - `bounds --config FILE`: reference curves only.
//! - `verify-code`: free-distance search against published distance spectra.
//!
//! Results are written under the output directory: one JSON object per run,
//! a combined CSV, and one CSV per curve. Every file carries the resolved
//! config, including the master seed, so a result can be regenerated from the
//! file alone. The worker count is not recorded because it never changes the
//! numbers.

pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use vlf_core::bounds::{capacity, curve};
use vlf_core::protocol::run_experiment;
use vlf_core::{AggregateStats, BoundCurve, ConvCodeSpec, CurveKind};

use config::{CodeEntry, ExperimentConfig, Overrides, Purpose};

#[derive(Debug, Parser)]
#[command(name = "vlfsim", version, about = "Stop-feedback convolutional coding simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one code over `k_sweep`.
    Simulate(RunArgs),
    /// Simulate several codes and emit the reference curves.
    Sweep(RunArgs),
    /// Evaluate reference curves.
    Bounds(RunArgs),
    /// Check free distances against the published values.
    VerifyCode(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials per configuration (overrides `num_trials`).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Output directory (overrides `output`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Codes from a config file (`nu`/`generators` or `codes`).
    #[arg(long, conflicts_with = "nu")]
    pub config: Option<PathBuf>,
    /// Memory of a single code; without `--generators` the published code.
    #[arg(long)]
    pub nu: Option<u32>,
    /// Three octal generators, comma separated.
    #[arg(long, value_delimiter = ',', requires = "nu")]
    pub generators: Option<Vec<String>>,
}

/// Runs a parsed command line. `Ok(false)` means some run failed or some
/// check did not pass; the details have already been reported.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(args) => with_config(args, Purpose::Simulate, |cfg, workers| {
            simulate(cfg, workers, "simulate")
        }),
        Command::Sweep(args) => with_config(args, Purpose::Sweep, |cfg, workers| {
            let sims = simulate(cfg, workers, "sweep")?;
            let curves = bounds(cfg)?;
            Ok(sims && curves)
        }),
        Command::Bounds(args) => with_config(args, Purpose::Bounds, |cfg, _| bounds(cfg)),
        Command::VerifyCode(args) => verify_codes(args),
    }
}

fn with_config(
    args: RunArgs,
    purpose: Purpose,
    body: impl FnOnce(&ExperimentConfig, usize) -> Result<bool> + Send,
) -> Result<bool> {
    let overrides = Overrides {
        seed: args.seed,
        trials: args.trials,
        out: args.out,
    };
    let cfg = config::load(&args.config)?
        .resolve(purpose, &overrides)
        .with_context(|| format!("invalid config {}", args.config.display()))?;
    let workers = match args.workers {
        Some(0) => anyhow::bail!("--workers must be positive"),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    std::fs::create_dir_all(&cfg.output)
        .with_context(|| format!("creating {}", cfg.output.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    pool.install(|| body(&cfg, workers))
}

#[derive(Serialize)]
struct RunResult<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
    code: &'a CodeEntry,
    k: usize,
    status: &'a str,
    error: Option<String>,
    stats: Option<AggregateStats>,
}

fn simulate(cfg: &ExperimentConfig, workers: usize, command: &str) -> Result<bool> {
    let mut rows = Vec::new();
    let mut all_ok = true;
    for code in &cfg.codes {
        for &k in &cfg.k_sweep {
            let result = run_experiment(&cfg.protocol(code, k), cfg.num_trials, workers);
            let (status, error, stats) = match result {
                Ok(stats) => ("ok", None, Some(stats)),
                Err(e) => {
                    all_ok = false;
                    eprintln!("{} k={k}: {e}", code.label());
                    ("error", Some(e.to_string()), None)
                }
            };
            if let Some(s) = &stats {
                eprintln!(
                    "{} k={k}: ell {:.3} R_t {:.4} P_UE {:.2e} ({} trials)",
                    code.label(),
                    s.ell_empirical,
                    s.rt,
                    s.p_ue,
                    s.num_trials
                );
            }
            let run = RunResult {
                command,
                config: cfg,
                code,
                k,
                status,
                error,
                stats,
            };
            output::write_json(&cfg.output.join(format!("{command}_{}_k{k}.json", code.label())), &run)?;
            rows.push(output::SimRow::new(code, k, run.status, run.stats.as_ref()));
        }
    }
    output::write_sim_csv(&cfg.output.join(format!("{command}.csv")), command, cfg, &rows)?;
    Ok(all_ok)
}

#[derive(Serialize)]
struct CurveResult {
    kind: CurveKind,
    status: &'static str,
    error: Option<String>,
    curve: Option<BoundCurve>,
}

#[derive(Serialize)]
struct BoundsResult<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
    capacity_bits: f64,
    curves: Vec<CurveResult>,
}

fn bounds(cfg: &ExperimentConfig) -> Result<bool> {
    let grid = cfg.grid();
    let mut curves = Vec::new();
    let mut all_ok = true;
    for &kind in &cfg.kinds {
        match curve(kind, &cfg.channel, cfg.epsilon, &grid, cfg.mc_options()) {
            Ok(c) => {
                for w in &c.warnings {
                    eprintln!("{}: warning: {w}", kind.name());
                }
                output::write_curve_csv(&cfg.output.join(format!("bounds_{}.csv", kind.name())), cfg, &c)?;
                curves.push(CurveResult {
                    kind,
                    status: "ok",
                    error: None,
                    curve: Some(c),
                });
            }
            Err(e) => {
                all_ok = false;
                eprintln!("{}: {e}", kind.name());
                curves.push(CurveResult {
                    kind,
                    status: "error",
                    error: Some(e.to_string()),
                    curve: None,
                });
            }
        }
    }
    let result = BoundsResult {
        command: "bounds",
        config: cfg,
        capacity_bits: capacity(&cfg.channel),
        curves,
    };
    output::write_json(&cfg.output.join("bounds.json"), &result)?;
    Ok(all_ok)
}

/// Outcome of checking one code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verification {
    pub spec: ConvCodeSpec,
    pub computed: Option<(u32, u64)>,
    pub expected: Option<(u32, u64)>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.computed.is_some() && self.computed == self.expected
    }
}

/// Computes the free distance of `spec` and compares it with the published
/// spectrum of the same code, or failing that of the published code with the
/// same memory.
pub fn verify_code(spec: &ConvCodeSpec) -> Verification {
    let computed = spec
        .trellis()
        .free_distance()
        .ok()
        .map(|fd| (fd.d_free, fd.multiplicity));
    let expected = spec
        .published()
        .or_else(|| config::published_code(spec.nu()).and_then(|c| c.published()))
        .map(|p| (p.d_free, p.a_dfree));
    Verification {
        spec: spec.clone(),
        computed,
        expected,
    }
}

fn verify_codes(args: VerifyArgs) -> Result<bool> {
    let specs: Vec<ConvCodeSpec> = if let Some(path) = &args.config {
        let raw = config::load(path)?;
        if raw.nu.is_some() && raw.codes.is_some() {
            anyhow::bail!("give either `nu`/`generators` or `codes`, not both");
        }
        match (raw.nu, raw.codes) {
            (Some(nu), _) => vec![config::resolve_code(nu, raw.generators.as_deref(), "generators")?],
            (None, Some(list)) => list
                .iter()
                .enumerate()
                .map(|(i, c)| config::resolve_code(c.nu, c.generators.as_deref(), &format!("codes[{i}]")))
                .collect::<Result<_>>()?,
            (None, None) => ConvCodeSpec::published_codes().to_vec(),
        }
    } else if let Some(nu) = args.nu {
        vec![config::resolve_code(nu, args.generators.as_deref(), "--generators")?]
    } else {
        ConvCodeSpec::published_codes().to_vec()
    };

    let mut all = true;
    for spec in &specs {
        let v = verify_code(spec);
        let show = |x: Option<(u32, u64)>| x.map_or("none".to_string(), |(d, a)| format!("({d}, {a})"));
        println!(
            "{} nu={} ({}): computed {} published {}",
            if v.passed() { "PASS" } else { "FAIL" },
            spec.nu(),
            spec.octal_generators().join(","),
            show(v.computed),
            show(v.expected),
        );
        all &= v.passed();
    }
    Ok(all)
}
