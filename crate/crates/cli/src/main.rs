//! Experiment runner for the propspeed toolkit.
//!
//! Each subcommand reads a strict TOML config, runs its verification
//! grid, and writes one CSV of rows plus one JSON summary into `--out`.
//! Reruns with the same config are byte-identical. Exit status: 0 when
//! every asserted inequality held, 1 when any row failed, 2 for
//! configuration or resource errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod experiments;
mod render;

use config::{Kind, Mode};
use experiments::{RunContext, RunOutcome};

/// Dense-oracle size cap when `PROPSPEED_ORACLE_LIMIT` is unset.
const DEFAULT_ORACLE_LIMIT: usize = 4096;

#[derive(Parser)]
#[command(
    name = "propspeed",
    version,
    about = "Locality experiments for lattice Schrodinger operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact vanishing of moments below the support separation.
    Propagation(RunArgs),
    /// Kernel decay of f(H) against the smoothness-based bound.
    KernelDecay(RunArgs),
    /// Stability of smoothed spectral data under far-away potential edits.
    SpectralLocality(RunArgs),
    /// Cosine-transform coefficient and tail bounds for window profiles.
    CosineBounds(RunArgs),
    /// Exact derivative-coefficient table of the square-root substitution.
    Gevrey(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the CSV and JSON artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Arithmetic mode; overrides the config file.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

impl Command {
    fn kind(&self) -> Kind {
        match self {
            Command::Propagation(_) => Kind::Propagation,
            Command::KernelDecay(_) => Kind::KernelDecay,
            Command::SpectralLocality(_) => Kind::SpectralLocality,
            Command::CosineBounds(_) => Kind::CosineBounds,
            Command::Gevrey(_) => Kind::GevreyCoefficients,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Propagation(a)
            | Command::KernelDecay(a)
            | Command::SpectralLocality(a)
            | Command::CosineBounds(a)
            | Command::Gevrey(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(outcome) => {
            if outcome.pass {
                println!(
                    "ok: all asserted inequalities hold ({}, {})",
                    outcome.csv.display(),
                    outcome.json.display()
                );
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "FAIL: at least one asserted inequality was violated; see {}",
                    outcome.json.display()
                );
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<RunOutcome> {
    let kind = cli.command.kind();
    let args = cli.command.args();
    let cfg = config::load_config(&args.config)?;
    if cfg.kind != kind {
        anyhow::bail!(
            "config kind `{}` does not match the `{}` subcommand",
            cfg.kind.name(),
            kind.name()
        );
    }
    let mode = resolve_mode(kind, args.mode.or(cfg.mode))?;
    let oracle_limit = oracle_limit_from_env()?;
    std::fs::create_dir_all(&args.out)?;
    let ctx = RunContext {
        config: &cfg,
        mode,
        out_dir: &args.out,
        oracle_limit,
    };
    match kind {
        Kind::Propagation => experiments::propagation::run(&ctx),
        Kind::KernelDecay => experiments::kernel::run(&ctx),
        Kind::SpectralLocality => experiments::locality::run(&ctx),
        Kind::CosineBounds => experiments::cosine::run(&ctx),
        Kind::GevreyCoefficients => experiments::gevrey::run(&ctx),
    }
}

/// Propagation accepts both arithmetic modes (default exact); the float
/// pipelines (eigensolver, quadrature) run float only; the coefficient
/// table is integer arithmetic, i.e. exact only.
fn resolve_mode(kind: Kind, requested: Option<Mode>) -> anyhow::Result<Mode> {
    let (supported, default): (&[Mode], Mode) = match kind {
        Kind::Propagation => (&[Mode::Exact, Mode::Float], Mode::Exact),
        Kind::KernelDecay | Kind::SpectralLocality | Kind::CosineBounds => {
            (&[Mode::Float], Mode::Float)
        }
        Kind::GevreyCoefficients => (&[Mode::Exact], Mode::Exact),
    };
    let mode = requested.unwrap_or(default);
    if !supported.contains(&mode) {
        anyhow::bail!(
            "{} only runs in {} mode, got `{}`",
            kind.name(),
            default.name(),
            mode.name()
        );
    }
    Ok(mode)
}

fn oracle_limit_from_env() -> anyhow::Result<usize> {
    match std::env::var("PROPSPEED_ORACLE_LIMIT") {
        Ok(text) => {
            let limit: usize = text.trim().parse().map_err(|_| {
                anyhow::anyhow!("PROPSPEED_ORACLE_LIMIT must be a positive integer, got `{text}`")
            })?;
            if limit == 0 {
                anyhow::bail!("PROPSPEED_ORACLE_LIMIT must be positive");
            }
            Ok(limit)
        }
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_ORACLE_LIMIT),
        Err(e) => Err(anyhow::anyhow!("PROPSPEED_ORACLE_LIMIT: {e}")),
    }
}
