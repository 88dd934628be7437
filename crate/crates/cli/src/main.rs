//! `eqmeasure`: config-driven front end for the extremal-potential solvers.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 failed assertion,
//! 3 solver non-convergence.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eqmeasure_core::{presets, RunConfig};

use commands::{Context, Failure};

#[derive(Parser, Debug)]
#[command(
    name = "eqmeasure",
    version,
    about = "Extremal potentials and equilibrium measures on flat tori"
)]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Named configuration from the preset library.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Output directory (overrides `outputs.dir`).
    #[arg(long, global = true, env = "EQMEASURE_OUT")]
    out: Option<PathBuf>,

    /// Seed for random starts, directions and perturbations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for `sweep` (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Follow the β ladder to the extremal potentials.
    Solve,
    /// Solve the regularized system at a single β.
    SolveBeta {
        /// Overrides `solver.beta`.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Envelope of the weight for the (summed) form.
    Envelope,
    /// Defining conditions, bounds and regularity of the extremal solution.
    Check,
    /// Central-difference derivative of F against the pairing with μ_eq.
    Derivative,
    /// Solves from random starts and compares the results.
    Uniqueness,
    /// Resolution and β sweeps, run in parallel.
    Sweep,
    /// Lists the presets, or prints one.
    Presets { name: Option<String> },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SolveBeta { .. } => "solve-beta",
            Command::Envelope => "envelope",
            Command::Check => "check",
            Command::Derivative => "derivative",
            Command::Uniqueness => "uniqueness",
            Command::Sweep => "sweep",
            Command::Presets { .. } => "presets",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::load(path),
        (None, Some(name)) => presets::config(name),
        (None, None) => return Err("one of --config or --preset is required".into()),
    };
    let cfg = cfg.map_err(|e| format!("config error: {e}"))?;
    // fail before any solve if the data is invalid
    cfg.problem().map_err(|e| format!("config error: {e}"))?;
    Ok(cfg)
}

fn list_presets(name: Option<&str>) -> ExitCode {
    match name {
        None => {
            for n in presets::names() {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
        Some(n) => match presets::text(n) {
            Some(t) => {
                print!("{t}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("unknown preset `{n}`");
                ExitCode::from(1)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Command::Presets { name } = &cli.command {
        return list_presets(name.as_deref());
    }
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
    };
    let out = cli
        .out
        .clone()
        .or_else(|| config.outputs.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("eqmeasure-out"));
    let ctx = Context {
        config,
        out,
        seed: cli.seed,
        threads: cli.threads,
    };
    if let Err(e) = std::fs::create_dir_all(&ctx.out) {
        eprintln!("cannot create {}: {e}", ctx.out.display());
        return ExitCode::from(1);
    }

    let mut summary = ctx.summary(cli.command.name());
    let result = match &cli.command {
        Command::Solve => commands::solve(&ctx, &mut summary),
        Command::SolveBeta { beta } => commands::solve_beta(&ctx, &mut summary, *beta),
        Command::Envelope => commands::envelope(&ctx, &mut summary),
        Command::Check => commands::check(&ctx, &mut summary),
        Command::Derivative => commands::derivative(&ctx, &mut summary),
        Command::Uniqueness => commands::uniqueness(&ctx, &mut summary),
        Command::Sweep => commands::sweep(&ctx, &mut summary),
        Command::Presets { .. } => unreachable!(),
    };
    let code = match result {
        Ok(()) if summary.all_passed() => 0,
        Ok(()) => {
            summary.status = "assertion-failed".into();
            2
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
        Err(Failure::Io(msg)) => {
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
        Err(Failure::Solver(e)) => {
            summary.status = "solver-error".into();
            commands::diagnose(&mut summary, &e);
            3
        }
    };
    summary.exit_code = code;
    let text = summary.render();
    print!("{text}");
    let path = ctx.out.join("summary.txt");
    if let Err(e) = std::fs::write(&path, text) {
        eprintln!("cannot write {}: {e}", path.display());
        return ExitCode::from(1);
    }
    ExitCode::from(code as u8)
}
