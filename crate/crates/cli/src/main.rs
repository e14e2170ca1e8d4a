use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use prophetcomp::mc::TieBreak;

use prophetcomp_cli::commands::{self, CliError, QuantileArg};
use prophetcomp_cli::output::{render, Format, RunManifest, Tabular};

/// Single-threshold policies for multiple-selection i.i.d. prophet inequalities.
#[derive(Parser, Debug)]
#[command(name = "prophetcomp", version, about)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Worker threads for parallel engines (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Competitive ratio gamma = Q_{m,k}(k/n) / k of the best single threshold.
    Ratio {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
    },
    /// Bounds on the competition complexity beta_k(epsilon).
    Complexity {
        #[arg(long)]
        k: u64,
        #[arg(long, allow_negative_numbers = true)]
        epsilon: f64,
        /// Also report the finite-n value beta_{k,n}(epsilon).
        #[arg(long)]
        n: Option<u64>,
        /// Comma-separated list of n for finite-n values.
        #[arg(long, value_delimiter = ',')]
        n_grid: Vec<u64>,
    },
    /// Competition complexity needed to match the multi-threshold upper bounds, k = 1..5.
    Table1 {
        #[arg(long, default_value_t = 1000)]
        n: u64,
    },
    /// Numerically verify the optimal primal/dual certificates for one instance.
    Verify {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        /// Uniform grid size (k/n is always added).
        #[arg(long, default_value_t = 10_000)]
        grid: usize,
        /// Also solve the discretized LP with this many cells.
        #[arg(long)]
        lp_cells: Option<usize>,
        /// Random primal points tested against weak duality.
        #[arg(long, default_value_t = 200)]
        weak_trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare closed forms with a seeded Monte Carlo estimate.
    Simulate {
        /// Distribution, e.g. uniform:0,1 or atomwc:auto (grammar under --help).
        #[arg(long, long_help = prophetcomp_cli::distspec::GRAMMAR)]
        dist: String,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        /// Threshold quantile in [0, 1], or "auto" for k/n.
        #[arg(long, default_value = "auto", value_parser = commands::parse_quantile)]
        q: QuantileArg,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "uniform-noise")]
        tie_break: TieBreakArg,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TieBreakArg {
    None,
    UniformNoise,
}

impl From<TieBreakArg> for TieBreak {
    fn from(t: TieBreakArg) -> Self {
        match t {
            TieBreakArg::None => TieBreak::None,
            TieBreakArg::UniformNoise => TieBreak::UniformNoise,
        }
    }
}

fn emit<R: Serialize + Tabular>(format: Format, manifest: RunManifest, record: &R) {
    print!("{}", render(format, manifest, record));
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let fmt = cli.format;
    match cli.command {
        Command::Ratio { m, n, k } => {
            let r = commands::ratio(m, n, k)?;
            emit(
                fmt,
                RunManifest::new("ratio", json!({"m": m, "n": n, "k": k}), None),
                &r,
            );
        }
        Command::Complexity {
            k,
            epsilon,
            n,
            n_grid,
        } => {
            let params = json!({"k": k, "epsilon": epsilon, "n": n, "n_grid": n_grid});
            let r = commands::complexity(k, epsilon, n, n_grid)?;
            emit(fmt, RunManifest::new("complexity", params, None), &r);
        }
        Command::Table1 { n } => {
            let r = commands::table1(n)?;
            emit(fmt, RunManifest::new("table1", json!({"n": n}), None), &r);
        }
        Command::Verify {
            m,
            n,
            k,
            grid,
            lp_cells,
            weak_trials,
            seed,
        } => {
            let params = json!({"m": m, "n": n, "k": k, "grid": grid, "lp_cells": lp_cells, "weak_trials": weak_trials});
            let r = commands::verify(m, n, k, grid, lp_cells, weak_trials, seed)?;
            emit(fmt, RunManifest::new("verify", params, Some(seed)), &r);
            if !r.passed {
                return Err(CliError::Failed(r.failures().join("; ")));
            }
        }
        Command::Simulate {
            dist,
            m,
            n,
            k,
            q,
            trials,
            seed,
            tie_break,
        } => {
            let q_param = match q {
                QuantileArg::Auto => json!("auto"),
                QuantileArg::Value(v) => json!(v),
            };
            let params = json!({
                "dist": dist, "m": m, "n": n, "k": k, "q": q_param, "trials": trials, "tie_break": tie_break
            });
            let r = commands::simulate(&dist, m, n, k, q, trials, seed, tie_break.into())?;
            emit(fmt, RunManifest::new("simulate", params, Some(seed)), &r);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PROPHETCOMP_LOG", "error"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
