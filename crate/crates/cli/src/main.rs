//! 2D3V electromagnetic particle-in-cell simulator with interchangeable
//! parallel backends.

use anyhow::Result;
use clap::{Parser, Subcommand};
use empic_cli::bench::{run_bench, run_weakscale, BenchPlan};
use empic_cli::{cmd_compare, cmd_run, parse_quantities, RunOverrides};
use empic_core::backends::BackendKind;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "empic",
    about = "2D3V electromagnetic particle-in-cell simulator with seven parallel execution backends",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (built-in name or JSON path) under one backend.
    Run {
        scenario: String,
        /// serial | parallel-for | tasklike | reduction-sync | reduction-async
        /// | commutative-sync | commutative-async
        #[arg(long, default_value = "serial")]
        backend: BackendKind,
        /// Worker threads (default: EMPIC_WORKERS or one per physical core).
        #[arg(long)]
        workers: Option<usize>,
        /// Region count for the spatial backends.
        #[arg(long)]
        regions: Option<usize>,
        /// Override the scenario's step count.
        #[arg(long)]
        steps: Option<u32>,
        /// Override the scenario's PRNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Emit dumps and an energy record every N steps.
        #[arg(long)]
        dump_interval: Option<u32>,
        /// Comma-separated dump quantities (ex..ez, bx..bz, jx..jz, chargeN).
        #[arg(long, default_value = "bz")]
        quantities: String,
        /// Output root; files land in <out>/<scenario>-<backend>/.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Write an NDJSON schedule trace of the task runtime.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sweep a benchmark matrix described by a JSON plan; writes bench.csv.
    Bench {
        plan: PathBuf,
    },
    /// Compare two field dumps; exit 0 when max relative error <= threshold.
    Compare {
        dump_a: PathBuf,
        dump_b: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
    },
    /// Weak scaling: grow ny with the worker count; writes weak.csv.
    Weakscale {
        scenario: String,
        /// Comma-separated worker counts, e.g. 1,2,4,8.
        #[arg(long, value_delimiter = ',')]
        workers: Vec<usize>,
        #[arg(long, default_value = "reduction-async")]
        backend: BackendKind,
        #[arg(long, default_value_t = 3)]
        regions_per_worker: usize,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long)]
        steps: Option<u32>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            scenario,
            backend,
            workers,
            regions,
            steps,
            seed,
            dump_interval,
            quantities,
            out,
            trace,
        } => {
            let overrides = RunOverrides { workers, regions, steps, seed };
            let quantities = parse_quantities(&quantities)?;
            cmd_run(&scenario, backend, &overrides, dump_interval, &quantities, &out, trace)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { plan } => {
            let plan = BenchPlan::from_json_file(&plan)?;
            let report = run_bench(&plan)?;
            println!("backend,workers,regions,mean_s,std_s,speedup");
            for r in &report.rows {
                println!(
                    "{},{},{},{:.6},{:.6},{:.4}",
                    r.backend, r.workers, r.regions, r.mean_s, r.std_s, r.speedup
                );
            }
            println!("written to {}", report.csv_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { dump_a, dump_b, threshold } => {
            let ok = cmd_compare(&dump_a, &dump_b, threshold)?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Weakscale {
            scenario,
            workers,
            backend,
            regions_per_worker,
            repetitions,
            steps,
            out,
        } => {
            if workers.is_empty() {
                anyhow::bail!("--workers needs at least one count");
            }
            let overrides = RunOverrides { steps, ..Default::default() };
            let report = run_weakscale(
                &scenario,
                &workers,
                backend,
                &overrides,
                repetitions,
                regions_per_worker,
                &out,
            )?;
            println!("workers,ny,regions,mean_s,std_s,efficiency");
            for r in &report.rows {
                println!(
                    "{},{},{},{:.6},{:.6},{:.4}",
                    r.workers, r.ny, r.regions, r.mean_s, r.std_s, r.efficiency
                );
            }
            println!("written to {}", report.csv_path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
