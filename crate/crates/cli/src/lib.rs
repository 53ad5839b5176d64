//! Library surface of the command-line driver, shared with the test suites:
//! scenario resolution, the run command, the benchmark matrix, weak scaling,
//! and dump comparison.

pub mod bench;

use anyhow::{anyhow, Context, Result};
use empic_core::backends::{self, BackendKind, ReportSpec, RunHooks, SimState};
use empic_core::config::SimConfig;
use empic_core::diagnostics::{self, Quantity};
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Built-in scenarios, embedded at compile time.
pub const BUILTIN_SCENARIOS: [(&str, &str); 6] = [
    ("weibel-small", include_str!("../scenarios/weibel-small.json")),
    ("lwfa-small", include_str!("../scenarios/lwfa-small.json")),
    ("cold", include_str!("../scenarios/cold.json")),
    ("warm", include_str!("../scenarios/warm.json")),
    ("weibel-full", include_str!("../scenarios/weibel-full.json")),
    ("lwfa-full", include_str!("../scenarios/lwfa-full.json")),
];

/// Resolve a scenario by built-in name or JSON file path.
pub fn load_scenario(name_or_path: &str) -> Result<SimConfig> {
    if let Some((_, text)) = BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == name_or_path) {
        return SimConfig::from_json(text)
            .with_context(|| format!("built-in scenario `{name_or_path}`"));
    }
    SimConfig::from_json_file(name_or_path)
        .with_context(|| format!("scenario `{name_or_path}`"))
}

/// Per-run knobs layered over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub workers: Option<usize>,
    pub regions: Option<usize>,
    pub steps: Option<u32>,
    pub seed: Option<u64>,
}

pub fn apply_overrides(mut cfg: SimConfig, ov: &RunOverrides) -> SimConfig {
    if let Some(r) = ov.regions {
        cfg.n_regions = r;
    }
    if let Some(s) = ov.steps {
        cfg.n_steps = s;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    cfg
}

pub struct RunOutcome {
    pub state: SimState,
    pub wall: Duration,
    pub workers: usize,
}

/// Build the state, run the time loop, and return both. Only the loop is
/// timed; injection, partitioning, and IO are excluded.
pub fn run_simulation(
    cfg: SimConfig,
    backend: BackendKind,
    workers: Option<usize>,
    hooks: RunHooks,
) -> Result<RunOutcome> {
    let workers = empic_tasking::resolve_workers(workers);
    let steps = cfg.n_steps;
    let mut state = SimState::build(cfg, backend)?;
    let wall = backends::run_with(&mut state, steps, backend, workers, hooks)?;
    Ok(RunOutcome { state, wall, workers })
}

/// The `run` subcommand: simulate, dump, report energies and stage timings.
#[allow(clippy::too_many_arguments)]
pub fn cmd_run(
    scenario: &str,
    backend: BackendKind,
    overrides: &RunOverrides,
    dump_interval: Option<u32>,
    quantities: &[Quantity],
    out_root: &Path,
    trace: Option<PathBuf>,
) -> Result<()> {
    let cfg = apply_overrides(load_scenario(scenario)?, overrides);
    let run_id = format!(
        "{}-{}",
        Path::new(scenario)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(scenario),
        backend
    );
    let out_dir = out_root.join(run_id);
    std::fs::create_dir_all(&out_dir)?;

    let report = ReportSpec {
        interval: dump_interval.unwrap_or(u32::MAX),
        quantities: quantities.to_vec(),
        out_dir: out_dir.clone(),
        energy: Some(out_dir.join("energy.ndjson")),
        timing: Some(out_dir.join("timing.ndjson")),
    };
    // fresh series per run
    let _ = std::fs::remove_file(out_dir.join("energy.ndjson"));
    let _ = std::fs::remove_file(out_dir.join("timing.ndjson"));

    let hooks = RunHooks {
        report: dump_interval.map(|_| report.clone()),
        trace,
    };

    let steps = cfg.n_steps;
    let mut state = SimState::build(cfg, backend)?;
    if dump_interval.is_some() {
        // step-0 boundary
        backends::emit_report(&state, &report);
    }
    let workers = empic_tasking::resolve_workers(overrides.workers);
    let wall = backends::run_with(&mut state, steps, backend, workers, hooks)?;

    // final dumps (skip if a report boundary already emitted them)
    let already_reported =
        dump_interval.is_some() && (state.iter == 0 || state.iter % dump_interval.unwrap() == 0);
    if !already_reported {
        backends::emit_report(&state, &report);
    }

    println!("scenario   {scenario}");
    println!("backend    {backend}  ({workers} workers)");
    println!("steps      {}  (window moved {} cells)", state.iter, state.n_move);
    for (name, d) in state.clock.snapshot() {
        if !d.is_zero() {
            println!("  {name:<14} {:>10.3} s (cumulative busy)", d.as_secs_f64());
        }
    }
    println!("time loop  {:>10.3} s", wall.as_secs_f64());
    println!("dumps in   {}", out_dir.display());
    Ok(())
}

/// The `compare` subcommand: print both error metrics, exit nonzero when the
/// max relative error exceeds the threshold.
pub fn cmd_compare(a: &Path, b: &Path, threshold: f64) -> Result<bool> {
    let ra = diagnostics::load_report(a).with_context(|| a.display().to_string())?;
    let rb = diagnostics::load_report(b).with_context(|| b.display().to_string())?;
    let diff = diagnostics::compare_field_maps(&ra, &rb).map_err(|e| anyhow!("{e}"))?;
    println!("max relative error  {:.6e}", diff.max_rel);
    println!("l2  relative error  {:.6e}", diff.l2_rel);
    Ok(diff.max_rel <= threshold)
}

/// Parse a comma-separated quantity list ("ey,bz,charge0").
pub fn parse_quantities(text: &str) -> Result<Vec<Quantity>> {
    text.split(',')
        .map(|s| s.trim().parse::<Quantity>().map_err(|e| anyhow!(e)))
        .collect()
}

pub fn physical_cores() -> usize {
    num_cpus::get_physical().max(1)
}

/// A scenario is y-scalable when the load is uniform along y: no moving
/// window and no laser (their load rides in a narrow x band).
pub fn is_y_scalable(cfg: &SimConfig) -> bool {
    !cfg.moving_window && cfg.laser.is_none()
}
