//! Benchmark matrices and weak scaling.
//!
//! `run_bench` sweeps backend × workers × regions cells over one scenario,
//! measuring each cell `repetitions` times against a serial baseline from
//! the same session, and writes `bench.csv`. `run_weakscale` grows the grid
//! along y with the worker count and writes `weak.csv`.

use crate::{apply_overrides, is_y_scalable, load_scenario, RunOverrides};
use anyhow::{bail, Context, Result};
use empic_core::backends::{self, BackendKind, SimState};
use empic_core::config::SimConfig;
use serde::Deserialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// One benchmark sweep: scenario × backends × workers × regions.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    pub scenario: String,
    pub backends: Vec<String>,
    pub workers: Vec<usize>,
    pub regions: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub output: PathBuf,
    /// Optional step-count override to shrink desk-scale runs.
    #[serde(default)]
    pub steps: Option<u32>,
}

fn default_repetitions() -> usize {
    5
}

impl BenchPlan {
    pub fn from_json_file(path: &Path) -> Result<BenchPlan> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read bench plan {}", path.display()))?;
        let plan: BenchPlan = serde_json::from_str(&text).context("bench plan parse error")?;
        if plan.repetitions < 1 || plan.workers.iter().any(|w| *w < 1) {
            bail!("bench plan: repetitions and workers must be >= 1");
        }
        Ok(plan)
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub backend: BackendKind,
    pub workers: usize,
    pub regions: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub speedup: f64,
}

#[derive(Debug)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub csv_path: PathBuf,
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Run one (backend, workers, regions) cell `reps` times; returns wall-time
/// samples in seconds.
pub fn measure_cell(
    cfg: &SimConfig,
    backend: BackendKind,
    workers: usize,
    regions: usize,
    reps: usize,
) -> Result<Vec<f64>> {
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut cell_cfg = cfg.clone();
        cell_cfg.n_regions = if backend.is_regional() { regions } else { 1 };
        let steps = cell_cfg.n_steps;
        let mut state = SimState::build(cell_cfg, backend)?;
        let wall = backends::run(&mut state, steps, backend, workers)?;
        samples.push(wall.as_secs_f64());
    }
    Ok(samples)
}

pub fn run_bench(plan: &BenchPlan) -> Result<BenchReport> {
    let mut cfg = load_scenario(&plan.scenario)?;
    if let Some(steps) = plan.steps {
        cfg.n_steps = steps;
    }
    let backends_list: Vec<BackendKind> = plan
        .backends
        .iter()
        .map(|name| name.parse::<BackendKind>().map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;

    // Serial baseline, measured in this same session.
    eprintln!("bench: measuring serial baseline ({}x)", plan.repetitions);
    let baseline = measure_cell(&cfg, BackendKind::Serial, 1, 1, plan.repetitions)?;
    let (base_mean, base_std) = mean_std(&baseline);
    warn_noisy(BackendKind::Serial, 1, 1, base_mean, base_std);

    let mut rows = Vec::new();
    for &backend in &backends_list {
        let worker_counts: &[usize] = if backend == BackendKind::Serial { &[1] } else { &plan.workers };
        let region_counts: &[usize] = if backend.is_regional() { &plan.regions } else { &[1] };
        for &workers in worker_counts {
            for &regions in region_counts {
                let (mean_s, std_s) = if backend == BackendKind::Serial {
                    (base_mean, base_std)
                } else {
                    eprintln!("bench: {backend} workers={workers} regions={regions}");
                    let samples = measure_cell(&cfg, backend, workers, regions, plan.repetitions)?;
                    mean_std(&samples)
                };
                warn_noisy(backend, workers, regions, mean_s, std_s);
                rows.push(BenchRow {
                    backend,
                    workers,
                    regions,
                    mean_s,
                    std_s,
                    speedup: base_mean / mean_s,
                });
            }
        }
    }

    std::fs::create_dir_all(&plan.output)?;
    let csv_path = plan.output.join("bench.csv");
    write_bench_csv(&csv_path, &rows)?;
    Ok(BenchReport { rows, csv_path })
}

fn warn_noisy(backend: BackendKind, workers: usize, regions: usize, mean: f64, std: f64) {
    if mean > 0.0 && std / mean > 0.05 {
        eprintln!(
            "warning: noisy cell {backend} workers={workers} regions={regions}: \
             stddev/mean = {:.1}% (> 5%)",
            100.0 * std / mean
        );
    }
}

/// Append-safe, schema-stable CSV: the header is written only when the file
/// starts empty, and the column set is fixed.
pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut out = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(out, "backend,workers,regions,mean_s,std_s,speedup")?;
    }
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.4}",
            r.backend, r.workers, r.regions, r.mean_s, r.std_s, r.speedup
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct WeakRow {
    pub workers: usize,
    pub ny: usize,
    pub regions: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub efficiency: f64,
}

#[derive(Debug)]
pub struct WeakReport {
    pub rows: Vec<WeakRow>,
    pub csv_path: PathBuf,
}

#[derive(Debug, thiserror::Error)]
#[error("scenario is not y-scalable (moving window or laser load): weak scaling needs a uniform plasma")]
pub struct ScenarioNotScalable;

/// Weak scaling: ny (and the region count) grow with the worker count at
/// fixed ppc and steps; efficiency = T(1 worker, base) / T(n workers, n×ny).
#[allow(clippy::too_many_arguments)]
pub fn run_weakscale(
    scenario: &str,
    workers_list: &[usize],
    backend: BackendKind,
    overrides: &RunOverrides,
    repetitions: usize,
    regions_per_worker: usize,
    out_dir: &Path,
) -> Result<WeakReport> {
    let base = apply_overrides(load_scenario(scenario)?, overrides);
    if !is_y_scalable(&base) {
        return Err(ScenarioNotScalable.into());
    }

    let mut rows = Vec::new();
    let mut base_mean = None;
    for &workers in workers_list {
        let mut cfg = base.clone();
        cfg.ny = base.ny * workers;
        cfg.box_y = base.box_y * workers as f32;
        let regions = (regions_per_worker * workers).min(cfg.ny / 2).max(1);
        cfg.n_regions = regions;

        eprintln!("weakscale: workers={workers} ny={}", cfg.ny);
        let samples = measure_cell(&cfg, backend, workers, regions, repetitions)?;
        let (mean_s, std_s) = mean_std(&samples);
        if workers == workers_list[0] {
            base_mean = Some(mean_s);
        }
        let efficiency = base_mean.unwrap() / mean_s;
        rows.push(WeakRow { workers, ny: cfg.ny, regions, mean_s, std_s, efficiency });
    }

    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("weak.csv");
    let fresh = !csv_path.exists() || std::fs::metadata(&csv_path)?.len() == 0;
    let mut out = std::fs::OpenOptions::new().create(true).append(true).open(&csv_path)?;
    if fresh {
        writeln!(out, "workers,ny,regions,mean_s,std_s,efficiency")?;
    }
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.4}",
            r.workers, r.ny, r.regions, r.mean_s, r.std_s, r.efficiency
        )?;
    }
    Ok(WeakReport { rows, csv_path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_plan_defaults_and_validation() {
        let dir = std::env::temp_dir().join(format!("empic-plan-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("plan.json");
        std::fs::write(
            &path,
            r#"{"scenario":"cold","backends":["serial"],"workers":[1],"regions":[4],
                "output":"/tmp/empic-bench-out"}"#,
        )
        .unwrap();
        let plan = BenchPlan::from_json_file(&path).unwrap();
        assert_eq!(plan.repetitions, 5);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn weakscale_rejects_lwfa() {
        let err = run_weakscale(
            "lwfa-small",
            &[1],
            BackendKind::ReductionAsync,
            &RunOverrides::default(),
            1,
            3,
            Path::new("/tmp/empic-weak-reject"),
        )
        .unwrap_err();
        assert!(err.downcast_ref::<ScenarioNotScalable>().is_some());
    }

    #[test]
    fn mean_std_basics() {
        let (m, s) = mean_std(&[2.0, 2.0, 2.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 0.0);
        let (m, _) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
    }
}
