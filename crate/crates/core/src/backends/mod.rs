//! Time-loop drivers: seven interchangeable schemes over the same kernels.
//!
//! | backend            | decomposition | synchronization          | current races |
//! |--------------------|---------------|--------------------------|---------------|
//! | serial             | none          | program order            | n/a           |
//! | parallel-for       | particles     | barrier per stage        | reduction     |
//! | tasklike           | regions       | barrier per stage        | reduction     |
//! | reduction-sync     | regions       | clauses + step barrier   | reduction     |
//! | reduction-async    | regions       | clauses only             | reduction     |
//! | commutative-sync   | regions       | clauses + step barrier   | commutative   |
//! | commutative-async  | regions       | clauses only             | commutative   |

mod global;
mod regional;

use crate::config::{ConfigError, SimConfig};
use crate::grid::{CurrentDensity, EMFields, VecGrid};
use crate::inject;
use crate::laser;
use crate::particle::Particle;
use crate::regions::{self, Region, RegionError, SpeciesBin};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};
use thiserror::Error;

/// The seven execution schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Serial,
    ParallelFor,
    Tasklike,
    ReductionSync,
    ReductionAsync,
    CommutativeSync,
    CommutativeAsync,
}

impl BackendKind {
    pub const ALL: [BackendKind; 7] = [
        BackendKind::Serial,
        BackendKind::ParallelFor,
        BackendKind::Tasklike,
        BackendKind::ReductionSync,
        BackendKind::ReductionAsync,
        BackendKind::CommutativeSync,
        BackendKind::CommutativeAsync,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Serial => "serial",
            BackendKind::ParallelFor => "parallel-for",
            BackendKind::Tasklike => "tasklike",
            BackendKind::ReductionSync => "reduction-sync",
            BackendKind::ReductionAsync => "reduction-async",
            BackendKind::CommutativeSync => "commutative-sync",
            BackendKind::CommutativeAsync => "commutative-async",
        }
    }

    /// Spatial (row-band) decomposition vs global buffers.
    pub fn is_regional(self) -> bool {
        !matches!(self, BackendKind::Serial | BackendKind::ParallelFor)
    }

    /// Synchronized only by data dependencies, no per-step barrier.
    pub fn is_async(self) -> bool {
        matches!(self, BackendKind::ReductionAsync | BackendKind::CommutativeAsync)
    }

    pub fn uses_commutative(self) -> bool {
        matches!(self, BackendKind::CommutativeSync | BackendKind::CommutativeAsync)
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown backend `{0}` (expected serial | parallel-for | tasklike | reduction-sync | reduction-async | commutative-sync | commutative-async)")]
pub struct UnknownBackend(pub String);

impl FromStr for BackendKind {
    type Err = UnknownBackend;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "serial" => BackendKind::Serial,
            "parallel-for" => BackendKind::ParallelFor,
            "tasklike" => BackendKind::Tasklike,
            "reduction-sync" => BackendKind::ReductionSync,
            "reduction-async" => BackendKind::ReductionAsync,
            "commutative-sync" => BackendKind::CommutativeSync,
            "commutative-async" => BackendKind::CommutativeAsync,
            other => return Err(UnknownBackend(other.to_string())),
        })
    }
}

/// Cumulative busy time per pipeline stage, summed across workers.
#[derive(Debug, Default)]
pub struct StageClock {
    advance: AtomicU64,
    reduce: AtomicU64,
    field: AtomicU64,
    exchange: AtomicU64,
    migrate: AtomicU64,
    window: AtomicU64,
}

#[derive(Debug, Clone, Copy)]
pub enum Stage {
    Advance,
    Reduce,
    Field,
    Exchange,
    Migrate,
    Window,
}

impl StageClock {
    pub fn add(&self, stage: Stage, d: Duration) {
        let cell = match stage {
            Stage::Advance => &self.advance,
            Stage::Reduce => &self.reduce,
            Stage::Field => &self.field,
            Stage::Exchange => &self.exchange,
            Stage::Migrate => &self.migrate,
            Stage::Window => &self.window,
        };
        cell.fetch_add(d.as_nanos() as u64, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> Vec<(&'static str, Duration)> {
        [
            ("advance", &self.advance),
            ("reduce+filter", &self.reduce),
            ("field", &self.field),
            ("exchange", &self.exchange),
            ("migrate", &self.migrate),
            ("window", &self.window),
        ]
        .into_iter()
        .map(|(n, c)| (n, Duration::from_nanos(c.load(Ordering::Relaxed))))
        .collect()
    }

    pub fn reset(&self) {
        for c in [
            &self.advance,
            &self.reduce,
            &self.field,
            &self.exchange,
            &self.migrate,
            &self.window,
        ] {
            c.store(0, Ordering::Relaxed);
        }
    }
}

/// Global (non-decomposed) simulation buffers.
#[derive(Debug, Clone)]
pub struct GlobalState {
    pub emf: EMFields,
    pub j: CurrentDensity,
    pub species: Vec<SpeciesBin>,
}

// One long-lived value per state; the size skew between the variants is
// irrelevant next to the field buffers they own.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Layout {
    Global(GlobalState),
    Regional(Vec<Region>),
}

/// The unit of simulation: configuration, step counter, moving-window
/// offset, and the field/particle buffers in the layout the backend needs.
#[derive(Debug)]
pub struct SimState {
    pub cfg: SimConfig,
    pub iter: u32,
    pub n_move: u32,
    pub layout: Layout,
    pub clock: StageClock,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Laser(#[from] laser::LaserError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("backend {kind} needs a {need} state layout")]
    LayoutMismatch { kind: BackendKind, need: &'static str },
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Task(#[from] empic_tasking::TaskError),
    #[error("commutative backends need regions at least 3 rows tall (region {region} has {rows})")]
    RegionTooThinForCommutative { region: usize, rows: usize },
}

impl SimState {
    /// Validate the config and build the layout `kind` wants.
    pub fn build(cfg: SimConfig, kind: BackendKind) -> Result<SimState, BuildError> {
        let cfg = crate::config::validate_config(cfg)?;
        let layout = if kind.is_regional() {
            Layout::Regional(regions::partition(&cfg)?)
        } else {
            Layout::Global(Self::build_global(&cfg)?)
        };
        Ok(SimState {
            cfg,
            iter: 0,
            n_move: 0,
            layout,
            clock: StageClock::default(),
        })
    }

    fn build_global(cfg: &SimConfig) -> Result<GlobalState, BuildError> {
        let mut emf = EMFields::new(cfg.nx, cfg.ny);
        if let Some(l) = &cfg.laser {
            laser::init_laser(&mut emf, l, cfg)?;
        }
        emf.copy_guard_y();
        if !cfg.moving_window {
            emf.copy_guard_x();
        }
        let species = cfg
            .species
            .iter()
            .enumerate()
            .map(|(s, spec)| SpeciesBin {
                parts: inject::inject_uniform(s, spec, cfg),
                out_lo: Vec::new(),
                out_hi: Vec::new(),
            })
            .collect();
        Ok(GlobalState {
            emf,
            j: CurrentDensity::new(cfg.nx, cfg.ny),
            species,
        })
    }

    /// Visit every row band as (first global row, rows, (E, B, J) grids);
    /// exactly one band for the global layout.
    pub fn for_each_band(&self, mut f: impl FnMut(usize, usize, (&VecGrid, &VecGrid, &VecGrid))) {
        match &self.layout {
            Layout::Global(g) => f(0, self.cfg.ny, (&g.emf.e, &g.emf.b, &g.j.j)),
            Layout::Regional(regions) => {
                for r in regions {
                    f(r.y0, r.n_rows, (&r.emf.e, &r.emf.b, &r.j.j));
                }
            }
        }
    }

    /// Visit every particle of one species with its region's first global
    /// row (0 for the global layout).
    pub fn for_each_particle(&self, species: usize, mut f: impl FnMut(&Particle, i32)) {
        match &self.layout {
            Layout::Global(g) => {
                for p in &g.species[species].parts {
                    f(p, 0);
                }
            }
            Layout::Regional(regions) => {
                for r in regions {
                    for p in &r.species[species].parts {
                        f(p, r.y0 as i32);
                    }
                }
            }
        }
    }

    /// Particle count per species (staging buffers included).
    pub fn population(&self) -> Vec<usize> {
        match &self.layout {
            Layout::Global(g) => g
                .species
                .iter()
                .map(|b| b.parts.len() + b.out_lo.len() + b.out_hi.len())
                .collect(),
            Layout::Regional(regions) => regions::ring_population(regions),
        }
    }
}

/// Mid-run reporting: field dumps and an energy series every `interval`
/// steps (step boundaries, including step 0). Under the async backends
/// reports are emitted by tasks that read every region's buffers through
/// `in` clauses, so they pin a consistent step without a global barrier.
#[derive(Debug, Clone)]
pub struct ReportSpec {
    pub interval: u32,
    pub quantities: Vec<crate::diagnostics::Quantity>,
    /// Dump files land at `<out_dir>/<quantity>-<iter>.zdump`.
    pub out_dir: std::path::PathBuf,
    /// Append one NDJSON energy object per reported step.
    pub energy: Option<std::path::PathBuf>,
    /// Append one NDJSON object per reported step with the cumulative
    /// per-stage busy times.
    pub timing: Option<std::path::PathBuf>,
}

/// Per-run extras: report cadence and schedule-trace capture.
#[derive(Debug, Default, Clone)]
pub struct RunHooks {
    pub report: Option<ReportSpec>,
    pub trace: Option<std::path::PathBuf>,
}

/// Run `n_steps` under the chosen backend; returns the wall time of the time
/// loop only (state setup, dumps, and teardown excluded).
pub fn run(
    state: &mut SimState,
    n_steps: u32,
    kind: BackendKind,
    workers: usize,
) -> Result<Duration, RunError> {
    run_with(state, n_steps, kind, workers, RunHooks::default())
}

pub fn run_with(
    state: &mut SimState,
    n_steps: u32,
    kind: BackendKind,
    workers: usize,
    hooks: RunHooks,
) -> Result<Duration, RunError> {
    let t0 = Instant::now();
    match kind {
        BackendKind::Serial => global::run_serial(state, n_steps, &hooks)?,
        BackendKind::ParallelFor => global::run_parallel_for(state, n_steps, workers, &hooks)?,
        _ => regional::run_task_backend(state, n_steps, kind, workers, &hooks)?,
    }
    Ok(t0.elapsed())
}

/// Emit the report's dumps and energy line for an assembled state (used at
/// step-0 boundaries and after a finished run).
pub fn emit_report(state: &SimState, spec: &ReportSpec) {
    emit_report_for_state(state, spec);
}

pub(crate) fn emit_report_for_state(state: &SimState, spec: &ReportSpec) {
    for q in &spec.quantities {
        let path = spec
            .out_dir
            .join(format!("{}-{}.zdump", q.name(), state.iter));
        if let Err(err) = crate::diagnostics::dump_field(state, *q, &path) {
            eprintln!("warning: dump {} failed: {err}", path.display());
        }
    }
    if let Some(path) = &spec.energy {
        let line = crate::diagnostics::energy_report(state).to_ndjson();
        append_line(path, &line);
    }
    if let Some(path) = &spec.timing {
        emit_timing(&state.clock, state.iter, path);
    }
}

pub(crate) fn emit_timing(clock: &StageClock, iter: u32, path: &std::path::Path) {
    let mut line = format!(r#"{{"iter":{iter}"#);
    for (name, d) in clock.snapshot() {
        let key = name.replace('+', "_");
        line.push_str(&format!(r#","{key}_s":{:.6}"#, d.as_secs_f64()));
    }
    line.push('}');
    append_line(path, &line);
}

pub(crate) fn append_line(path: &std::path::Path, line: &str) {
    use std::io::Write;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).ok();
    }
    let r = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| writeln!(f, "{line}"));
    if let Err(err) = r {
        eprintln!("warning: cannot append to {}: {err}", path.display());
    }
}
