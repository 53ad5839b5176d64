//! Region-decomposed drivers over the task runtime.
//!
//! Every step spawns, per region, the task chain
//!
//! ```text
//!   advance+deposit -> ghost-current reduce + filter -> field advance
//!        |                                                  |
//!        +-> particle migration          ghost-field update +
//! ```
//!
//! `tasklike` runs the same bodies without clauses, one dynamically
//! scheduled group per stage with a taskwait barrier after each. The
//! `reduction` variants give each region a private current and exchange the
//! guard-row deposits through per-boundary scratch bands, so every task's
//! clause set is static. The `commutative` variants deposit straight into
//! one shared whole-grid current; adjacent regions exclude each other
//! through commutative clauses on the three-row boundary strips they both
//! touch. `sync` taskwaits every step; `async` spawns a bounded look-ahead
//! window of steps and taskwaits once at the end.

use super::{BackendKind, Layout, ReportSpec, RunError, RunHooks, SimState, Stage, StageClock};
use crate::config::SimConfig;
use crate::diagnostics::{EnergyReport, FieldReport, Quantity};
use crate::grid::{CurrentDensity, EMFields, RowBand, VecGrid, G_LO};
use crate::kernels::{self, StepCoeffs};
use crate::particle::Particle;
use crate::regions::{self, EdgeBand, Region, SpeciesBin};
use empic_tasking::{AccessClause, ResourceId, RuntimeBuilder, TaskRuntime};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::Instant;

/// Steps of look-ahead the async variants keep in flight.
const ASYNC_LOOKAHEAD: u32 = 4;

/// Whole-grid current shared by every region in the commutative variants.
/// Exclusive access to the rows a task touches comes from its clauses; the
/// runtime's commutative locks keep adjacent writers apart.
struct SharedGrid(std::cell::UnsafeCell<VecGrid>);

unsafe impl Sync for SharedGrid {}
unsafe impl Send for SharedGrid {}

impl SharedGrid {
    /// Caller must hold clause-granted access to every row it touches.
    #[allow(clippy::mut_from_ref)]
    unsafe fn get(&self) -> &mut VecGrid {
        unsafe { &mut *self.0.get() }
    }
}

struct SlotResources {
    p: ResourceId,
    eb: ResourceId,
    j: ResourceId,
    out_lo: ResourceId,
    out_hi: ResourceId,
    spill_lo: ResourceId,
    spill_hi: ResourceId,
    edge_lo: ResourceId,
    edge_hi: ResourceId,
}

struct RegionSlot {
    y0: usize,
    n_rows: usize,
    emf: Arc<RwLock<EMFields>>,
    j: Arc<RwLock<VecGrid>>,
    parts: Arc<RwLock<Vec<Vec<Particle>>>>,
    out_lo: Arc<Mutex<Vec<Vec<Particle>>>>,
    out_hi: Arc<Mutex<Vec<Vec<Particle>>>>,
    spill_lo: Arc<Mutex<RowBand>>,
    spill_hi: Arc<Mutex<RowBand>>,
    edge_lo: Arc<Mutex<EdgeBand>>,
    edge_hi: Arc<Mutex<EdgeBand>>,
    res: SlotResources,
    /// Completed-stage counters (debug ordering assertions): a region's
    /// field advance for step s must observe its own and its upper
    /// neighbor's reduction already at s+1, never ahead or behind.
    done_advance: std::sync::atomic::AtomicU32,
    done_reduce: std::sync::atomic::AtomicU32,
}

/// Completion gate for one step's tasks (async look-ahead throttle).
#[derive(Default)]
struct StepGate {
    remaining: Mutex<u32>,
    zero: Condvar,
}

impl StepGate {
    fn add(&self) {
        *self.remaining.lock().unwrap() += 1;
    }

    fn done(&self) {
        let mut n = self.remaining.lock().unwrap();
        *n -= 1;
        if *n == 0 {
            self.zero.notify_all();
        }
    }

    fn wait_zero(&self) {
        let mut n = self.remaining.lock().unwrap();
        while *n > 0 {
            n = self.zero.wait(n).unwrap();
        }
    }
}

/// Per-step deterministic window schedule: (shift now?, epoch after shift).
fn window_schedule(cfg: &SimConfig, iter0: u32, n_move0: u32, n_steps: u32) -> Vec<(bool, u32)> {
    let mut schedule = Vec::with_capacity(n_steps as usize);
    let mut n_move = n_move0;
    for it in iter0..iter0 + n_steps {
        if cfg.moving_window && kernels::window_due(it, cfg.dt, cfg.dx(), n_move) {
            n_move += 1;
            schedule.push((true, n_move));
        } else {
            schedule.push((false, n_move));
        }
    }
    schedule
}

#[cfg(debug_assertions)]
fn check_access(clause_mode: bool, r: ResourceId, write: bool) {
    if clause_mode {
        debug_assert!(
            empic_tasking::instrument::current_task_allows(r, write),
            "task touched resource {r:?} without a covering clause"
        );
    }
}

#[cfg(not(debug_assertions))]
fn check_access(_clause_mode: bool, _r: ResourceId, _write: bool) {}

pub(super) fn run_task_backend(
    state: &mut SimState,
    n_steps: u32,
    kind: BackendKind,
    workers: usize,
    hooks: &RunHooks,
) -> Result<(), RunError> {
    let cfg = Arc::new(state.cfg.clone());
    let Layout::Regional(region_vec) = std::mem::replace(&mut state.layout, Layout::Regional(Vec::new()))
    else {
        return Err(RunError::LayoutMismatch { kind, need: "regional" });
    };

    if kind.uses_commutative() {
        // Deposit reach is one row below / two above; with fewer than three
        // rows next-nearest regions would overlap outside the shared strips.
        if let Some(r) = region_vec.iter().find(|r| r.n_rows < 3) {
            let err = RunError::RegionTooThinForCommutative { region: r.id, rows: r.n_rows };
            state.layout = Layout::Regional(region_vec);
            return Err(err);
        }
    }

    let mut builder = RuntimeBuilder::default().workers(workers);
    if let Some(path) = &hooks.trace {
        builder = builder.trace(path.clone());
    }
    let rt = builder.build()?;

    let n = region_vec.len();
    let slots: Arc<Vec<RegionSlot>> = Arc::new(
        region_vec
            .into_iter()
            .map(|r| RegionSlot {
                y0: r.y0,
                n_rows: r.n_rows,
                emf: Arc::new(RwLock::new(r.emf)),
                j: Arc::new(RwLock::new(r.j.j)),
                parts: Arc::new(RwLock::new(
                    r.species.iter().map(|b| b.parts.clone()).collect(),
                )),
                out_lo: Arc::new(Mutex::new(vec![Vec::new(); cfg.species.len()])),
                out_hi: Arc::new(Mutex::new(vec![Vec::new(); cfg.species.len()])),
                spill_lo: Arc::new(Mutex::new(RowBand::default())),
                spill_hi: Arc::new(Mutex::new(RowBand::default())),
                edge_lo: Arc::new(Mutex::new(EdgeBand::default())),
                edge_hi: Arc::new(Mutex::new(EdgeBand::default())),
                res: SlotResources {
                    p: rt.resource(&format!("r{}.particles", r.id)),
                    eb: rt.resource(&format!("r{}.fields", r.id)),
                    j: rt.resource(&format!("r{}.current", r.id)),
                    out_lo: rt.resource(&format!("r{}.out_lo", r.id)),
                    out_hi: rt.resource(&format!("r{}.out_hi", r.id)),
                    spill_lo: rt.resource(&format!("r{}.spill_lo", r.id)),
                    spill_hi: rt.resource(&format!("r{}.spill_hi", r.id)),
                    edge_lo: rt.resource(&format!("r{}.edge_lo", r.id)),
                    edge_hi: rt.resource(&format!("r{}.edge_hi", r.id)),
                },
                done_advance: std::sync::atomic::AtomicU32::new(0),
                done_reduce: std::sync::atomic::AtomicU32::new(0),
            })
            .collect(),
    );

    // Shared current plus boundary-strip/mid-band resources (commutative).
    let shared = if kind.uses_commutative() {
        let strips: Vec<ResourceId> = (0..n).map(|b| rt.resource(&format!("strip{b}"))).collect();
        let mids: Vec<ResourceId> = (0..n).map(|r| rt.resource(&format!("mid{r}"))).collect();
        Some((
            Arc::new(SharedGrid(std::cell::UnsafeCell::new(VecGrid::new(
                cfg.nx, cfg.ny,
            )))),
            strips,
            mids,
        ))
    } else {
        None
    };

    let schedule = window_schedule(&cfg, state.iter, state.n_move, n_steps);
    let coeffs = Arc::new(regions::species_coeffs(&cfg));
    let clock = Arc::new(std::mem::take(&mut state.clock));

    let gates: Vec<Arc<StepGate>> = (0..n_steps).map(|_| Arc::new(StepGate::default())).collect();
    let clause_mode = kind != BackendKind::Tasklike;

    let builder_ctx = GraphCtx {
        cfg: Arc::clone(&cfg),
        slots: Arc::clone(&slots),
        coeffs,
        clock: Arc::clone(&clock),
        clause_mode,
        shared,
    };

    for s in 0..n_steps {
        let gate = Arc::clone(&gates[s as usize]);
        let (shift, epoch) = schedule[s as usize];
        match kind {
            BackendKind::Tasklike => {
                builder_ctx.spawn_tasklike_step(&rt, s, shift, epoch, &gate)?;
            }
            _ => {
                builder_ctx.spawn_clause_step(&rt, s, shift, epoch, &gate)?;
            }
        }
        let completed = state.iter + s + 1;
        let report_due = hooks
            .report
            .as_ref()
            .is_some_and(|r| completed.is_multiple_of(r.interval));

        if kind.is_async() {
            if report_due {
                builder_ctx.spawn_report_task(&rt, hooks.report.clone().unwrap(), completed)?;
            }
            if s >= ASYNC_LOOKAHEAD {
                gates[(s - ASYNC_LOOKAHEAD) as usize].wait_zero();
            }
        } else {
            rt.taskwait();
            if report_due {
                builder_ctx.emit_report_inline(hooks.report.as_ref().unwrap(), completed);
            }
        }
    }
    rt.taskwait();
    // Initial-state reports (step boundary 0) are emitted by the caller
    // before the run, where the state is still assembled.
    drop(rt);

    // Reassemble the regions from the slots.
    let GraphCtx {
        shared: shared_opt,
        slots: ctx_slots,
        clock: ctx_clock,
        ..
    } = builder_ctx;
    drop(ctx_slots);
    drop(ctx_clock);
    let slots = Arc::try_unwrap(slots).ok().expect("slot handles leaked");
    let shared_current = shared_opt.as_ref().map(|(g, _, _)| g);
    let mut out = Vec::with_capacity(n);
    for (id, slot) in slots.into_iter().enumerate() {
        let emf = Arc::try_unwrap(slot.emf).expect("emf leaked").into_inner().unwrap();
        let mut j = Arc::try_unwrap(slot.j).expect("j leaked").into_inner().unwrap();
        let parts = Arc::try_unwrap(slot.parts).expect("parts leaked").into_inner().unwrap();
        let out_lo = Arc::try_unwrap(slot.out_lo).expect("out_lo leaked").into_inner().unwrap();
        let out_hi = Arc::try_unwrap(slot.out_hi).expect("out_hi leaked").into_inner().unwrap();
        // Commutative runs leave the final current in the shared grid; copy
        // this region's rows back so reports see it.
        if let Some(g) = shared_current {
            let src = unsafe { g.get() };
            let mut band = RowBand::default();
            src.copy_rows_out(slot.y0 as i32, slot.n_rows, &mut band);
            j.copy_rows_in(0, &band);
        }
        out.push(Region {
            id,
            y0: slot.y0,
            n_rows: slot.n_rows,
            nx: cfg.nx,
            emf,
            j: CurrentDensity { j },
            species: parts
                .into_iter()
                .zip(out_lo)
                .zip(out_hi)
                .map(|((parts, out_lo), out_hi)| SpeciesBin { parts, out_lo, out_hi })
                .collect(),
        });
    }
    state.layout = Layout::Regional(out);
    state.iter += n_steps;
    state.n_move = schedule.last().map(|(_, m)| *m).unwrap_or(state.n_move);
    state.clock = Arc::try_unwrap(clock).expect("clock leaked");
    Ok(())
}

struct GraphCtx {
    cfg: Arc<SimConfig>,
    slots: Arc<Vec<RegionSlot>>,
    coeffs: Arc<Vec<StepCoeffs>>,
    clock: Arc<StageClock>,
    clause_mode: bool,
    shared: Option<(Arc<SharedGrid>, Vec<ResourceId>, Vec<ResourceId>)>,
}

/// Push a clause unless the resource is already listed; upgrades In to the
/// stronger mode if both appear (degenerate single-region rings).
fn push_clause(clauses: &mut Vec<AccessClause>, c: AccessClause) {
    if let Some(existing) = clauses.iter_mut().find(|e| e.resource == c.resource) {
        if existing.mode == empic_tasking::Access::In {
            existing.mode = c.mode;
        }
        return;
    }
    clauses.push(c);
}

impl GraphCtx {
    fn clauses(&self, list: Vec<AccessClause>) -> Vec<AccessClause> {
        if self.clause_mode {
            let mut out = Vec::with_capacity(list.len());
            for c in list {
                push_clause(&mut out, c);
            }
            out
        } else {
            Vec::new()
        }
    }

    fn spawn_gated(
        &self,
        rt: &TaskRuntime,
        clauses: Vec<AccessClause>,
        gate: &Arc<StepGate>,
        stage: Stage,
        body: impl FnOnce() + Send + 'static,
    ) -> Result<(), RunError> {
        gate.add();
        let gate = Arc::clone(gate);
        let clock = Arc::clone(&self.clock);
        rt.spawn(clauses, move || {
            let t = Instant::now();
            body();
            clock.add(stage, t.elapsed());
            gate.done();
        })?;
        Ok(())
    }

    // ----- stage bodies (shared between tasklike and the clause variants) -----

    fn advance_body(&self, r: usize, step: u32, shift: bool, epoch: u32) -> impl FnOnce() + Send + 'static {
        let cfg = Arc::clone(&self.cfg);
        let coeffs = Arc::clone(&self.coeffs);
        let slots = Arc::clone(&self.slots);
        let shared = self.shared.as_ref().map(|(g, _, _)| Arc::clone(g));
        let clause_mode = self.clause_mode;
        move || {
            let slot = &slots[r];
            check_access(clause_mode, slot.res.p, true);
            check_access(clause_mode, slot.res.eb, shift);
            let mut parts = slot.parts.write().unwrap();
            let mut out_lo = slot.out_lo.lock().unwrap();
            let mut out_hi = slot.out_hi.lock().unwrap();

            if shift {
                let mut emf = slot.emf.write().unwrap();
                kernels::shift_grid_left(&mut emf.e);
                kernels::shift_grid_left(&mut emf.b);
                let nx = cfg.nx as i32;
                for (s, spec) in cfg.species.iter().enumerate() {
                    let list = &mut parts[s];
                    let mut i = 0;
                    while i < list.len() {
                        list[i].ix -= 1;
                        if list[i].ix < 0 {
                            list.swap_remove(i);
                        } else {
                            i += 1;
                        }
                    }
                    crate::inject::inject_cells(
                        s,
                        spec,
                        &cfg,
                        nx - 1..nx,
                        slot.y0 as i32..(slot.y0 + slot.n_rows) as i32,
                        slot.y0 as i32,
                        epoch,
                        list,
                    );
                }
            }

            let emf = slot.emf.read().unwrap();
            let mut run_species = |j: &mut VecGrid, jy_off: i32| {
                for (s, c) in coeffs.iter().enumerate() {
                    let mut bin = SpeciesBin {
                        parts: std::mem::take(&mut parts[s]),
                        out_lo: std::mem::take(&mut out_lo[s]),
                        out_hi: std::mem::take(&mut out_hi[s]),
                    };
                    regions::advance_species_into(
                        &mut bin,
                        c,
                        &emf,
                        j,
                        jy_off,
                        cfg.nx as i32,
                        slot.n_rows as i32,
                        cfg.moving_window,
                        false,
                    );
                    parts[s] = bin.parts;
                    out_lo[s] = bin.out_lo;
                    out_hi[s] = bin.out_hi;
                }
            };

            match &shared {
                None => {
                    check_access(clause_mode, slot.res.j, true);
                    check_access(clause_mode, slot.res.spill_lo, true);
                    check_access(clause_mode, slot.res.spill_hi, true);
                    let mut j = slot.j.write().unwrap();
                    j.zero();
                    run_species(&mut j, 0);
                    let mut spill_lo = slot.spill_lo.lock().unwrap();
                    let mut spill_hi = slot.spill_hi.lock().unwrap();
                    regions::capture_spills(&j, slot.n_rows, &mut spill_lo, &mut spill_hi);
                }
                Some(g) => {
                    // clause-granted rows [y0-1, y0+n_rows+1] of the shared grid
                    let j = unsafe { g.get() };
                    run_species(j, slot.y0 as i32);
                }
            }

            let prev = slot.done_advance.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            debug_assert_eq!(prev, step, "region {r}: advance ran out of step order");
        }
    }

    fn zero_body(&self, r: usize) -> impl FnOnce() + Send + 'static {
        let slots = Arc::clone(&self.slots);
        let shared = self.shared.as_ref().map(|(g, _, _)| Arc::clone(g));
        let ny = self.cfg.ny as i32;
        move || {
            let slot = &slots[r];
            let g = shared.as_ref().expect("zero task only in commutative mode");
            let j = unsafe { g.get() };
            let w = j.row_stride();
            let lo = (slot.y0 as i32 - 1).max(-(G_LO as i32));
            let hi = ((slot.y0 + slot.n_rows) as i32 + 1).min(ny + 1);
            let s = j.row_start(lo);
            let e = j.row_start(hi) + w;
            j.x[s..e].fill(0.0);
            j.y[s..e].fill(0.0);
            j.z[s..e].fill(0.0);
        }
    }

    fn reduce_body(&self, r: usize, step: u32) -> impl FnOnce() + Send + 'static {
        let cfg = Arc::clone(&self.cfg);
        let slots = Arc::clone(&self.slots);
        let n = self.slots.len();
        let shared = self.shared.as_ref().map(|(g, _, _)| Arc::clone(g));
        let clause_mode = self.clause_mode;
        move || {
            let slot = &slots[r];
            // Step-consistency: this step's deposits (own and both
            // neighbors') must be complete and not yet overwritten.
            #[cfg(debug_assertions)]
            for k in [r, (r + n - 1) % n, (r + 1) % n] {
                debug_assert_eq!(
                    slots[k].done_advance.load(std::sync::atomic::Ordering::SeqCst),
                    step + 1,
                    "region {r}: reduction for step {step} saw region {k}'s advance out of step"
                );
            }
            match &shared {
                None => {
                    let lower = &slots[(r + n - 1) % n];
                    let upper = &slots[(r + 1) % n];
                    check_access(clause_mode, slot.res.j, true);
                    check_access(clause_mode, lower.res.spill_hi, false);
                    check_access(clause_mode, upper.res.spill_lo, false);
                    let mut j = slot.j.write().unwrap();
                    {
                        let spill_hi = lower.spill_hi.lock().unwrap();
                        let spill_lo = upper.spill_lo.lock().unwrap();
                        regions::reduce_ghost_current(
                            &mut j,
                            slot.n_rows,
                            &spill_hi,
                            &spill_lo,
                            !cfg.moving_window,
                        );
                    }
                    kernels::filter_current(&mut j, &cfg.filter, !cfg.moving_window);
                }
                Some(g) => {
                    let j = unsafe { g.get() };
                    if r == 0 {
                        // Seam of the ring: fold the whole-grid y guard rows
                        // once (they are exactly the seam strip's rows). The
                        // per-region x folds below then pick up the guard
                        // columns those rows carried in.
                        j.fold_y_periodic();
                    }
                    let rows = slot.y0 as i32..(slot.y0 + slot.n_rows) as i32;
                    if !cfg.moving_window {
                        j.fold_x_periodic(rows);
                    }
                    kernels::filter_rows(
                        j,
                        slot.y0..slot.y0 + slot.n_rows,
                        &cfg.filter,
                        !cfg.moving_window,
                    );
                }
            }
            let prev = slot.done_reduce.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            debug_assert_eq!(prev, step, "region {r}: reduction ran out of step order");
        }
    }

    fn field_body(&self, r: usize, step: u32) -> impl FnOnce() + Send + 'static {
        let cfg = Arc::clone(&self.cfg);
        let slots = Arc::clone(&self.slots);
        let n = self.slots.len();
        let shared = self.shared.as_ref().map(|(g, _, _)| Arc::clone(g));
        let clause_mode = self.clause_mode;
        move || {
            let slot = &slots[r];
            // The field advance must see this step's current fully reduced
            // and filtered, both its own rows and the upper neighbor's row
            // it reads as the first high guard.
            #[cfg(debug_assertions)]
            for k in [r, (r + 1) % n] {
                debug_assert_eq!(
                    slots[k].done_reduce.load(std::sync::atomic::Ordering::SeqCst),
                    step + 1,
                    "region {r}: field advance for step {step} saw region {k}'s current out of step"
                );
            }
            check_access(clause_mode, slot.res.eb, true);
            check_access(clause_mode, slot.res.edge_lo, true);
            check_access(clause_mode, slot.res.edge_hi, true);
            let mut emf = slot.emf.write().unwrap();

            // J row ny (first high guard): upper neighbor's filtered row 0
            let mut hi = RowBand::default();
            match &shared {
                None => {
                    check_access(clause_mode, slot.res.j, false);
                    let upper = &slots[(r + 1) % n];
                    check_access(clause_mode, upper.res.j, false);
                    if n == 1 {
                        let j = slot.j.read().unwrap();
                        j.copy_rows_out(0, 1, &mut hi);
                        run_yee(&cfg, &mut emf, &j, 0, &hi);
                    } else {
                        {
                            let upper_j = upper.j.read().unwrap();
                            upper_j.copy_rows_out(0, 1, &mut hi);
                        }
                        let j = slot.j.read().unwrap();
                        run_yee(&cfg, &mut emf, &j, 0, &hi);
                    }
                }
                Some(g) => {
                    let j = unsafe { g.get() };
                    let next_row = ((slot.y0 + slot.n_rows) % cfg.ny) as i32;
                    j.copy_rows_out(next_row, 1, &mut hi);
                    run_yee(&cfg, &mut emf, j, slot.y0 as i32, &hi);
                }
            }

            if !cfg.moving_window {
                emf.copy_guard_x();
            }
            let mut edge_lo = slot.edge_lo.lock().unwrap();
            let mut edge_hi = slot.edge_hi.lock().unwrap();
            regions::capture_edges(&emf, slot.n_rows, &mut edge_lo, &mut edge_hi);
        }
    }

    fn exchange_body(&self, r: usize) -> impl FnOnce() + Send + 'static {
        let slots = Arc::clone(&self.slots);
        let n = self.slots.len();
        let clause_mode = self.clause_mode;
        move || {
            let slot = &slots[r];
            let lower = &slots[(r + n - 1) % n];
            let upper = &slots[(r + 1) % n];
            check_access(clause_mode, slot.res.eb, true);
            check_access(clause_mode, lower.res.edge_hi, false);
            check_access(clause_mode, upper.res.edge_lo, false);
            let mut emf = slot.emf.write().unwrap();
            let edge_hi = lower.edge_hi.lock().unwrap();
            let edge_lo = upper.edge_lo.lock().unwrap();
            regions::exchange_ghost_fields(&mut emf, slot.n_rows, &edge_hi, &edge_lo);
        }
    }

    fn migrate_body(&self, r: usize) -> impl FnOnce() + Send + 'static {
        let slots = Arc::clone(&self.slots);
        let n = self.slots.len();
        let clause_mode = self.clause_mode;
        move || {
            let slot = &slots[r];
            let lower = &slots[(r + n - 1) % n];
            let upper = &slots[(r + 1) % n];
            check_access(clause_mode, slot.res.p, true);
            check_access(clause_mode, lower.res.out_hi, true);
            check_access(clause_mode, upper.res.out_lo, true);
            let mut parts = slot.parts.write().unwrap();
            let mut from_lo = lower.out_hi.lock().unwrap();
            let mut from_hi = upper.out_lo.lock().unwrap();
            for s in 0..parts.len() {
                for mut p in from_lo[s].drain(..) {
                    regions::relocalize(&mut p, true, lower.n_rows, slot.n_rows, r)
                        .unwrap_or_else(|e| panic!("{e}"));
                    parts[s].push(p);
                }
                for mut p in from_hi[s].drain(..) {
                    regions::relocalize(&mut p, false, 0, slot.n_rows, r)
                        .unwrap_or_else(|e| panic!("{e}"));
                    parts[s].push(p);
                }
            }
        }
    }

    // ----- step spawners -----

    fn spawn_tasklike_step(
        &self,
        rt: &TaskRuntime,
        step: u32,
        shift: bool,
        epoch: u32,
        gate: &Arc<StepGate>,
    ) -> Result<(), RunError> {
        let n = self.slots.len();
        for r in 0..n {
            self.spawn_gated(rt, Vec::new(), gate, Stage::Advance, self.advance_body(r, step, shift, epoch))?;
        }
        rt.taskwait();
        for r in 0..n {
            self.spawn_gated(rt, Vec::new(), gate, Stage::Reduce, self.reduce_body(r, step))?;
        }
        rt.taskwait();
        for r in 0..n {
            self.spawn_gated(rt, Vec::new(), gate, Stage::Field, self.field_body(r, step))?;
        }
        rt.taskwait();
        for r in 0..n {
            self.spawn_gated(rt, Vec::new(), gate, Stage::Exchange, self.exchange_body(r))?;
            self.spawn_gated(rt, Vec::new(), gate, Stage::Migrate, self.migrate_body(r))?;
        }
        rt.taskwait();
        Ok(())
    }

    /// Submission is stage-major (every region's advance, then every
    /// region's reduction, ...): dependencies only reach tasks submitted
    /// earlier, and the ring wraps, so region 0's reduction must come after
    /// the last region's advance is registered.
    fn spawn_clause_step(
        &self,
        rt: &TaskRuntime,
        step: u32,
        shift: bool,
        epoch: u32,
        gate: &Arc<StepGate>,
    ) -> Result<(), RunError> {
        let n = self.slots.len();
        let mw = self.cfg.moving_window;

        // zero tasks first (commutative shared current only)
        if let Some((_, strips, mids)) = &self.shared {
            for r in 0..n {
                let lo_strip = strips[(r + n - 1) % n];
                let clauses = self.clauses(vec![
                    AccessClause::read_write(lo_strip),
                    AccessClause::read_write(strips[r]),
                    AccessClause::read_write(mids[r]),
                ]);
                self.spawn_gated(rt, clauses, gate, Stage::Reduce, self.zero_body(r))?;
            }
        }

        for r in 0..n {
            let slot = &self.slots[r];
            let mut list = vec![
                AccessClause::read_write(slot.res.p),
                if mw {
                    AccessClause::read_write(slot.res.eb)
                } else {
                    AccessClause::read(slot.res.eb)
                },
                AccessClause::read_write(slot.res.out_lo),
                AccessClause::read_write(slot.res.out_hi),
            ];
            match &self.shared {
                None => {
                    list.push(AccessClause::read_write(slot.res.j));
                    list.push(AccessClause::write(slot.res.spill_lo));
                    list.push(AccessClause::write(slot.res.spill_hi));
                }
                Some((_, strips, mids)) => {
                    list.push(AccessClause::commutative(strips[(r + n - 1) % n]));
                    list.push(AccessClause::commutative(strips[r]));
                    list.push(AccessClause::read_write(mids[r]));
                }
            }
            self.spawn_gated(
                rt,
                self.clauses(list),
                gate,
                Stage::Advance,
                self.advance_body(r, step, shift, epoch),
            )?;
        }

        for r in 0..n {
            let slot = &self.slots[r];
            let lower = &self.slots[(r + n - 1) % n];
            let upper = &self.slots[(r + 1) % n];
            let list = match &self.shared {
                None => vec![
                    AccessClause::read_write(slot.res.j),
                    AccessClause::read(lower.res.spill_hi),
                    AccessClause::read(upper.res.spill_lo),
                ],
                Some((_, strips, mids)) => vec![
                    AccessClause::read_write(strips[(r + n - 1) % n]),
                    AccessClause::read_write(strips[r]),
                    AccessClause::read_write(mids[r]),
                ],
            };
            self.spawn_gated(rt, self.clauses(list), gate, Stage::Reduce, self.reduce_body(r, step))?;
        }

        for r in 0..n {
            let slot = &self.slots[r];
            let upper = &self.slots[(r + 1) % n];
            let mut list = vec![
                AccessClause::read_write(slot.res.eb),
                AccessClause::write(slot.res.edge_lo),
                AccessClause::write(slot.res.edge_hi),
            ];
            match &self.shared {
                None => {
                    list.push(AccessClause::read(slot.res.j));
                    list.push(AccessClause::read(upper.res.j));
                }
                Some((_, strips, mids)) => {
                    list.push(AccessClause::read(strips[(r + n - 1) % n]));
                    list.push(AccessClause::read(strips[r]));
                    list.push(AccessClause::read(mids[r]));
                }
            }
            self.spawn_gated(rt, self.clauses(list), gate, Stage::Field, self.field_body(r, step))?;
        }

        for r in 0..n {
            let slot = &self.slots[r];
            let lower = &self.slots[(r + n - 1) % n];
            let upper = &self.slots[(r + 1) % n];
            let list = vec![
                AccessClause::read_write(slot.res.eb),
                AccessClause::read(lower.res.edge_hi),
                AccessClause::read(upper.res.edge_lo),
            ];
            self.spawn_gated(rt, self.clauses(list), gate, Stage::Exchange, self.exchange_body(r))?;
        }

        for r in 0..n {
            let slot = &self.slots[r];
            let lower = &self.slots[(r + n - 1) % n];
            let upper = &self.slots[(r + 1) % n];
            let list = vec![
                AccessClause::read_write(slot.res.p),
                AccessClause::read_write(lower.res.out_hi),
                AccessClause::read_write(upper.res.out_lo),
            ];
            self.spawn_gated(rt, self.clauses(list), gate, Stage::Migrate, self.migrate_body(r))?;
        }
        Ok(())
    }

    // ----- reports -----

    fn report_clauses(&self) -> Vec<AccessClause> {
        let mut list = Vec::new();
        for slot in self.slots.iter() {
            list.push(AccessClause::read(slot.res.p));
            list.push(AccessClause::read(slot.res.eb));
            if self.shared.is_none() {
                list.push(AccessClause::read(slot.res.j));
            }
        }
        if let Some((_, strips, mids)) = &self.shared {
            for s in strips {
                list.push(AccessClause::read(*s));
            }
            for m in mids {
                list.push(AccessClause::read(*m));
            }
        }
        self.clauses(list)
    }

    fn spawn_report_task(
        &self,
        rt: &TaskRuntime,
        spec: ReportSpec,
        iter: u32,
    ) -> Result<(), RunError> {
        let cfg = Arc::clone(&self.cfg);
        let slots = Arc::clone(&self.slots);
        let shared = self.shared.as_ref().map(|(g, _, _)| Arc::clone(g));
        let clock = Arc::clone(&self.clock);
        rt.spawn(self.report_clauses(), move || {
            emit_report_from_slots(&cfg, &slots, shared.as_deref(), &spec, iter, &clock);
        })?;
        Ok(())
    }

    fn emit_report_inline(&self, spec: &ReportSpec, iter: u32) {
        let shared = self.shared.as_ref().map(|(g, _, _)| g.as_ref());
        emit_report_from_slots(&self.cfg, &self.slots, shared, spec, iter, &self.clock);
    }
}

fn run_yee(cfg: &SimConfig, emf: &mut EMFields, j: &VecGrid, j_y_off: i32, hi: &RowBand) {
    kernels::yee_advance(
        emf,
        j,
        j_y_off,
        Some([&hi.x, &hi.y, &hi.z]),
        cfg.dt,
        cfg.dx(),
        cfg.dy(),
    );
}

fn emit_report_from_slots(
    cfg: &SimConfig,
    slots: &[RegionSlot],
    shared: Option<&SharedGrid>,
    spec: &ReportSpec,
    iter: u32,
    clock: &StageClock,
) {
    for q in &spec.quantities {
        let report = report_from_slots(cfg, slots, shared, *q, iter);
        let path = spec.out_dir.join(format!("{}-{}.zdump", q.name(), iter));
        if let Err(err) = crate::diagnostics::write_report(&report, &path) {
            eprintln!("warning: dump {} failed: {err}", path.display());
        }
    }
    if let Some(path) = &spec.energy {
        let line = energy_from_slots(cfg, slots, iter).to_ndjson();
        super::append_line(path, &line);
    }
    if let Some(path) = &spec.timing {
        super::emit_timing(clock, iter, path);
    }
}

fn report_from_slots(
    cfg: &SimConfig,
    slots: &[RegionSlot],
    shared: Option<&SharedGrid>,
    quantity: Quantity,
    iter: u32,
) -> FieldReport {
    let (nx, ny) = (cfg.nx, cfg.ny);
    let mut data = vec![0.0f32; nx * ny];
    match quantity {
        Quantity::Charge(s) => {
            let q = cfg.species[s as usize].particle_charge();
            let mut rho = VecGrid::new(nx, ny);
            for slot in slots {
                let parts = slot.parts.read().unwrap();
                for p in &parts[s as usize] {
                    let global = Particle { iy: p.iy + slot.y0 as i32, ..*p };
                    crate::grid::deposit_charge(&mut rho, &global, q);
                }
            }
            if !cfg.moving_window {
                rho.fold_x_periodic(0..ny as i32);
            }
            rho.fold_y_periodic();
            for iy in 0..ny {
                let s0 = (iy + G_LO) * rho.row_stride() + G_LO;
                data[iy * nx..(iy + 1) * nx].copy_from_slice(&rho.z[s0..s0 + nx]);
            }
        }
        _ => {
            let comp = match quantity {
                Quantity::Ex | Quantity::Bx | Quantity::Jx => 0,
                Quantity::Ey | Quantity::By | Quantity::Jy => 1,
                _ => 2,
            };
            let is_j = matches!(quantity, Quantity::Jx | Quantity::Jy | Quantity::Jz);
            let is_e = matches!(quantity, Quantity::Ex | Quantity::Ey | Quantity::Ez);
            for slot in slots {
                if is_j {
                    if let Some(g) = shared {
                        let grid = unsafe { g.get() };
                        for r in 0..slot.n_rows {
                            let dst = (slot.y0 + r) * nx;
                            grid.interior_row(comp, slot.y0 + r, &mut data[dst..dst + nx]);
                        }
                    } else {
                        let j = slot.j.read().unwrap();
                        for r in 0..slot.n_rows {
                            let dst = (slot.y0 + r) * nx;
                            j.interior_row(comp, r, &mut data[dst..dst + nx]);
                        }
                    }
                } else {
                    let emf = slot.emf.read().unwrap();
                    let grid = if is_e { &emf.e } else { &emf.b };
                    for r in 0..slot.n_rows {
                        let dst = (slot.y0 + r) * nx;
                        grid.interior_row(comp, r, &mut data[dst..dst + nx]);
                    }
                }
            }
        }
    }
    FieldReport {
        quantity,
        iter,
        nx: nx as u32,
        ny: ny as u32,
        data,
    }
}

fn energy_from_slots(cfg: &SimConfig, slots: &[RegionSlot], iter: u32) -> EnergyReport {
    let cell = cfg.dx() as f64 * cfg.dy() as f64;
    let mut field = 0.0f64;
    for slot in slots {
        let emf = slot.emf.read().unwrap();
        field += 0.5 * (emf.e.interior_sq_sum() + emf.b.interior_sq_sum()) * cell;
    }
    let mut per_species = vec![0.0f64; cfg.species.len()];
    for slot in slots {
        let parts = slot.parts.read().unwrap();
        for (s, spec) in cfg.species.iter().enumerate() {
            let mass = spec.particle_mass() as f64;
            per_species[s] += parts[s]
                .iter()
                .map(|p| mass * (p.gamma() - 1.0))
                .sum::<f64>()
                * cell;
        }
    }
    EnergyReport {
        iter,
        field_energy: field,
        kinetic_energy: per_species.iter().sum(),
        per_species,
    }
}
