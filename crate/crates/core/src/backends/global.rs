//! Global-buffer drivers: the sequential baseline and the particle-
//! decomposed parallel-for scheme.

use super::{GlobalState, Layout, RunError, RunHooks, SimState, Stage};
use crate::config::SimConfig;
use crate::grid::{VecGrid, G_HI, G_LO};
use crate::inject;
use crate::kernels::{self, StepCoeffs};
use crate::particle::Particle;
use crate::regions::{self, SpeciesBin};
use std::time::Instant;

/// Sequential baseline: the four stages in order on global buffers.
pub fn run_serial(state: &mut SimState, n_steps: u32, hooks: &RunHooks) -> Result<(), RunError> {
    let cfg = state.cfg.clone();
    let coeffs = regions::species_coeffs(&cfg);
    let Layout::Global(gs) = &mut state.layout else {
        return Err(RunError::LayoutMismatch { kind: super::BackendKind::Serial, need: "global" });
    };

    for _ in 0..n_steps {
        serial_step(&cfg, gs, &coeffs, &mut state.iter, &mut state.n_move, &state.clock);
        maybe_report(&cfg, gs, state.iter, state.n_move, hooks, &state.clock);
    }
    Ok(())
}

/// Report completed step boundaries (the step-0 report is the caller's).
/// The buffers move into a shell state for the diagnostics and back.
fn maybe_report(
    cfg: &SimConfig,
    gs: &mut GlobalState,
    iter: u32,
    n_move: u32,
    hooks: &RunHooks,
    clock: &super::StageClock,
) {
    let Some(spec) = &hooks.report else { return };
    if iter == 0 || !iter.is_multiple_of(spec.interval) {
        return;
    }
    let taken = std::mem::replace(
        gs,
        GlobalState {
            emf: crate::grid::EMFields::new(1, 1),
            j: crate::grid::CurrentDensity::new(1, 1),
            species: Vec::new(),
        },
    );
    let shell = SimState {
        cfg: cfg.clone(),
        iter,
        n_move,
        layout: Layout::Global(taken),
        clock: super::StageClock::default(),
    };
    let mut shell_spec = spec.clone();
    shell_spec.timing = None;
    super::emit_report_for_state(&shell, &shell_spec);
    if let Some(path) = &spec.timing {
        super::emit_timing(clock, iter, path);
    }
    let Layout::Global(taken) = shell.layout else { unreachable!() };
    *gs = taken;
}

fn serial_step(
    cfg: &SimConfig,
    gs: &mut GlobalState,
    coeffs: &[StepCoeffs],
    iter: &mut u32,
    n_move: &mut u32,
    clock: &super::StageClock,
) {
    let nx = cfg.nx as i32;
    let ny = cfg.ny as i32;

    if cfg.moving_window && kernels::window_due(*iter, cfg.dt, cfg.dx(), *n_move) {
        let t = Instant::now();
        *n_move += 1;
        shift_global_window(cfg, gs, *n_move);
        clock.add(Stage::Window, t.elapsed());
    }

    let t = Instant::now();
    gs.j.j.zero();
    for (bin, c) in gs.species.iter_mut().zip(coeffs) {
        regions::advance_species_into(bin, c, &gs.emf, &mut gs.j.j, 0, nx, ny, cfg.moving_window, true);
    }
    clock.add(Stage::Advance, t.elapsed());

    let t = Instant::now();
    current_update(cfg, &mut gs.j.j);
    clock.add(Stage::Reduce, t.elapsed());

    let t = Instant::now();
    kernels::yee_advance(&mut gs.emf, &gs.j.j, 0, None, cfg.dt, cfg.dx(), cfg.dy());
    gs.emf.copy_guard_y();
    if !cfg.moving_window {
        gs.emf.copy_guard_x();
    }
    clock.add(Stage::Field, t.elapsed());

    *iter += 1;
}

/// Periodic reduction of guard deposits plus smoothing: fold x guards (all
/// padded rows, unless the window moves), fold y guards, filter, and leave
/// every guard cell holding a copy consistent with the periodic interior.
fn current_update(cfg: &SimConfig, j: &mut VecGrid) {
    let ny = cfg.ny as i32;
    if !cfg.moving_window {
        j.fold_x_periodic(-(G_LO as i32)..ny + G_HI as i32);
    }
    j.fold_y_periodic();
    kernels::filter_current(j, &cfg.filter, !cfg.moving_window);
    j.copy_guard_y();
}

fn shift_global_window(cfg: &SimConfig, gs: &mut GlobalState, epoch: u32) {
    kernels::shift_grid_left(&mut gs.emf.e);
    kernels::shift_grid_left(&mut gs.emf.b);
    let nx = cfg.nx as i32;
    for (s, spec) in cfg.species.iter().enumerate() {
        let bin = &mut gs.species[s];
        let mut i = 0;
        while i < bin.parts.len() {
            bin.parts[i].ix -= 1;
            if bin.parts[i].ix < 0 {
                bin.parts.swap_remove(i);
            } else {
                i += 1;
            }
        }
        inject::inject_cells(s, spec, cfg, nx - 1..nx, 0..cfg.ny as i32, 0, epoch, &mut bin.parts);
    }
}

/// Particle-decomposed scheme: stages 1–3 chunk the particles statically
/// over the threads, each depositing into a private full-grid current copy;
/// the copies are summed in row stripes; stage 4 chunks grid rows. A barrier
/// separates every stage. With one thread this is exactly the serial path.
pub fn run_parallel_for(
    state: &mut SimState,
    n_steps: u32,
    n_threads: usize,
    hooks: &RunHooks,
) -> Result<(), RunError> {
    if n_threads <= 1 {
        return run_serial(state, n_steps, hooks);
    }
    let cfg = state.cfg.clone();
    let coeffs = regions::species_coeffs(&cfg);
    let Layout::Global(gs) = &mut state.layout else {
        return Err(RunError::LayoutMismatch {
            kind: super::BackendKind::ParallelFor,
            need: "global",
        });
    };

    // Static even particle split, fixed for the whole run.
    let mut chunks: Vec<ThreadChunk> = (0..n_threads)
        .map(|_| ThreadChunk {
            species: vec![Vec::new(); cfg.species.len()],
            j: VecGrid::new(cfg.nx, cfg.ny),
        })
        .collect();
    for (s, bin) in gs.species.iter_mut().enumerate() {
        let parts = std::mem::take(&mut bin.parts);
        let per = parts.len().div_ceil(n_threads);
        let mut iter = parts.into_iter();
        for chunk in chunks.iter_mut() {
            chunk.species[s] = iter.by_ref().take(per.max(1)).collect();
        }
    }

    for _ in 0..n_steps {
        parallel_step(&cfg, gs, &coeffs, &mut chunks, &mut state.iter, &mut state.n_move, &state.clock);
        report_from_chunks(&cfg, gs, &chunks, state.iter, state.n_move, hooks, &state.clock);
    }
    merge_chunks(gs, &mut chunks, cfg.species.len());
    Ok(())
}

struct ThreadChunk {
    species: Vec<Vec<Particle>>,
    j: VecGrid,
}

fn merge_chunks(gs: &mut GlobalState, chunks: &mut [ThreadChunk], n_species: usize) {
    for s in 0..n_species {
        for chunk in chunks.iter_mut() {
            gs.species[s].parts.append(&mut chunk.species[s]);
        }
    }
}

/// Mid-run report under the particle decomposition: particles are cloned
/// out of the chunks (leaving the static assignment untouched) and the grids
/// move into a shell state and back.
fn report_from_chunks(
    cfg: &SimConfig,
    gs: &mut GlobalState,
    chunks: &[ThreadChunk],
    iter: u32,
    n_move: u32,
    hooks: &RunHooks,
    clock: &super::StageClock,
) {
    let Some(spec) = &hooks.report else { return };
    if iter == 0 || !iter.is_multiple_of(spec.interval) {
        return;
    }
    let emf = std::mem::replace(&mut gs.emf, crate::grid::EMFields::new(1, 1));
    let j = std::mem::replace(&mut gs.j, crate::grid::CurrentDensity::new(1, 1));
    let species = (0..cfg.species.len())
        .map(|s| SpeciesBin {
            parts: chunks.iter().flat_map(|c| c.species[s].iter().copied()).collect(),
            out_lo: Vec::new(),
            out_hi: Vec::new(),
        })
        .collect();
    let shell = SimState {
        cfg: cfg.clone(),
        iter,
        n_move,
        layout: Layout::Global(GlobalState { emf, j, species }),
        clock: super::StageClock::default(),
    };
    let mut shell_spec = spec.clone();
    shell_spec.timing = None;
    super::emit_report_for_state(&shell, &shell_spec);
    if let Some(path) = &spec.timing {
        super::emit_timing(clock, iter, path);
    }
    let Layout::Global(taken) = shell.layout else { unreachable!() };
    gs.emf = taken.emf;
    gs.j = taken.j;
}

#[allow(clippy::too_many_arguments)]
fn parallel_step(
    cfg: &SimConfig,
    gs: &mut GlobalState,
    coeffs: &[StepCoeffs],
    chunks: &mut [ThreadChunk],
    iter: &mut u32,
    n_move: &mut u32,
    clock: &super::StageClock,
) {
    let n_threads = chunks.len();
    let nx = cfg.nx as i32;
    let ny = cfg.ny as i32;

    // moving window: fields shift on the master, particles per chunk
    if cfg.moving_window && kernels::window_due(*iter, cfg.dt, cfg.dx(), *n_move) {
        let t = Instant::now();
        *n_move += 1;
        kernels::shift_grid_left(&mut gs.emf.e);
        kernels::shift_grid_left(&mut gs.emf.b);
        let epoch = *n_move;
        std::thread::scope(|scope| {
            for (t_idx, chunk) in chunks.iter_mut().enumerate() {
                let cfg = &*cfg;
                scope.spawn(move || {
                    for (s, spec) in cfg.species.iter().enumerate() {
                        let parts = &mut chunk.species[s];
                        let mut i = 0;
                        while i < parts.len() {
                            parts[i].ix -= 1;
                            if parts[i].ix < 0 {
                                parts.swap_remove(i);
                            } else {
                                i += 1;
                            }
                        }
                        // deterministic round-robin refill of the new column
                        let mut fresh = Vec::new();
                        inject::inject_cells(s, spec, cfg, nx - 1..nx, 0..ny, 0, epoch, &mut fresh);
                        parts.extend(
                            fresh
                                .into_iter()
                                .enumerate()
                                .filter(|(k, _)| k % n_threads == t_idx)
                                .map(|(_, p)| p),
                        );
                    }
                });
            }
        });
        clock.add(Stage::Window, t.elapsed());
    }

    // stages 1-3: particle chunks into private current copies
    let t = Instant::now();
    let emf = &gs.emf;
    std::thread::scope(|scope| {
        for chunk in chunks.iter_mut() {
            scope.spawn(move || {
                chunk.j.zero();
                for (s, c) in coeffs.iter().enumerate() {
                    let mut bin = SpeciesBin {
                        parts: std::mem::take(&mut chunk.species[s]),
                        out_lo: Vec::new(),
                        out_hi: Vec::new(),
                    };
                    regions::advance_species_into(
                        &mut bin,
                        c,
                        emf,
                        &mut chunk.j,
                        0,
                        nx,
                        ny,
                        cfg.moving_window,
                        true,
                    );
                    chunk.species[s] = bin.parts;
                }
            });
        }
    });
    clock.add(Stage::Advance, t.elapsed());

    // reduction: row stripes of the global buffer sum all copies
    let t = Instant::now();
    let total_rows = G_LO + cfg.ny + G_HI;
    let blocks = row_blocks(total_rows, n_threads);
    let w = gs.j.j.row_stride();
    {
        let copies: Vec<&VecGrid> = chunks.iter().map(|c| &c.j).collect();
        let stripe_specs: Vec<(i32, usize)> = blocks
            .iter()
            .map(|r| (r.start as i32 - G_LO as i32, r.len()))
            .collect();
        let mut stripes = gs.j.j.stripes_mut(&stripe_specs);
        std::thread::scope(|scope| {
            for stripe in stripes.iter_mut() {
                let copies = &copies;
                scope.spawn(move || {
                    let p0 = (stripe.iy0 + G_LO as i32) as usize * w;
                    let len = stripe.n_rows * w;
                    stripe.x.fill(0.0);
                    stripe.y.fill(0.0);
                    stripe.z.fill(0.0);
                    for copy in copies.iter() {
                        for (d, s) in stripe.x.iter_mut().zip(&copy.x[p0..p0 + len]) {
                            *d += *s;
                        }
                        for (d, s) in stripe.y.iter_mut().zip(&copy.y[p0..p0 + len]) {
                            *d += *s;
                        }
                        for (d, s) in stripe.z.iter_mut().zip(&copy.z[p0..p0 + len]) {
                            *d += *s;
                        }
                    }
                });
            }
        });
    }
    // guard folds + filter stay on the master; cheap against particle work
    current_update(cfg, &mut gs.j.j);
    clock.add(Stage::Reduce, t.elapsed());

    // stage 4: field rows chunked over threads, one barrier per half-step
    let t = Instant::now();
    let (dt, dx, dy) = (cfg.dt, cfg.dx(), cfg.dy());
    {
        let b_blocks: Vec<(i32, usize)> = row_blocks(cfg.ny + 2, n_threads)
            .iter()
            .map(|r| (r.start as i32 - 1, r.len()))
            .collect();
        let e_blocks: Vec<(i32, usize)> = row_blocks(cfg.ny + 1, n_threads)
            .iter()
            .map(|r| (r.start as i32, r.len()))
            .collect();

        let e_grid = &gs.emf.e;
        let b_grid = &mut gs.emf.b;
        let mut stripes = b_grid.stripes_mut(&b_blocks);
        std::thread::scope(|scope| {
            for stripe in stripes.iter_mut() {
                scope.spawn(move || kernels::yee_b_stripe(stripe, e_grid, 0.5 * dt, dx, dy));
            }
        });

        let j = &gs.j.j;
        let b_grid = &gs.emf.b;
        let e_grid = &mut gs.emf.e;
        let mut stripes = e_grid.stripes_mut(&e_blocks);
        std::thread::scope(|scope| {
            for stripe in stripes.iter_mut() {
                scope.spawn(move || kernels::yee_e_stripe(stripe, b_grid, j, 0, None, dt, dx, dy));
            }
        });

        let e_grid = &gs.emf.e;
        let b_grid = &mut gs.emf.b;
        let mut stripes = b_grid.stripes_mut(&b_blocks);
        std::thread::scope(|scope| {
            for stripe in stripes.iter_mut() {
                scope.spawn(move || kernels::yee_b_stripe(stripe, e_grid, 0.5 * dt, dx, dy));
            }
        });
    }
    gs.emf.copy_guard_y();
    if !cfg.moving_window {
        gs.emf.copy_guard_x();
    }
    clock.add(Stage::Field, t.elapsed());

    *iter += 1;
}

fn row_blocks(total: usize, n: usize) -> Vec<std::ops::Range<usize>> {
    let n = n.min(total).max(1);
    let base = total / n;
    let rem = total % n;
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let len = base + usize::from(i < rem);
        out.push(start..start + len);
        start += len;
    }
    out
}

