//! Every backend must produce the same physics as the sequential baseline.

use empic_core::backends::{self, BackendKind, SimState};
use empic_core::config::{FilterKind, FilterSpec, SimConfig, SpeciesSpec};
use empic_core::diagnostics::{self, Quantity};

fn weibel_config(nx: usize, ny: usize, n_regions: usize, n_steps: u32) -> SimConfig {
    let electrons = SpeciesSpec {
        name: "electrons".into(),
        m_q: -1.0,
        ppc_x: 2,
        ppc_y: 2,
        u_fl: [0.0, 0.0, 0.6],
        u_th: [0.1, 0.1, 0.1],
        density: 1.0,
    };
    let positrons = SpeciesSpec {
        name: "positrons".into(),
        m_q: 1.0,
        u_fl: [0.0, 0.0, -0.6],
        ..electrons.clone()
    };
    SimConfig {
        nx,
        ny,
        box_x: nx as f32 * 0.1,
        box_y: ny as f32 * 0.1,
        dt: 0.07,
        n_steps,
        n_regions,
        seed: 11,
        filter: FilterSpec { kind: FilterKind::Binomial, n_passes: 1 },
        moving_window: false,
        species: vec![electrons, positrons],
        laser: None,
    }
}

fn cold_config(nx: usize, ny: usize, n_regions: usize, n_steps: u32) -> SimConfig {
    SimConfig {
        species: vec![SpeciesSpec {
            name: "electrons".into(),
            m_q: -1.0,
            ppc_x: 2,
            ppc_y: 2,
            u_fl: [0.0; 3],
            u_th: [0.0; 3],
            density: 1.0,
        }],
        filter: FilterSpec::default(),
        ..weibel_config(nx, ny, n_regions, n_steps)
    }
}

fn run_backend(cfg: SimConfig, kind: BackendKind, workers: usize) -> SimState {
    let steps = cfg.n_steps;
    let mut state = SimState::build(cfg, kind).unwrap();
    backends::run(&mut state, steps, kind, workers).unwrap();
    state
}

#[test]
fn zero_steps_leaves_state_unchanged() {
    let cfg = weibel_config(16, 16, 2, 0);
    let mut state = SimState::build(cfg, BackendKind::Serial).unwrap();
    let before = diagnostics::field_report(&state, Quantity::Ey);
    let pop = state.population();
    backends::run(&mut state, 0, BackendKind::Serial, 1).unwrap();
    assert_eq!(diagnostics::field_report(&state, Quantity::Ey), before);
    assert_eq!(state.population(), pop);
    assert_eq!(state.iter, 0);
}

/// Cold uniform plasma with no fields: nothing moves, nothing is deposited,
/// for every backend.
#[test]
fn cold_static_plasma_stays_exactly_zero() {
    for kind in BackendKind::ALL {
        let cfg = cold_config(16, 16, if kind.is_regional() { 4 } else { 1 }, 25);
        let state = run_backend(cfg, kind, 2);
        let energy = diagnostics::energy_report(&state);
        assert_eq!(energy.field_energy, 0.0, "{kind}: field energy");
        assert_eq!(energy.kinetic_energy, 0.0, "{kind}: kinetic energy");
        for q in [Quantity::Ex, Quantity::Bz, Quantity::Jx, Quantity::Jz] {
            let map = diagnostics::field_report(&state, q);
            assert!(map.data.iter().all(|v| *v == 0.0), "{kind}: {q:?} non-zero");
        }
        state.for_each_particle(0, |p, _| {
            assert_eq!((p.ux, p.uy, p.uz), (0.0, 0.0, 0.0));
        });
    }
}

/// Dumps are decomposition-invariant when the physics is: a cold static run
/// produces byte-identical charge maps for 1, 2, and 4 regions.
#[test]
fn cold_dumps_are_decomposition_invariant() {
    let reports: Vec<_> = [1usize, 2, 4]
        .into_iter()
        .map(|n_regions| {
            let state = run_backend(cold_config(16, 16, n_regions, 10), BackendKind::ReductionSync, 2);
            diagnostics::field_report(&state, Quantity::Charge(0))
        })
        .collect();
    assert_eq!(reports[0].data, reports[1].data);
    assert_eq!(reports[0].data, reports[2].data);
}

/// parallel-for with one thread takes the serial code path bit for bit.
#[test]
fn parallel_for_one_thread_is_bitwise_serial() {
    let a = run_backend(weibel_config(16, 16, 1, 30), BackendKind::Serial, 1);
    let b = run_backend(weibel_config(16, 16, 1, 30), BackendKind::ParallelFor, 1);
    for q in [Quantity::Ex, Quantity::Ey, Quantity::Ez, Quantity::Bx, Quantity::By, Quantity::Bz] {
        let ra = diagnostics::field_report(&a, q);
        let rb = diagnostics::field_report(&b, q);
        assert!(
            ra.data.iter().zip(&rb.data).all(|(x, y)| x.to_bits() == y.to_bits()),
            "{q:?} differs bitwise"
        );
    }
}

/// Fixed seed, serial backend: two runs are bit-identical.
#[test]
fn serial_reruns_are_bit_identical() {
    let a = run_backend(weibel_config(16, 16, 1, 30), BackendKind::Serial, 1);
    let b = run_backend(weibel_config(16, 16, 1, 30), BackendKind::Serial, 1);
    let ra = diagnostics::field_report(&a, Quantity::Bz);
    let rb = diagnostics::field_report(&b, Quantity::Bz);
    assert!(ra.data.iter().zip(&rb.data).all(|(x, y)| x.to_bits() == y.to_bits()));
}

/// The degenerate decomposition (one region, one worker) agrees with serial
/// to reassociation-level error for every task variant.
#[test]
fn single_region_single_worker_matches_serial() {
    let reference = run_backend(weibel_config(16, 16, 1, 40), BackendKind::Serial, 1);
    let ref_bz = diagnostics::field_report(&reference, Quantity::Bz);
    for kind in [
        BackendKind::Tasklike,
        BackendKind::ReductionSync,
        BackendKind::ReductionAsync,
        BackendKind::CommutativeSync,
        BackendKind::CommutativeAsync,
    ] {
        let state = run_backend(weibel_config(16, 16, 1, 40), kind, 1);
        let bz = diagnostics::field_report(&state, Quantity::Bz);
        let diff = diagnostics::compare_field_maps(&ref_bz, &bz).unwrap();
        assert!(diff.max_rel <= 1e-5, "{kind}: max rel {},", diff.max_rel);
    }
}

/// All seven backends agree on the final magnetic field map of a short
/// filamentation run, and conserve the particle population.
#[test]
fn all_backends_agree_on_short_weibel() {
    let reference = run_backend(weibel_config(24, 24, 1, 60), BackendKind::Serial, 1);
    let ref_bz = diagnostics::field_report(&reference, Quantity::Bz);
    let ref_pop = reference.population();

    for kind in BackendKind::ALL {
        if kind == BackendKind::Serial {
            continue;
        }
        let n_regions = if kind.is_regional() { 6 } else { 1 };
        let state = run_backend(weibel_config(24, 24, n_regions, 60), kind, 4);
        assert_eq!(state.population(), ref_pop, "{kind}: particle count");
        assert_eq!(state.iter, 60, "{kind}: step counter");
        let bz = diagnostics::field_report(&state, Quantity::Bz);
        let diff = diagnostics::compare_field_maps(&ref_bz, &bz).unwrap();
        assert!(
            diff.max_rel <= 1e-3,
            "{kind}: Bz max rel error {} vs serial",
            diff.max_rel
        );
    }
}

/// The parallel-for reduction is independent of the thread count to
/// reassociation level.
#[test]
fn parallel_for_thread_count_independence() {
    let a = run_backend(weibel_config(16, 16, 1, 30), BackendKind::ParallelFor, 2);
    let b = run_backend(weibel_config(16, 16, 1, 30), BackendKind::ParallelFor, 8);
    let ra = diagnostics::field_report(&a, Quantity::Bz);
    let rb = diagnostics::field_report(&b, Quantity::Bz);
    let diff = diagnostics::compare_field_maps(&ra, &rb).unwrap();
    assert!(diff.max_rel <= 1e-5, "max rel {}", diff.max_rel);
}

/// Commutative advance tasks of adjacent regions never overlap in time:
/// proven from the schedule trace, which records every task's clauses and
/// nanosecond-resolution execution interval.
#[test]
fn commutative_adjacent_advances_never_overlap() {
    let dir = std::env::temp_dir().join(format!("empic-trace-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let trace = dir.join("commutative.ndjson");

    let cfg = weibel_config(24, 24, 6, 20);
    let steps = cfg.n_steps;
    let mut state = SimState::build(cfg, BackendKind::CommutativeAsync).unwrap();
    let hooks = backends::RunHooks { report: None, trace: Some(trace.clone()) };
    backends::run_with(&mut state, steps, BackendKind::CommutativeAsync, 4, hooks).unwrap();

    let text = std::fs::read_to_string(&trace).unwrap();
    let mut by_resource: std::collections::BTreeMap<String, Vec<(u64, u64)>> =
        std::collections::BTreeMap::new();
    for line in text.lines() {
        let get = |key: &str| -> Option<&str> {
            let tag = format!("\"{key}\":");
            let at = line.find(&tag)? + tag.len();
            let rest = &line[at..];
            let end = rest.find([',', '}']).unwrap_or(rest.len());
            Some(&rest[..end])
        };
        let clauses = line.split("\"clauses\":\"").nth(1).unwrap_or("").trim_end_matches("\"}");
        if !clauses.contains("commutative(") {
            continue;
        }
        let start: u64 = get("start_ns").unwrap().parse().unwrap();
        let end: u64 = get("end_ns").unwrap().parse().unwrap();
        for part in clauses.split(' ') {
            if let Some(r) = part.strip_prefix("commutative(") {
                by_resource
                    .entry(r.trim_end_matches(')').to_string())
                    .or_default()
                    .push((start, end));
            }
        }
    }
    assert!(!by_resource.is_empty(), "no commutative tasks in trace");

    for (resource, mut spans) in by_resource {
        spans.sort_unstable();
        for w in spans.windows(2) {
            let ((s0, e0), (s1, e1)) = (w[0], w[1]);
            assert!(
                s1 >= e0,
                "commutative tasks overlap on {resource}: [{s0},{e0}) vs [{s1},{e1})"
            );
        }
    }
    std::fs::remove_dir_all(&dir).ok();
}
