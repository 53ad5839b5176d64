//! Behavioral tests for the clause semantics and the worker pool.

use empic_tasking::{AccessClause, TaskError, TaskRuntime};
use std::sync::atomic::{AtomicI32, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

fn spin_for(d: Duration) {
    let t0 = Instant::now();
    while t0.elapsed() < d {
        std::hint::spin_loop();
    }
}

#[test]
fn reader_never_starts_before_writer() {
    let rt = TaskRuntime::start(4).unwrap();
    let a = rt.resource("A");
    for _ in 0..200 {
        let value = Arc::new(AtomicUsize::new(0));
        let seen = Arc::new(AtomicUsize::new(usize::MAX));
        let v = Arc::clone(&value);
        rt.spawn(vec![AccessClause::write(a)], move || {
            spin_for(Duration::from_micros(50));
            v.store(42, Ordering::SeqCst);
        })
        .unwrap();
        let (v, s) = (Arc::clone(&value), Arc::clone(&seen));
        rt.spawn(vec![AccessClause::read(a)], move || {
            s.store(v.load(Ordering::SeqCst), Ordering::SeqCst);
        })
        .unwrap();
        rt.taskwait();
        assert_eq!(seen.load(Ordering::SeqCst), 42);
    }
}

#[test]
fn writer_waits_for_readers() {
    let rt = TaskRuntime::start(4).unwrap();
    let a = rt.resource("A");
    for _ in 0..200 {
        let value = Arc::new(AtomicUsize::new(1));
        for _ in 0..3 {
            let v = Arc::clone(&value);
            rt.spawn(vec![AccessClause::read(a)], move || {
                let before = v.load(Ordering::SeqCst);
                spin_for(Duration::from_micros(30));
                // A reader must never observe the successor's write.
                assert_eq!(before, 1);
                assert_eq!(v.load(Ordering::SeqCst), 1);
            })
            .unwrap();
        }
        let v = Arc::clone(&value);
        rt.spawn(vec![AccessClause::read_write(a)], move || {
            v.store(2, Ordering::SeqCst);
        })
        .unwrap();
        rt.taskwait();
        assert_eq!(value.load(Ordering::SeqCst), 2);
    }
}

#[test]
fn inout_chain_runs_in_submission_order() {
    let rt = TaskRuntime::start(4).unwrap();
    let a = rt.resource("A");
    let log: Arc<Mutex<Vec<usize>>> = Arc::new(Mutex::new(Vec::new()));
    for i in 0..50 {
        let log = Arc::clone(&log);
        rt.spawn(vec![AccessClause::read_write(a)], move || {
            log.lock().unwrap().push(i);
        })
        .unwrap();
    }
    rt.taskwait();
    let log = log.lock().unwrap();
    assert_eq!(*log, (0..50).collect::<Vec<_>>());
}

#[test]
fn taskwait_with_no_pending_tasks_returns() {
    let rt = TaskRuntime::start(2).unwrap();
    rt.taskwait();
    rt.taskwait();
}

#[test]
fn taskwait_barrier_sees_all_slots() {
    let rt = TaskRuntime::start(4).unwrap();
    let slots: Arc<Vec<AtomicUsize>> = Arc::new((0..100).map(|_| AtomicUsize::new(0)).collect());
    for i in 0..100 {
        let slots = Arc::clone(&slots);
        rt.spawn(Vec::new(), move || {
            slots[i].store(1, Ordering::SeqCst);
        })
        .unwrap();
    }
    rt.taskwait();
    assert!(slots.iter().all(|s| s.load(Ordering::SeqCst) == 1));
}

/// Non-atomic read-modify-write under commutative clauses: exclusion makes the
/// final count exact for every interleaving.
#[test]
fn commutative_rmw_is_exact() {
    let rt = TaskRuntime::start(4).unwrap();
    let a = rt.resource("counter");
    // Deliberately unsynchronized inner cell; the clause is the only guard.
    struct Cell(std::cell::UnsafeCell<u64>);
    unsafe impl Sync for Cell {}
    let cell = Arc::new(Cell(std::cell::UnsafeCell::new(0)));

    let reps = 1_000;
    for _ in 0..reps {
        for _ in 0..4 {
            let cell = Arc::clone(&cell);
            rt.spawn(vec![AccessClause::commutative(a)], move || {
                let p = cell.0.get();
                let v = unsafe { p.read() };
                std::hint::black_box(v);
                unsafe { p.write(v + 1) };
            })
            .unwrap();
        }
        rt.taskwait();
    }
    assert_eq!(unsafe { cell.0.get().read() }, 4 * reps);
}

/// Commutative peers are mutually exclusive yet both relative orders occur
/// across stressed repetitions. A third peer holding the resource when the
/// pair becomes ready forces both through the requeue path, where the winner
/// is timing-dependent.
#[test]
fn commutative_pairs_run_in_both_orders() {
    let rt = TaskRuntime::start(4).unwrap();
    let a = rt.resource("A");
    let in_body = Arc::new(AtomicI32::new(0));
    let mut saw_first_first = false;
    let mut saw_second_first = false;

    let max_reps = 4_000;
    for rep in 0..max_reps {
        let order: Arc<Mutex<Vec<u8>>> = Arc::new(Mutex::new(Vec::new()));
        {
            let gauge = Arc::clone(&in_body);
            let hold = Duration::from_micros(20 + (rep % 37) as u64 * 3);
            rt.spawn(vec![AccessClause::commutative(a)], move || {
                assert_eq!(gauge.fetch_add(1, Ordering::SeqCst), 0, "overlap");
                spin_for(hold);
                gauge.fetch_sub(1, Ordering::SeqCst);
            })
            .unwrap();
        }
        for tag in [1u8, 2u8] {
            let order = Arc::clone(&order);
            let gauge = Arc::clone(&in_body);
            rt.spawn(vec![AccessClause::commutative(a)], move || {
                assert_eq!(gauge.fetch_add(1, Ordering::SeqCst), 0, "overlap");
                order.lock().unwrap().push(tag);
                gauge.fetch_sub(1, Ordering::SeqCst);
            })
            .unwrap();
        }
        rt.taskwait();
        let order = order.lock().unwrap();
        assert_eq!(order.len(), 2);
        match order[0] {
            1 => saw_first_first = true,
            2 => saw_second_first = true,
            _ => unreachable!(),
        }
        if saw_first_first && saw_second_first && rep >= 999 {
            break;
        }
    }
    assert!(
        saw_first_first && saw_second_first,
        "commutative pair never ran in both orders ({max_reps} reps)"
    );
}

/// Safety invariant: writers never overlap each other or any reader on the
/// same resource; concurrent readers are allowed.
#[test]
fn writers_exclude_readers_and_writers() {
    let rt = TaskRuntime::start(4).unwrap();
    let a = rt.resource("A");
    let writers = Arc::new(AtomicI32::new(0));
    let readers = Arc::new(AtomicI32::new(0));

    for i in 0..600 {
        let w = Arc::clone(&writers);
        let r = Arc::clone(&readers);
        if i % 3 == 0 {
            rt.spawn(vec![AccessClause::read_write(a)], move || {
                assert_eq!(w.fetch_add(1, Ordering::SeqCst), 0, "writer overlap");
                assert_eq!(r.load(Ordering::SeqCst), 0, "writer saw reader");
                spin_for(Duration::from_micros(5));
                w.fetch_sub(1, Ordering::SeqCst);
            })
            .unwrap();
        } else {
            rt.spawn(vec![AccessClause::read(a)], move || {
                r.fetch_add(1, Ordering::SeqCst);
                assert_eq!(w.load(Ordering::SeqCst), 0, "reader saw writer");
                spin_for(Duration::from_micros(5));
                r.fetch_sub(1, Ordering::SeqCst);
            })
            .unwrap();
        }
    }
    rt.taskwait();
}

#[test]
fn dependency_chain_depth_50_is_ordered() {
    let rt = TaskRuntime::start(4).unwrap();
    let a = rt.resource("A");
    let log: Arc<Mutex<Vec<usize>>> = Arc::new(Mutex::new(Vec::new()));
    for i in 0..50 {
        let log = Arc::clone(&log);
        rt.spawn(vec![AccessClause::read_write(a)], move || {
            log.lock().unwrap().push(i);
        })
        .unwrap();
    }
    rt.taskwait();
    assert_eq!(*log.lock().unwrap(), (0..50).collect::<Vec<_>>());
}

#[test]
fn single_worker_executes_a_valid_topological_order() {
    let rt = TaskRuntime::start(1).unwrap();
    let a = rt.resource("A");
    let b = rt.resource("B");
    let log: Arc<Mutex<Vec<&'static str>>> = Arc::new(Mutex::new(Vec::new()));

    let l = Arc::clone(&log);
    rt.spawn(vec![AccessClause::write(a)], move || l.lock().unwrap().push("wa"))
        .unwrap();
    let l = Arc::clone(&log);
    rt.spawn(vec![AccessClause::write(b)], move || l.lock().unwrap().push("wb"))
        .unwrap();
    let l = Arc::clone(&log);
    rt.spawn(
        vec![AccessClause::read(a), AccessClause::read(b)],
        move || l.lock().unwrap().push("rab"),
    )
    .unwrap();
    rt.taskwait();

    let log = log.lock().unwrap();
    assert_eq!(log.len(), 3);
    assert_eq!(log[2], "rab");
}

#[test]
fn independent_tasks_run_concurrently() {
    // 100 tasks of ~10ms each on 4 workers must take well under the serial
    // 1000ms; the 2x slack bound is 500ms.
    let rt = TaskRuntime::start(4).unwrap();
    let t0 = Instant::now();
    for _ in 0..100 {
        rt.spawn(Vec::new(), || spin_for(Duration::from_millis(10)))
            .unwrap();
    }
    rt.taskwait();
    let elapsed = t0.elapsed();
    assert!(
        elapsed < Duration::from_millis(500),
        "100x10ms on 4 workers took {elapsed:?}"
    );
}

#[test]
fn duplicate_resource_in_clause_is_rejected() {
    let rt = TaskRuntime::start(1).unwrap();
    let a = rt.resource("A");
    let err = rt
        .spawn(
            vec![AccessClause::read(a), AccessClause::read_write(a)],
            || {},
        )
        .unwrap_err();
    assert!(matches!(err, TaskError::DuplicateResourceInClause(_)));
}

#[test]
fn pool_already_running_is_reported() {
    let mut rt = TaskRuntime::new();
    rt.run_pool(2).unwrap();
    assert!(matches!(rt.run_pool(2), Err(TaskError::PoolAlreadyRunning)));
}

#[test]
fn spawn_without_pool_is_an_error() {
    let rt = TaskRuntime::new();
    assert!(matches!(
        rt.spawn(Vec::new(), || {}),
        Err(TaskError::PoolNotRunning)
    ));
}

/// The per-region task chain of a spatially decomposed step: every resource
/// sees exclusive writers and the instrumented gauges never overlap, across
/// many repetitions.
#[test]
fn region_graph_shape_has_no_overlapping_writers() {
    let n_regions = 8;
    let rt = TaskRuntime::start(4).unwrap();
    let particles: Vec<_> = (0..n_regions)
        .map(|r| rt.resource(&format!("P{r}")))
        .collect();
    let fields: Vec<_> = (0..n_regions)
        .map(|r| rt.resource(&format!("EB{r}")))
        .collect();
    let currents: Vec<_> = (0..n_regions)
        .map(|r| rt.resource(&format!("J{r}")))
        .collect();
    let gauges: Arc<Vec<AtomicI32>> =
        Arc::new((0..3 * n_regions).map(|_| AtomicI32::new(0)).collect());

    let enter = |gauges: &Arc<Vec<AtomicI32>>, slot: usize| {
        let g = Arc::clone(gauges);
        move || {
            assert_eq!(g[slot].fetch_add(1, Ordering::SeqCst), 0, "overlap in {slot}");
            spin_for(Duration::from_micros(10));
            g[slot].fetch_sub(1, Ordering::SeqCst);
        }
    };

    for _step in 0..100 {
        for r in 0..n_regions {
            let up = (r + 1) % n_regions;
            rt.spawn(
                vec![
                    AccessClause::read_write(particles[r]),
                    AccessClause::read(fields[r]),
                    AccessClause::read_write(currents[r]),
                ],
                enter(&gauges, r),
            )
            .unwrap();
            rt.spawn(
                vec![
                    AccessClause::read(currents[r]),
                    AccessClause::read(currents[up]),
                    AccessClause::read_write(fields[r]),
                ],
                enter(&gauges, n_regions + r),
            )
            .unwrap();
            rt.spawn(
                vec![AccessClause::read_write(particles[r])],
                enter(&gauges, 2 * n_regions + r),
            )
            .unwrap();
        }
    }
    rt.taskwait();
}
