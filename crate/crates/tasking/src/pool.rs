//! Worker pool, dispatch, and the runtime facade.

use crate::deps::{DepTable, TaskId};
use crate::{instrument, Access, AccessClause, ResourceId, TaskError, TaskHandle};
use crossbeam_deque::{Injector, Steal, Stealer, Worker as WorkerQueue};
use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

type Body = Box<dyn FnOnce() + Send + 'static>;

struct TaskNode {
    id: TaskId,
    clauses: Arc<Vec<AccessClause>>,
    /// Per-resource exclusion locks to take at dispatch, in resource order.
    commutative: Vec<Arc<AtomicBool>>,
    body: Mutex<Option<Body>>,
    /// Unresolved predecessors plus one sentinel held during wiring.
    pending: AtomicUsize,
    state: Mutex<NodeState>,
}

#[derive(Default)]
struct NodeState {
    done: bool,
    successors: Vec<Arc<TaskNode>>,
}

struct TraceEvent {
    task: TaskId,
    worker: usize,
    start_ns: u64,
    end_ns: u64,
    clauses: String,
}

struct Shared {
    injector: Injector<Arc<TaskNode>>,
    stealers: Vec<Stealer<Arc<TaskNode>>>,
    idle: AtomicUsize,
    sleep: Mutex<()>,
    wake: Condvar,
    shutdown: AtomicBool,
    incomplete: Mutex<u64>,
    all_done: Condvar,
    /// First panic raised by a task body; rethrown at the next taskwait.
    panic: Mutex<Option<Box<dyn std::any::Any + Send>>>,
    trace: Option<Mutex<Vec<TraceEvent>>>,
    epoch: Instant,
}

impl Shared {
    fn enqueue_global(&self, node: Arc<TaskNode>) {
        self.injector.push(node);
        self.notify();
    }

    fn notify(&self) {
        if self.idle.load(Ordering::Relaxed) > 0 {
            let _guard = self.sleep.lock().unwrap();
            self.wake.notify_one();
        }
    }

    fn task_finished(&self) {
        let mut n = self.incomplete.lock().unwrap();
        *n -= 1;
        if *n == 0 {
            self.all_done.notify_all();
        }
    }
}

struct SubmitterState {
    deps: DepTable,
    next_id: TaskId,
    /// Live tasks that later spawns may name as predecessors.
    live: BTreeMap<TaskId, std::sync::Weak<TaskNode>>,
    resource_names: Vec<String>,
    locks: Vec<Arc<AtomicBool>>,
}

/// Builder for a [`TaskRuntime`] with the pool already running.
#[derive(Default)]
pub struct RuntimeBuilder {
    workers: Option<usize>,
    trace: Option<PathBuf>,
}

impl RuntimeBuilder {
    pub fn workers(mut self, n: usize) -> Self {
        self.workers = Some(n);
        self
    }

    /// Capture a schedule trace and write it as NDJSON to `path` at shutdown.
    pub fn trace(mut self, path: impl Into<PathBuf>) -> Self {
        self.trace = Some(path.into());
        self
    }

    pub fn build(self) -> Result<TaskRuntime, TaskError> {
        let n = crate::resolve_workers(self.workers);
        let mut rt = TaskRuntime::new();
        rt.trace_path = self.trace;
        rt.run_pool(n)?;
        Ok(rt)
    }
}

/// A task runtime: dependency tracking plus a fixed worker pool.
///
/// All spawning must happen from one submitting context; task bodies must not
/// spawn. Dropping the runtime shuts the pool down after draining all tasks.
pub struct TaskRuntime {
    shared: Option<Arc<Shared>>,
    submitter: Mutex<SubmitterState>,
    workers: Vec<thread::JoinHandle<()>>,
    trace_path: Option<PathBuf>,
    n_workers: usize,
}

impl Default for TaskRuntime {
    fn default() -> Self {
        Self::new()
    }
}

impl TaskRuntime {
    /// A runtime with no workers yet; call [`run_pool`](Self::run_pool).
    pub fn new() -> Self {
        TaskRuntime {
            shared: None,
            submitter: Mutex::new(SubmitterState {
                deps: DepTable::default(),
                next_id: 0,
                live: BTreeMap::new(),
                resource_names: Vec::new(),
                locks: Vec::new(),
            }),
            workers: Vec::new(),
            trace_path: None,
            n_workers: 0,
        }
    }

    /// Convenience: new runtime with `n_workers` already running.
    pub fn start(n_workers: usize) -> Result<Self, TaskError> {
        RuntimeBuilder::default().workers(n_workers).build()
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    /// Start the worker pool.
    pub fn run_pool(&mut self, n_workers: usize) -> Result<(), TaskError> {
        if n_workers == 0 {
            return Err(TaskError::ZeroWorkers);
        }
        if self.shared.is_some() {
            return Err(TaskError::PoolAlreadyRunning);
        }

        let queues: Vec<WorkerQueue<Arc<TaskNode>>> =
            (0..n_workers).map(|_| WorkerQueue::new_fifo()).collect();
        let stealers = queues.iter().map(|q| q.stealer()).collect();
        let shared = Arc::new(Shared {
            injector: Injector::new(),
            stealers,
            idle: AtomicUsize::new(0),
            sleep: Mutex::new(()),
            wake: Condvar::new(),
            shutdown: AtomicBool::new(false),
            incomplete: Mutex::new(0),
            all_done: Condvar::new(),
            panic: Mutex::new(None),
            trace: self.trace_path.as_ref().map(|_| Mutex::new(Vec::new())),
            epoch: Instant::now(),
        });

        for (index, queue) in queues.into_iter().enumerate() {
            let shared = Arc::clone(&shared);
            let handle = thread::Builder::new()
                .name(format!("empic-worker-{index}"))
                .spawn(move || worker_loop(index, queue, shared))
                .expect("failed to spawn worker thread");
            self.workers.push(handle);
        }

        self.n_workers = n_workers;
        self.shared = Some(shared);
        Ok(())
    }

    /// Register (or look up) a dependency-tracked resource by name.
    pub fn resource(&self, name: &str) -> ResourceId {
        let mut sub = self.submitter.lock().unwrap();
        if let Some(pos) = sub.resource_names.iter().position(|n| n == name) {
            return ResourceId(pos as u32);
        }
        let id = ResourceId(sub.resource_names.len() as u32);
        sub.resource_names.push(name.to_string());
        sub.locks.push(Arc::new(AtomicBool::new(false)));
        sub.deps.add_resource();
        id
    }

    /// Submit a task. It becomes ready once every predecessor implied by its
    /// clauses has completed.
    pub fn spawn(
        &self,
        clauses: Vec<AccessClause>,
        body: impl FnOnce() + Send + 'static,
    ) -> Result<TaskHandle, TaskError> {
        debug_assert!(
            !instrument::in_task(),
            "nested task spawning is not supported"
        );
        let shared = self.shared.as_ref().ok_or(TaskError::PoolNotRunning)?;
        let mut sub = self.submitter.lock().unwrap();

        for (i, c) in clauses.iter().enumerate() {
            debug_assert!(c.resource.index() < sub.deps.len(), "unknown resource id");
            if clauses[..i].iter().any(|p| p.resource == c.resource) {
                let name = sub.resource_names[c.resource.index()].clone();
                return Err(TaskError::DuplicateResourceInClause(name));
            }
        }

        let id = sub.next_id;
        sub.next_id += 1;

        let dep_ids = sub.deps.admit(id, &clauses);

        let mut commutative: Vec<Arc<AtomicBool>> = clauses
            .iter()
            .filter(|c| c.mode == Access::Commutative)
            .map(|c| Arc::clone(&sub.locks[c.resource.index()]))
            .collect();
        // Lock acquisition order is resource order; keep it canonical.
        commutative.sort_by_key(|l| Arc::as_ptr(l) as usize);

        let node = Arc::new(TaskNode {
            id,
            clauses: Arc::new(clauses),
            commutative,
            body: Mutex::new(Some(Box::new(body))),
            pending: AtomicUsize::new(dep_ids.len() + 1),
            state: Mutex::new(NodeState::default()),
        });

        *shared.incomplete.lock().unwrap() += 1;

        let mut satisfied = 0usize;
        for dep in &dep_ids {
            let wired = sub
                .live
                .get(dep)
                .and_then(|w| w.upgrade())
                .map(|pred| {
                    let mut st = pred.state.lock().unwrap();
                    if st.done {
                        false
                    } else {
                        st.successors.push(Arc::clone(&node));
                        true
                    }
                })
                .unwrap_or(false);
            if !wired {
                satisfied += 1;
            }
        }

        sub.live.insert(id, Arc::downgrade(&node));
        // Prune dead entries from the front; old tasks die first.
        while let Some((&first, weak)) = sub.live.iter().next() {
            if weak.strong_count() == 0 {
                sub.live.remove(&first);
            } else {
                break;
            }
        }
        drop(sub);

        if node.pending.fetch_sub(satisfied + 1, Ordering::AcqRel) == satisfied + 1 {
            shared.enqueue_global(node);
        }

        Ok(TaskHandle { id })
    }

    /// Block until every previously spawned task has completed.
    ///
    /// Rethrows the first panic raised by any task body since the last wait.
    pub fn taskwait(&self) {
        let Some(shared) = self.shared.as_ref() else {
            return;
        };
        {
            let mut n = shared.incomplete.lock().unwrap();
            while *n > 0 {
                n = shared.all_done.wait(n).unwrap();
            }
        }
        if let Some(payload) = shared.panic.lock().unwrap().take() {
            std::panic::resume_unwind(payload);
        }
    }

    /// Drain all tasks, stop the workers, and write the trace if enabled.
    pub fn shutdown(&mut self) {
        let Some(shared) = self.shared.take() else {
            return;
        };
        self.taskwait_on(&shared);
        shared.shutdown.store(true, Ordering::SeqCst);
        {
            let _guard = shared.sleep.lock().unwrap();
            shared.wake.notify_all();
        }
        for handle in self.workers.drain(..) {
            let _ = handle.join();
        }
        if let (Some(path), Some(trace)) = (self.trace_path.as_ref(), shared.trace.as_ref()) {
            let events = trace.lock().unwrap();
            if let Err(err) = write_trace(path, &events) {
                eprintln!("warning: failed to write task trace {}: {err}", path.display());
            }
        }
        self.n_workers = 0;
    }

    fn taskwait_on(&self, shared: &Shared) {
        let mut n = shared.incomplete.lock().unwrap();
        while *n > 0 {
            n = shared.all_done.wait(n).unwrap();
        }
    }
}

impl Drop for TaskRuntime {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn write_trace(path: &PathBuf, events: &[TraceEvent]) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for e in events {
        writeln!(
            out,
            r#"{{"task":{},"worker":{},"start_ns":{},"end_ns":{},"clauses":"{}"}}"#,
            e.task, e.worker, e.start_ns, e.end_ns, e.clauses
        )?;
    }
    out.flush()
}

fn worker_loop(index: usize, local: WorkerQueue<Arc<TaskNode>>, shared: Arc<Shared>) {
    loop {
        match find_task(index, &local, &shared) {
            Some(node) => execute(index, node, &local, &shared),
            None => {
                if shared.shutdown.load(Ordering::SeqCst) {
                    return;
                }
                shared.idle.fetch_add(1, Ordering::SeqCst);
                let guard = shared.sleep.lock().unwrap();
                let _ = shared
                    .wake
                    .wait_timeout(guard, Duration::from_micros(200))
                    .unwrap();
                shared.idle.fetch_sub(1, Ordering::SeqCst);
            }
        }
    }
}

fn find_task(
    index: usize,
    local: &WorkerQueue<Arc<TaskNode>>,
    shared: &Shared,
) -> Option<Arc<TaskNode>> {
    if let Some(node) = local.pop() {
        return Some(node);
    }
    loop {
        match shared.injector.steal_batch_and_pop(local) {
            Steal::Success(node) => return Some(node),
            Steal::Retry => continue,
            Steal::Empty => break,
        }
    }
    let mut retry = true;
    while retry {
        retry = false;
        for (i, stealer) in shared.stealers.iter().enumerate() {
            if i == index {
                continue;
            }
            match stealer.steal() {
                Steal::Success(node) => return Some(node),
                Steal::Retry => retry = true,
                Steal::Empty => {}
            }
        }
    }
    None
}

fn execute(
    index: usize,
    node: Arc<TaskNode>,
    local: &WorkerQueue<Arc<TaskNode>>,
    shared: &Shared,
) {
    // Commutative exclusion: take every lock or requeue at the global FIFO end.
    let mut held = 0;
    for lock in &node.commutative {
        if lock
            .compare_exchange(false, true, Ordering::Acquire, Ordering::Relaxed)
            .is_ok()
        {
            held += 1;
        } else {
            break;
        }
    }
    if held < node.commutative.len() {
        for lock in &node.commutative[..held] {
            lock.store(false, Ordering::Release);
        }
        shared.enqueue_global(node);
        thread::yield_now();
        return;
    }

    let body = node
        .body
        .lock()
        .unwrap()
        .take()
        .expect("task body executed twice");

    let start = shared.epoch.elapsed();
    instrument::enter(Arc::clone(&node.clauses));
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body));
    instrument::exit();
    let end = shared.epoch.elapsed();
    if let Err(payload) = outcome {
        shared.panic.lock().unwrap().get_or_insert(payload);
    }

    for lock in &node.commutative {
        lock.store(false, Ordering::Release);
    }

    if let Some(trace) = shared.trace.as_ref() {
        let clauses = node
            .clauses
            .iter()
            .map(|c| format!("{}(r{})", c.mode, c.resource.index()))
            .collect::<Vec<_>>()
            .join(" ");
        trace.lock().unwrap().push(TraceEvent {
            task: node.id,
            worker: index,
            start_ns: start.as_nanos() as u64,
            end_ns: end.as_nanos() as u64,
            clauses,
        });
    }

    let successors = {
        let mut st = node.state.lock().unwrap();
        st.done = true;
        std::mem::take(&mut st.successors)
    };
    let mut released_any = false;
    for succ in successors {
        if succ.pending.fetch_sub(1, Ordering::AcqRel) == 1 {
            local.push(succ);
            released_any = true;
        }
    }
    if released_any || !node.commutative.is_empty() {
        shared.notify();
    }

    shared.task_finished();
}
