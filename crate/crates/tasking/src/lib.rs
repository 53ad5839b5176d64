//! Task runtime with data-dependency clauses.
//!
//! Tasks declare how they access named resources and the runtime derives the
//! execution order from those declarations instead of global barriers:
//!
//! * [`Access::In`] — the task reads the resource; it waits for every earlier
//!   writer of that resource.
//! * [`Access::Out`] / [`Access::InOut`] — the task writes the resource; it
//!   waits for earlier writers *and* earlier readers (anti-dependency).
//! * [`Access::Commutative`] — the task writes the resource, is ordered
//!   against earlier and later non-commutative accesses, but carries no order
//!   relative to its commutative peers: peers may run in any order, never at
//!   the same time. Exclusion is enforced at dispatch with a per-resource
//!   try-lock; a ready task that loses the race is requeued FIFO.
//!
//! A fixed pool of workers executes ready tasks, each worker owning a FIFO
//! deque and stealing from the others when idle. All tasks are spawned from a
//! single submitting context; nested task spawning is not supported.
//!
//! The worker count defaults to the number of physical cores and can be
//! overridden with the `EMPIC_WORKERS` environment variable. Schedule traces
//! (NDJSON, one object per task, nanosecond timestamps) can be captured with
//! [`RuntimeBuilder::trace`].

mod deps;
mod pool;

pub use pool::{RuntimeBuilder, TaskRuntime};

use std::fmt;

/// Opaque identifier naming one dependency-tracked datum.
///
/// Stable for the lifetime of a runtime; obtained from
/// [`TaskRuntime::resource`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResourceId(pub(crate) u32);

impl ResourceId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// How a task touches a resource.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    In,
    Out,
    InOut,
    Commutative,
}

impl fmt::Display for Access {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Access::In => "in",
            Access::Out => "out",
            Access::InOut => "inout",
            Access::Commutative => "commutative",
        };
        f.write_str(s)
    }
}

/// A declared access on a resource; the unit of task synchronization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessClause {
    pub resource: ResourceId,
    pub mode: Access,
}

impl AccessClause {
    pub fn read(resource: ResourceId) -> Self {
        Self { resource, mode: Access::In }
    }
    pub fn write(resource: ResourceId) -> Self {
        Self { resource, mode: Access::Out }
    }
    pub fn read_write(resource: ResourceId) -> Self {
        Self { resource, mode: Access::InOut }
    }
    pub fn commutative(resource: ResourceId) -> Self {
        Self { resource, mode: Access::Commutative }
    }
}

/// Handle for a spawned task. Ids strictly increase with submission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TaskHandle {
    pub id: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("resource `{0}` listed more than once in a task's clauses")]
    DuplicateResourceInClause(String),
    #[error("worker pool is already running")]
    PoolAlreadyRunning,
    #[error("worker pool is not running")]
    PoolNotRunning,
    #[error("worker count must be at least 1")]
    ZeroWorkers,
}

/// Resolve the worker count: explicit request, else the `EMPIC_WORKERS`
/// environment variable, else one worker per physical core.
pub fn resolve_workers(requested: Option<usize>) -> usize {
    if let Some(n) = requested {
        return n.max(1);
    }
    if let Some(n) = std::env::var("EMPIC_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        return n.max(1);
    }
    num_cpus::get_physical().max(1)
}

/// Debug instrumentation: clauses of the task executing on this thread.
///
/// Data structures guarded by clauses assert through this hook (in debug
/// builds) that the running task actually declared the resource it touches.
pub mod instrument {
    use super::{Access, AccessClause, ResourceId};
    use std::cell::RefCell;
    use std::sync::Arc;

    thread_local! {
        static CURRENT: RefCell<Option<Arc<Vec<AccessClause>>>> = const { RefCell::new(None) };
    }

    pub(crate) fn enter(clauses: Arc<Vec<AccessClause>>) {
        CURRENT.with(|c| *c.borrow_mut() = Some(clauses));
    }

    pub(crate) fn exit() {
        CURRENT.with(|c| *c.borrow_mut() = None);
    }

    pub(crate) fn in_task() -> bool {
        CURRENT.with(|c| c.borrow().is_some())
    }

    /// True when called outside any task body (unrestricted context), or when
    /// the current task declared `resource` with a mode compatible with
    /// `write`.
    pub fn current_task_allows(resource: ResourceId, write: bool) -> bool {
        CURRENT.with(|c| match &*c.borrow() {
            None => true,
            Some(clauses) => clauses.iter().any(|cl| {
                cl.resource == resource && (!write || cl.mode != Access::In)
            }),
        })
    }
}
