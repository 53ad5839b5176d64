//! Per-resource dependency bookkeeping.
//!
//! Only the submitting context touches this table, so it needs no internal
//! synchronization beyond the runtime's submitter lock. For every resource we
//! remember the current *write group* (a single `Out`/`InOut` task, or the
//! open set of `Commutative` peers) and the readers admitted since. New
//! clauses translate into predecessor task ids:
//!
//! * a reader waits on the write group;
//! * a writer waits on the write group and on the readers;
//! * a commutative task joining an open group inherits the predecessors the
//!   group captured when it opened, and nothing from its peers.

use crate::{Access, AccessClause};

pub(crate) type TaskId = u64;

#[derive(Default)]
struct ResourceState {
    /// Current write group: one task, or several commutative peers.
    writers: Vec<TaskId>,
    /// Readers admitted after `writers`.
    readers: Vec<TaskId>,
    /// Predecessors captured when the open commutative group started.
    group_deps: Vec<TaskId>,
    /// `writers` is a commutative group that may still accept peers.
    commutative_open: bool,
}

#[derive(Default)]
pub(crate) struct DepTable {
    resources: Vec<ResourceState>,
}

impl DepTable {
    pub(crate) fn add_resource(&mut self) {
        self.resources.push(ResourceState::default());
    }

    pub(crate) fn len(&self) -> usize {
        self.resources.len()
    }

    /// Record `task`'s clauses and return the deduplicated set of
    /// predecessor task ids it must wait for.
    pub(crate) fn admit(&mut self, task: TaskId, clauses: &[AccessClause]) -> Vec<TaskId> {
        let mut deps: Vec<TaskId> = Vec::new();
        for clause in clauses {
            let st = &mut self.resources[clause.resource.index()];
            match clause.mode {
                Access::In => {
                    deps.extend_from_slice(&st.writers);
                    st.readers.push(task);
                    st.commutative_open = false;
                }
                Access::Out | Access::InOut => {
                    // Readers are already ordered after the writers they read,
                    // so waiting on them covers the writers transitively.
                    if st.readers.is_empty() {
                        deps.extend_from_slice(&st.writers);
                    } else {
                        deps.append(&mut st.readers);
                    }
                    st.readers.clear();
                    st.writers.clear();
                    st.writers.push(task);
                    st.commutative_open = false;
                }
                Access::Commutative => {
                    if !st.commutative_open {
                        st.group_deps.clear();
                        if st.readers.is_empty() {
                            st.group_deps.extend_from_slice(&st.writers);
                        } else {
                            st.group_deps.append(&mut st.readers);
                        }
                        st.readers.clear();
                        st.writers.clear();
                        st.commutative_open = true;
                    }
                    deps.extend_from_slice(&st.group_deps);
                    st.writers.push(task);
                }
            }
        }
        deps.sort_unstable();
        deps.dedup();
        deps
    }
}
