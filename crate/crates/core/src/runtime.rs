//! Thread-per-worker launcher and task timeline shared by the solvers.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Decomposition;
use crate::transport::{Endpoint, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    /// Dirichlet solve (NNWR) or subdomain solve (DNWR).
    Solve,
    /// NNWR auxiliary Neumann solve.
    Auxiliary,
}

/// One block-task as it actually ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvent {
    pub worker: usize,
    pub subdomain: usize,
    pub iterate: usize,
    pub block: usize,
    pub stage: Stage,
    /// Global sequence numbers of the task's start and end.
    pub start_event: u64,
    pub end_event: u64,
    pub start_s: f64,
    pub end_s: f64,
}

pub struct Timeline {
    origin: Instant,
    counter: AtomicU64,
    events: Mutex<Vec<TaskEvent>>,
}

impl Default for Timeline {
    fn default() -> Self {
        Self::new()
    }
}

impl Timeline {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
            counter: AtomicU64::new(0),
            events: Mutex::new(Vec::new()),
        }
    }

    /// Run `task`, recording it under the given labels.
    pub fn record<T>(
        &self,
        worker: usize,
        subdomain: usize,
        iterate: usize,
        block: usize,
        stage: Stage,
        task: impl FnOnce() -> T,
    ) -> T {
        let start_event = self.counter.fetch_add(1, Ordering::SeqCst);
        let start_s = self.origin.elapsed().as_secs_f64();
        let out = task();
        let end_s = self.origin.elapsed().as_secs_f64();
        let end_event = self.counter.fetch_add(1, Ordering::SeqCst);
        self.events.lock().expect("timeline lock").push(TaskEvent {
            worker,
            subdomain,
            iterate,
            block,
            stage,
            start_event,
            end_event,
            start_s,
            end_s,
        });
        out
    }

    pub fn elapsed(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    /// Events recorded so far, in start order.
    pub fn events(&self) -> Vec<TaskEvent> {
        let mut events = self.events.lock().expect("timeline lock").clone();
        events.sort_by_key(|e| e.start_event);
        events
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerStats {
    pub worker: usize,
    pub label: String,
    pub busy_s: f64,
    pub idle_s: f64,
}

/// Busy time per worker from the timeline; idle is the remainder of `wall_s`.
pub fn worker_stats(labels: &[String], events: &[TaskEvent], wall_s: f64) -> Vec<WorkerStats> {
    let mut busy = vec![0.0; labels.len()];
    for e in events {
        if let Some(b) = busy.get_mut(e.worker) {
            *b += e.end_s - e.start_s;
        }
    }
    labels
        .iter()
        .zip(busy)
        .enumerate()
        .map(|(worker, (label, busy_s))| WorkerStats {
            worker,
            label: label.clone(),
            busy_s,
            idle_s: (wall_s - busy_s).max(0.0),
        })
        .collect()
}

/// Global node vector from per-subdomain states `(i, u)`.
pub fn assemble_global(decomp: &Decomposition, parts: &[(usize, Vec<f64>)]) -> Vec<f64> {
    let mut global = vec![0.0; decomp.grid().node_count()];
    for (i, u) in parts {
        let (a, _) = decomp.extent(*i);
        global[a..a + u.len()].copy_from_slice(u);
    }
    global
}

pub type WorkerFn<'a, T> = Box<dyn FnOnce(&mut Endpoint) -> Result<T> + Send + 'a>;

/// Run each closure on its own thread with the endpoint of the same index.
///
/// A failing worker aborts the network so the others stop waiting. The
/// first error that is not a consequence of the abort is returned. On
/// success the number of messages left unconsumed is returned as well.
pub fn run_workers<T: Send>(
    network: &Network,
    endpoints: Vec<Endpoint>,
    workers: Vec<WorkerFn<'_, T>>,
) -> Result<(Vec<T>, usize)> {
    if endpoints.len() != workers.len() {
        return Err(Error::Config(format!(
            "{} endpoints for {} workers",
            endpoints.len(),
            workers.len()
        )));
    }
    let joined: Vec<std::thread::Result<(Result<T>, Endpoint)>> = std::thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .zip(workers)
            .map(|(mut ep, work)| {
                s.spawn(move || {
                    let out = work(&mut ep);
                    if out.is_err() {
                        ep.abort();
                    }
                    (out, ep)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join()).collect()
    });

    let mut results = Vec::with_capacity(joined.len());
    let mut first_error = None;
    let mut abort_error = None;
    let mut unmatched = 0;
    for (idx, j) in joined.into_iter().enumerate() {
        match j {
            Ok((Ok(v), ep)) => {
                unmatched += ep.unmatched();
                results.push(v);
            }
            Ok((Err(e), _)) => {
                let secondary = network.is_aborted() && e.to_string().contains("run aborted");
                if secondary {
                    abort_error.get_or_insert(e);
                } else {
                    first_error.get_or_insert(e);
                }
            }
            Err(_) => {
                network.abort();
                first_error.get_or_insert(Error::Worker(format!("worker {idx} panicked")));
            }
        }
    }
    match first_error.or(abort_error) {
        Some(e) => Err(e),
        None => Ok((results, unmatched)),
    }
}
