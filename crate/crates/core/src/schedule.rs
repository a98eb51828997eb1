//! Task graphs of the pipeline orderings and a deterministic executor for
//! them.
//!
//! Every task is one time block of one subdomain solve. `simulate` starts
//! each task as soon as its inputs exist and its worker is free, with unit
//! task costs and free communication unless told otherwise, and reports the
//! makespan and efficiency as exact ratios.

use std::collections::VecDeque;
use std::io::Write;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::Method;
use crate::runtime::Stage;

/// One block task. DNWR tasks use [`Stage::Solve`] only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId {
    pub i: usize,
    pub k: usize,
    pub stage: Stage,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDag {
    pub method: Method,
    pub subdomains: usize,
    pub iterates: usize,
    pub blocks: usize,
    pub pivot: usize,
    pub nodes: Vec<TaskId>,
    /// `(from, to)` node indices.
    pub edges: Vec<(usize, usize)>,
    /// Cost of each node, one unit by default.
    pub cost: Vec<u64>,
    /// Delay added to every edge between tasks on different workers.
    pub latency: u64,
}

impl TaskDag {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node index of a task.
    pub fn index(&self, t: TaskId) -> Option<usize> {
        match self.method {
            Method::Nnwr => {
                if t.i == 0 || t.i > self.subdomains || t.k == 0 || t.k > self.iterates || t.j == 0 || t.j > self.blocks {
                    return None;
                }
                let q = usize::from(t.stage == Stage::Auxiliary);
                Some((((t.i - 1) * self.iterates + t.k - 1) * 2 + q) * self.blocks + t.j - 1)
            }
            Method::Dnwr => {
                if t.stage != Stage::Solve
                    || t.i == 0
                    || t.i > self.subdomains
                    || t.k == 0
                    || t.k > self.iterates
                    || t.j == 0
                    || t.j > self.blocks
                {
                    return None;
                }
                Some(((t.i - 1) * self.iterates + t.k - 1) * self.blocks + t.j - 1)
            }
        }
    }

    pub fn predecessors(&self, node: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == node).map(|e| e.0).collect()
    }
}

fn dnwr_task(i: usize, k: usize, j: usize) -> TaskId {
    TaskId {
        i,
        k,
        stage: Stage::Solve,
        j,
    }
}

/// Dependency graph for `N` subdomains, `K` iterates, `J` blocks and
/// (DNWR only) pivot `m`.
///
/// NNWR: block `j` of a stage follows block `j - 1` of the same stage, the
/// auxiliary solve of `(i, k, j)` needs the Dirichlet blocks of `i` and its
/// neighbours, and the Dirichlet solve of `(i, k + 1, j)` needs the
/// auxiliary blocks of `i` and its neighbours.
///
/// DNWR: besides the block chain, a non-pivot task needs the flux of its
/// neighbour nearer the pivot in the same iterate, and a task with an
/// interior Dirichlet end needs the trace relaxed by the neighbour on the
/// far side in the previous iterate.
pub fn build_dag(method: Method, subdomains: usize, iterates: usize, blocks: usize, pivot: usize) -> Result<TaskDag> {
    if subdomains == 0 || iterates == 0 || blocks == 0 {
        return Err(Error::Config("N, K and J must be at least 1".into()));
    }
    if method == Method::Dnwr && (pivot == 0 || pivot > subdomains) {
        return Err(Error::Config(format!("pivot m = {pivot} must lie in 1..={subdomains}")));
    }
    let (n, kk, jj) = (subdomains, iterates, blocks);
    let mut dag = TaskDag {
        method,
        subdomains: n,
        iterates: kk,
        blocks: jj,
        pivot,
        nodes: Vec::new(),
        edges: Vec::new(),
        cost: Vec::new(),
        latency: 0,
    };
    let stages: &[Stage] = match method {
        Method::Nnwr => &[Stage::Solve, Stage::Auxiliary],
        Method::Dnwr => &[Stage::Solve],
    };
    for i in 1..=n {
        for k in 1..=kk {
            for &stage in stages {
                for j in 1..=jj {
                    dag.nodes.push(TaskId { i, k, stage, j });
                }
            }
        }
    }
    dag.cost = vec![1; dag.nodes.len()];

    let idx = |dag: &TaskDag, t: TaskId| dag.index(t).expect("task in range");
    let neighbours = |i: usize| i.saturating_sub(1).max(1)..=(i + 1).min(n);
    let mut edges = Vec::new();
    for t in dag.nodes.clone() {
        let to = idx(&dag, t);
        if t.j > 1 {
            edges.push((idx(&dag, TaskId { j: t.j - 1, ..t }), to));
        }
        match method {
            Method::Nnwr => {
                let (from_stage, from_k) = match t.stage {
                    Stage::Auxiliary => (Stage::Solve, t.k),
                    Stage::Solve if t.k > 1 => (Stage::Auxiliary, t.k - 1),
                    Stage::Solve => continue,
                };
                for i in neighbours(t.i) {
                    let from = TaskId {
                        i,
                        k: from_k,
                        stage: from_stage,
                        j: t.j,
                    };
                    edges.push((idx(&dag, from), to));
                }
            }
            Method::Dnwr => {
                let (i, k, j) = (t.i, t.k, t.j);
                if i < pivot {
                    edges.push((idx(&dag, dnwr_task(i + 1, k, j)), to));
                } else if i > pivot {
                    edges.push((idx(&dag, dnwr_task(i - 1, k, j)), to));
                }
                if k > 1 {
                    if i <= pivot && i > 1 {
                        edges.push((idx(&dag, dnwr_task(i - 1, k - 1, j)), to));
                    }
                    if i >= pivot && i < n {
                        edges.push((idx(&dag, dnwr_task(i + 1, k - 1, j)), to));
                    }
                }
            }
        }
    }
    dag.edges = edges;
    Ok(dag)
}

/// Which worker runs each task, and in what order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Task order per worker, as node indices.
    pub order: Vec<Vec<usize>>,
}

impl Assignment {
    pub fn workers(&self) -> usize {
        self.order.len()
    }

    /// All tasks on one worker in node order, which is topological for the
    /// graphs built here.
    pub fn single(dag: &TaskDag) -> Self {
        Self {
            order: vec![topological_order(dag, None).unwrap_or_else(|_| (0..dag.len()).collect())],
        }
    }

    /// The worker layout of the pipeline solvers.
    ///
    /// NNWR: stage `a` (`2k - 1` Dirichlet, `2k` auxiliary) of subdomain `i`
    /// runs on worker `(i - 1) min(J, 2K) + (a - 1) mod min(J, 2K)`, each
    /// worker taking its stages in turn. DNWR: one worker per
    /// (subdomain, iterate).
    pub fn canonical(dag: &TaskDag) -> Self {
        let (n, kk, jj) = (dag.subdomains, dag.iterates, dag.blocks);
        match dag.method {
            Method::Nnwr => {
                let slots = jj.min(2 * kk);
                let mut order = vec![Vec::new(); n * slots];
                for i in 1..=n {
                    for a in 1..=2 * kk {
                        let stage = if a % 2 == 1 { Stage::Solve } else { Stage::Auxiliary };
                        let w = (i - 1) * slots + (a - 1) % slots;
                        for j in 1..=jj {
                            let t = TaskId {
                                i,
                                k: a.div_ceil(2),
                                stage,
                                j,
                            };
                            order[w].push(dag.index(t).expect("task in range"));
                        }
                    }
                }
                Self { order }
            }
            Method::Dnwr => {
                let mut order = Vec::with_capacity(n * kk);
                for i in 1..=n {
                    for k in 1..=kk {
                        order.push((1..=jj).map(|j| dag.index(dnwr_task(i, k, j)).expect("task in range")).collect());
                    }
                }
                Self { order }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simulation {
    /// Start time of every node.
    pub start: Vec<u64>,
    pub makespan: u64,
    pub busy: Vec<u64>,
    /// Total task cost over (workers x makespan).
    pub efficiency: Ratio<u64>,
}

impl Simulation {
    /// First moment a worker waits between two of its tasks, as
    /// `(worker, node it waited for, idle units)`.
    pub fn first_idle_gap(&self, dag: &TaskDag, assignment: &Assignment) -> Option<(usize, usize, u64)> {
        let mut best: Option<(u64, usize, usize, u64)> = None;
        for (w, list) in assignment.order.iter().enumerate() {
            let mut free = 0;
            for &v in list {
                if self.start[v] > free && best.is_none_or(|b| free < b.0) {
                    best = Some((free, w, v, self.start[v] - free));
                }
                free = self.start[v] + dag.cost[v];
            }
        }
        best.map(|(_, w, v, gap)| (w, v, gap))
    }
}

/// Kahn order over the graph edges plus the worker order edges.
fn topological_order(dag: &TaskDag, assignment: Option<&Assignment>) -> Result<Vec<usize>> {
    let v = dag.len();
    let mut succ = vec![Vec::new(); v];
    let mut indeg = vec![0usize; v];
    let mut add = |a: usize, b: usize| {
        succ[a].push(b);
        indeg[b] += 1;
    };
    for &(a, b) in &dag.edges {
        add(a, b);
    }
    if let Some(asg) = assignment {
        for list in &asg.order {
            for w in list.windows(2) {
                add(w[0], w[1]);
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..v).filter(|&x| indeg[x] == 0).collect();
    let mut out = Vec::with_capacity(v);
    while let Some(x) = queue.pop_front() {
        out.push(x);
        for &y in &succ[x] {
            indeg[y] -= 1;
            if indeg[y] == 0 {
                queue.push_back(y);
            }
        }
    }
    if out.len() != v {
        return Err(Error::Schedule(format!(
            "{} tasks sit on a cycle of dependencies and worker order",
            v - out.len()
        )));
    }
    Ok(out)
}

/// Run the graph on the given workers: each task starts when its
/// predecessors have finished (plus latency across workers) and its worker
/// has finished the previous task in its list.
pub fn simulate(dag: &TaskDag, assignment: &Assignment) -> Result<Simulation> {
    let v = dag.len();
    let mut worker_of = vec![usize::MAX; v];
    for (w, list) in assignment.order.iter().enumerate() {
        for &x in list {
            if x >= v {
                return Err(Error::Schedule(format!("worker {w} lists unknown task {x}")));
            }
            if worker_of[x] != usize::MAX {
                return Err(Error::Schedule(format!("task {:?} assigned twice", dag.nodes[x])));
            }
            worker_of[x] = w;
        }
    }
    if let Some(x) = worker_of.iter().position(|&w| w == usize::MAX) {
        return Err(Error::Schedule(format!("task {:?} has no worker", dag.nodes[x])));
    }

    let order = topological_order(dag, Some(assignment))?;
    let mut preds = vec![Vec::new(); v];
    for &(a, b) in &dag.edges {
        preds[b].push(a);
    }
    let mut prev_on_worker = vec![None; v];
    for list in &assignment.order {
        for w in list.windows(2) {
            prev_on_worker[w[1]] = Some(w[0]);
        }
    }
    let mut start = vec![0u64; v];
    let mut finish = vec![0u64; v];
    for x in order {
        let mut s = prev_on_worker[x].map_or(0, |p| finish[p]);
        for &p in &preds[x] {
            let lat = if worker_of[p] == worker_of[x] { 0 } else { dag.latency };
            s = s.max(finish[p] + lat);
        }
        start[x] = s;
        finish[x] = s + dag.cost[x];
    }
    let makespan = finish.iter().copied().max().unwrap_or(0);
    let mut busy = vec![0u64; assignment.workers()];
    for x in 0..v {
        busy[worker_of[x]] += dag.cost[x];
    }
    let total: u64 = dag.cost.iter().sum();
    let denom = assignment.workers() as u64 * makespan;
    let efficiency = if denom == 0 { Ratio::from_integer(1) } else { Ratio::new(total, denom) };
    Ok(Simulation {
        start,
        makespan,
        busy,
        efficiency,
    })
}

/// Closed-form efficiency of the pipeline orderings: `2K / (2K + J - 1)`
/// or `J / (2K + J - 1)` for NNWR, `J / (J + floor(N/2) + 2(K - 1))` for
/// DNWR. The DNWR form holds for the one-worker-per-iterate layout at any
/// `J`; [`crate::dnwr::efficiency_dnwr`] adds the solver's block bound.
pub fn theoretical_efficiency(method: Method, subdomains: usize, iterates: usize, blocks: usize) -> Result<Ratio<u64>> {
    if subdomains == 0 || iterates == 0 || blocks == 0 {
        return Err(Error::Config("N, K and J must be at least 1".into()));
    }
    let (n, k, j) = (subdomains as u64, iterates as u64, blocks as u64);
    match method {
        Method::Nnwr => Ok(Ratio::new((2 * k).max(j), 2 * k + j - 1)),
        // one subdomain has no coupling between iterates
        Method::Dnwr if n == 1 => Ok(Ratio::from_integer(1)),
        Method::Dnwr => Ok(Ratio::new(j, j + n / 2 + 2 * (k - 1))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EfficiencyRow {
    pub blocks: usize,
    #[serde(serialize_with = "ratio_as_f64")]
    pub simulated: Ratio<u64>,
    #[serde(serialize_with = "ratio_as_f64")]
    pub theoretical: Ratio<u64>,
}

fn ratio_as_f64<S: serde::Serializer>(r: &Ratio<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(ratio_to_f64(*r))
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Simulate the canonical layout and compare with the closed form. A
/// mismatch is an error naming the first idle gap.
pub fn theoretical_vs_simulated(method: Method, subdomains: usize, iterates: usize, blocks: usize) -> Result<EfficiencyRow> {
    let theoretical = theoretical_efficiency(method, subdomains, iterates, blocks)?;
    let dag = build_dag(method, subdomains, iterates, blocks, subdomains.div_ceil(2))?;
    let asg = Assignment::canonical(&dag);
    let sim = simulate(&dag, &asg)?;
    if sim.efficiency != theoretical {
        let gap = sim
            .first_idle_gap(&dag, &asg)
            .map(|(w, v, g)| format!("; worker {w} first idles {g} units before {:?}", dag.nodes[v]))
            .unwrap_or_default();
        return Err(Error::Schedule(format!(
            "simulated efficiency {} differs from closed form {}{gap}",
            sim.efficiency, theoretical
        )));
    }
    Ok(EfficiencyRow {
        blocks,
        simulated: sim.efficiency,
        theoretical,
    })
}

/// `J,simulated_efficiency,theoretical_efficiency`
pub fn write_efficiency_csv<W: Write>(rows: &[EfficiencyRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "J,simulated_efficiency,theoretical_efficiency")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{}",
            r.blocks,
            ratio_to_f64(r.simulated),
            ratio_to_f64(r.theoretical)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_graph() {
        let dag = build_dag(Method::Dnwr, 1, 1, 1, 1).unwrap();
        assert_eq!(dag.len(), 1);
        assert!(dag.edges.is_empty());
        let sim = simulate(&dag, &Assignment::canonical(&dag)).unwrap();
        assert_eq!(sim.makespan, 1);
        assert_eq!(sim.efficiency, Ratio::from_integer(1));
    }

    #[test]
    fn rejects_bad_assignments() {
        let dag = build_dag(Method::Nnwr, 2, 1, 2, 1).unwrap();
        let mut asg = Assignment::canonical(&dag);
        asg.order[0].swap(0, 1);
        assert!(matches!(simulate(&dag, &asg), Err(Error::Schedule(_))));
        let mut asg = Assignment::canonical(&dag);
        asg.order[0].pop();
        assert!(simulate(&dag, &asg).is_err());
        let mut asg = Assignment::canonical(&dag);
        let dup = asg.order[1][0];
        asg.order[0].push(dup);
        assert!(simulate(&dag, &asg).is_err());
    }

    #[test]
    fn latency_only_on_cross_worker_edges() {
        let mut dag = build_dag(Method::Dnwr, 1, 1, 4, 1).unwrap();
        dag.latency = 10;
        let sim = simulate(&dag, &Assignment::canonical(&dag)).unwrap();
        assert_eq!(sim.makespan, 4);
        let mut dag = build_dag(Method::Dnwr, 2, 1, 1, 1).unwrap();
        dag.latency = 10;
        let sim = simulate(&dag, &Assignment::canonical(&dag)).unwrap();
        assert_eq!(sim.makespan, 12);
    }

    #[test]
    fn csv_layout() {
        let rows = [theoretical_vs_simulated(Method::Nnwr, 2, 4, 8).unwrap()];
        let mut buf = Vec::new();
        write_efficiency_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("J,simulated_efficiency,theoretical_efficiency\n8,0.5333"));
    }
}
