use std::sync::Arc;

use super::{
    interface_owner, owned_interface, packed_table, pipeline_block_bound, update_trace_dnwr, DnwrConfig,
    DnwrMode, EndData, Role, SubdomainSweep,
};
use crate::error::{Error, Result};
use crate::grid::Decomposition;
use crate::heat::{FluxStencil, Side};
use crate::nnwr::check_inputs;
use crate::problem::HeatProblem;
use crate::report::{hardware_threads, InterfaceFlux, Method, RunReport};
use crate::runtime::{assemble_global, run_workers, worker_stats, Stage, Timeline, WorkerFn};
use crate::traces::TraceSet;
use crate::transport::{Address, Endpoint, MsgKind, Network, Tag, WrMessage, COORDINATOR};

enum Route {
    Naive,
    Packed(Vec<usize>),
    Pipeline,
}

struct Context<'a> {
    problem: &'a HeatProblem,
    decomp: Decomposition,
    guess: TraceSet,
    theta: f64,
    flux: FluxStencil,
    iterates: usize,
    route: Route,
    /// Worker id of the coordinator, if there is one.
    coordinator: Option<usize>,
    timeline: Arc<Timeline>,
}

impl Context<'_> {
    fn n(&self) -> usize {
        self.decomp.subdomains()
    }

    fn m(&self) -> usize {
        self.decomp.pivot()
    }

    fn address(&self, i: usize, k: usize) -> Address {
        let worker = match &self.route {
            Route::Naive => i - 1,
            Route::Packed(owner) => owner[i - 1],
            Route::Pipeline => (i - 1) * self.iterates + (k - 1),
        };
        Address { worker, subdomain: i }
    }
}

/// What one (subdomain, iterate) task leaves behind.
struct TaskResult {
    i: usize,
    k: usize,
    /// Relaxed trace of the owned interface, whole horizon.
    trace: Option<Vec<f64>>,
    /// State and end fluxes after the last iterate.
    last: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

enum Out {
    Tasks(Vec<TaskResult>),
    Residuals(Vec<f64>),
}

/// Run DNWR in the configured mode. Every mode computes exactly `K`
/// iterates; the residuals come from convergence flags that travel outward
/// with the fluxes and reach a coordinator from subdomains `1` and `N`.
pub fn run(problem: &HeatProblem, decomp: &Decomposition, config: &DnwrConfig) -> Result<RunReport> {
    config.validate()?;
    check_inputs(problem, decomp)?;
    let decomp = match config.pivot {
        Some(m) => decomp.with_pivot(m)?,
        None => decomp.clone(),
    };
    let n = decomp.subdomains();
    let iterates = config.iterates;
    let decomp = match config.mode {
        DnwrMode::Pipeline => {
            let bound = pipeline_block_bound(n, iterates);
            if config.enforce_block_bound && decomp.blocks() <= bound {
                return Err(Error::Precondition(format!(
                    "DNWR pipeline needs J > ceil(N/2) + 2K - 1 = {bound}, got J = {}",
                    decomp.blocks()
                )));
            }
            decomp
        }
        _ => decomp.with_blocks(1)?,
    };
    let m = decomp.pivot();

    let mut sweeps = Vec::with_capacity(n);
    for i in 1..=n {
        sweeps.push(SubdomainSweep::new(problem, &decomp, i)?);
    }
    let (route, mut labels) = match config.mode {
        DnwrMode::Naive => (Route::Naive, (1..=n).map(|i| format!("subdomain {i}")).collect::<Vec<_>>()),
        DnwrMode::ClassicalPacked => {
            let table = packed_table(n, iterates, m)?;
            let labels = (1..=table.workers()).map(|p| format!("worker {p}")).collect();
            (Route::Packed(table.owner), labels)
        }
        DnwrMode::Pipeline => {
            let labels = (1..=n)
                .flat_map(|i| (1..=iterates).map(move |k| format!("subdomain {i} iterate {k}")))
                .collect();
            (Route::Pipeline, labels)
        }
    };
    let coordinator = (n > 1).then_some(labels.len());
    if n > 1 {
        labels.push("coordinator".into());
    }
    let ctx = Context {
        problem,
        guess: config.initial_guess.build(problem, &decomp)?,
        decomp,
        theta: config.theta,
        flux: config.flux,
        iterates,
        route,
        coordinator,
        timeline: Arc::new(Timeline::new()),
    };
    let ctx = &ctx;
    let (network, endpoints) = Network::new(labels.len(), &config.transport);

    let mut workers: Vec<WorkerFn<'_, Out>> = Vec::with_capacity(labels.len());
    match config.mode {
        DnwrMode::Naive => {
            for (idx, sweep) in sweeps.into_iter().enumerate() {
                workers.push(Box::new(move |ep: &mut Endpoint| {
                    let mut owned = vec![OwnedSubdomain::new(ctx, idx + 1, sweep)];
                    let tasks = (1..=iterates).map(|k| (idx + 1, k)).collect::<Vec<_>>();
                    run_task_list(ctx, ep, idx, &tasks, &mut owned).map(Out::Tasks)
                }));
            }
        }
        DnwrMode::ClassicalPacked => {
            let table = packed_table(n, iterates, m)?;
            let mut sweeps: Vec<Option<SubdomainSweep>> = sweeps.into_iter().map(Some).collect();
            for (p, tasks) in table.tasks.into_iter().enumerate() {
                let mut subs: Vec<usize> = tasks.iter().map(|t| t.0).collect();
                subs.sort_unstable();
                subs.dedup();
                let mut owned: Vec<OwnedSubdomain> = subs
                    .iter()
                    .map(|&i| OwnedSubdomain::new(ctx, i, sweeps[i - 1].take().expect("one owner per subdomain")))
                    .collect();
                workers.push(Box::new(move |ep: &mut Endpoint| {
                    run_task_list(ctx, ep, p, &tasks, &mut owned).map(Out::Tasks)
                }));
            }
        }
        DnwrMode::Pipeline => {
            for (idx, sweep) in sweeps.into_iter().enumerate() {
                for k in 1..=iterates {
                    let mut sweep = sweep.clone();
                    let worker = idx * iterates + k - 1;
                    workers.push(Box::new(move |ep: &mut Endpoint| {
                        let r = iterate_task(ctx, ep, worker, idx + 1, k, &mut sweep, None)?;
                        Ok(Out::Tasks(vec![r]))
                    }));
                }
            }
        }
    }
    if n > 1 {
        workers.push(Box::new(move |ep: &mut Endpoint| {
            let mut residuals = Vec::with_capacity(iterates);
            for k in 1..=iterates {
                let mut r = 0.0f64;
                for i in [1, n] {
                    let msg = ep.recv_match(Tag::new(MsgKind::ConvergenceFlag, k, 0, 0, i))?;
                    r = r.max(msg.flag.unwrap_or(f64::INFINITY));
                }
                residuals.push(r);
            }
            Ok(Out::Residuals(residuals))
        }));
    }

    let (outputs, unmatched) = run_workers(&network, endpoints, workers)?;
    let wall_s = ctx.timeline.elapsed();

    let mut series = vec![vec![Vec::new(); n - 1]; iterates + 1];
    series[0].clone_from(&ctx.guess.series);
    let mut residuals = Vec::new();
    let mut parts = Vec::new();
    let mut flux = InterfaceFlux {
        from_left: vec![Vec::new(); n - 1],
        from_right: vec![Vec::new(); n - 1],
    };
    for out in outputs {
        match out {
            Out::Residuals(r) => residuals = r,
            Out::Tasks(list) => {
                for t in list {
                    if let (Some(b), Some(w)) = (owned_interface(t.i, m), t.trace) {
                        series[t.k][b - 1] = w;
                    }
                    if let Some((u, left, right)) = t.last {
                        parts.push((t.i, u));
                        if t.i > 1 {
                            flux.from_right[t.i - 2] = left;
                        }
                        if t.i < n {
                            flux.from_left[t.i - 1] = right;
                        }
                    }
                }
            }
        }
    }
    parts.sort_by_key(|p| p.0);
    let history: Vec<TraceSet> = series
        .into_iter()
        .enumerate()
        .map(|(k, s)| TraceSet::new(k, s))
        .collect();
    let converged = n == 1 || residuals.last().is_some_and(|r| *r < config.tol);
    let events = ctx.timeline.events();
    let decomp = &ctx.decomp;
    Ok(RunReport {
        method: Method::Dnwr,
        mode: config.mode.name().into(),
        subdomains: n,
        max_iterates: iterates,
        blocks: decomp.blocks(),
        theta: config.theta,
        tol: config.tol,
        iterations: iterates,
        converged,
        residuals,
        counters: network.counters(),
        unmatched_messages: unmatched,
        worker_count: labels.len(),
        hardware_threads: hardware_threads(),
        workers: worker_stats(&labels, &events, wall_s),
        wall_s,
        traces: history.last().cloned().expect("at least the initial guess"),
        history,
        final_state: assemble_global(decomp, &parts),
        interface_flux: (n > 1).then_some(flux),
        timeline: events,
        message_trace: network.trace(),
    })
}

/// A subdomain held by a classical worker across iterates.
struct OwnedSubdomain {
    i: usize,
    sweep: SubdomainSweep,
    /// Current trace of the owned interface.
    trace: Option<Vec<f64>>,
}

impl OwnedSubdomain {
    fn new(ctx: &Context<'_>, i: usize, sweep: SubdomainSweep) -> Self {
        let trace = owned_interface(i, ctx.m()).map(|b| ctx.guess.series[b - 1].clone());
        Self { i, sweep, trace }
    }
}

fn run_task_list(
    ctx: &Context<'_>,
    ep: &mut Endpoint,
    worker: usize,
    tasks: &[(usize, usize)],
    owned: &mut [OwnedSubdomain],
) -> Result<Vec<TaskResult>> {
    let mut results = Vec::with_capacity(tasks.len());
    for &(i, k) in tasks {
        let sub = owned
            .iter_mut()
            .find(|s| s.i == i)
            .ok_or_else(|| Error::Schedule(format!("worker {worker} does not hold subdomain {i}")))?;
        let r = iterate_task(ctx, ep, worker, i, k, &mut sub.sweep, sub.trace.as_deref())?;
        if let Some(w) = &r.trace {
            sub.trace = Some(w.clone());
        }
        results.push(r);
    }
    Ok(results)
}

/// Iterate `k` of subdomain `i` over all time blocks.
///
/// `held` is the owned trace of iterate `k - 1` when the caller keeps it;
/// otherwise it arrives block by block from the worker of iterate `k - 1`.
fn iterate_task(
    ctx: &Context<'_>,
    ep: &mut Endpoint,
    worker: usize,
    i: usize,
    k: usize,
    sweep: &mut SubdomainSweep,
    held: Option<&[f64]>,
) -> Result<TaskResult> {
    let (n, m, iterates) = (ctx.n(), ctx.m(), ctx.iterates);
    let owned = owned_interface(i, m);
    let carry = matches!(ctx.route, Route::Pipeline);
    sweep.restart();

    let mut trace = Vec::new();
    let (mut left_flux, mut right_flux) = (Vec::new(), Vec::new());
    let mut flag = 0.0f64;
    for j in 1..=ctx.decomp.blocks() {
        let steps = ctx.decomp.block_steps(j);
        let w_old: Option<Vec<f64>> = match owned {
            None => None,
            Some(b) if k == 1 => Some(ctx.guess.block(&ctx.decomp, b, j).to_vec()),
            Some(b) => match held {
                Some(w) => Some(w[steps.clone()].to_vec()),
                None => Some(ep.recv_match(Tag::new(MsgKind::TraceCarry, k - 1, j, b, i))?.payload),
            },
        };

        let dirichlet = |ep: &mut Endpoint, b: usize| -> Result<Vec<f64>> {
            if k == 1 {
                Ok(ctx.guess.block(&ctx.decomp, b, j).to_vec())
            } else {
                let tag = Tag::new(MsgKind::DirichletTrace, k - 1, j, b, interface_owner(b, m));
                Ok(ep.recv_match(tag)?.payload)
            }
        };
        let mut flag_in = 0.0f64;
        let mut neumann = |ep: &mut Endpoint, b: usize, from: usize| -> Result<Vec<f64>> {
            let msg = ep.recv_match(Tag::new(MsgKind::NeumannFlux, k, j, b, from))?;
            flag_in = flag_in.max(msg.flag.unwrap_or(0.0));
            Ok(msg.payload)
        };
        let role = Role::of(i, m);
        let (left, right) = match role {
            Role::Pivot => (
                (i > 1).then(|| dirichlet(ep, i - 1)).transpose()?,
                (i < n).then(|| dirichlet(ep, i)).transpose()?,
            ),
            Role::Left => (
                (i > 1).then(|| dirichlet(ep, i - 1)).transpose()?,
                Some(neumann(ep, i, i + 1)?),
            ),
            Role::Right => (
                Some(neumann(ep, i - 1, i - 1)?),
                (i < n).then(|| dirichlet(ep, i)).transpose()?,
            ),
        };
        let bs = ctx.timeline.record(worker, i, k, j, Stage::Solve, || {
            sweep.sweep(
                ctx.problem,
                steps.clone(),
                wrap(role == Role::Right, &left),
                wrap(role == Role::Left, &right),
            )
        })?;

        let w_new = match (owned, &w_old) {
            (Some(_), Some(w)) => {
                let u = if role == Role::Left { &bs.right_value } else { &bs.left_value };
                let next = update_trace_dnwr(w, u, ctx.theta)?;
                flag = flag.max(max_abs_delta(&next, w));
                Some(next)
            }
            _ => None,
        };
        flag = flag.max(flag_in);

        if i > 1 && role != Role::Right {
            let tag = Tag::new(MsgKind::NeumannFlux, k, j, i - 1, i);
            let q = bs.flux_with(Side::Left, ctx.flux).to_vec();
            ep.send(ctx.address(i - 1, k), flagged(tag, q, flag))?;
        }
        if i < n && role != Role::Left {
            let tag = Tag::new(MsgKind::NeumannFlux, k, j, i, i);
            let q = bs.flux_with(Side::Right, ctx.flux).to_vec();
            ep.send(ctx.address(i + 1, k), flagged(tag, q, flag))?;
        }
        if let (Some(b), Some(w)) = (owned, &w_new) {
            if k < iterates {
                let user = if role == Role::Left { i + 1 } else { i - 1 };
                let tag = Tag::new(MsgKind::DirichletTrace, k, j, b, i);
                ep.send(ctx.address(user, k + 1), WrMessage::data(tag, w.clone()))?;
                if carry {
                    let tag = Tag::new(MsgKind::TraceCarry, k, j, b, i);
                    ep.send(ctx.address(i, k + 1), WrMessage::data(tag, w.clone()))?;
                }
            }
            trace.extend_from_slice(w);
        }
        if k == iterates {
            left_flux.extend_from_slice(bs.flux_with(Side::Left, ctx.flux));
            right_flux.extend_from_slice(bs.flux_with(Side::Right, ctx.flux));
        }
    }

    if let Some(c) = ctx.coordinator {
        if i == 1 || i == n {
            let to = Address {
                worker: c,
                subdomain: COORDINATOR,
            };
            ep.send(to, WrMessage::flag(Tag::new(MsgKind::ConvergenceFlag, k, 0, 0, i), flag))?;
        }
    }
    Ok(TaskResult {
        i,
        k,
        trace: owned.map(|_| trace),
        last: (k == iterates).then(|| (sweep.state().u.clone(), left_flux, right_flux)),
    })
}

fn wrap(neumann: bool, v: &Option<Vec<f64>>) -> Option<EndData<'_>> {
    v.as_deref().map(|s| if neumann { EndData::Flux(s) } else { EndData::Trace(s) })
}

fn flagged(tag: Tag, payload: Vec<f64>, flag: f64) -> WrMessage {
    WrMessage {
        tag,
        payload,
        flag: Some(flag),
    }
}

fn max_abs_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}
