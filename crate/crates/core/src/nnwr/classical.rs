use std::sync::Arc;

use super::{
    check_inputs, max_abs, max_abs_delta, neumann_jump, update_traces, AuxiliarySweep, DirichletSweep,
    NnwrConfig,
};
use crate::error::Result;
use crate::grid::Decomposition;
use crate::heat::Side;
use crate::problem::HeatProblem;
use crate::report::{hardware_threads, Method, RunReport};
use crate::runtime::{assemble_global, run_workers, worker_stats, Stage, Timeline, WorkerFn};
use crate::traces::TraceSet;
use crate::transport::{Address, Endpoint, MsgKind, Network, Tag, WrMessage, COORDINATOR};

/// Flag tags use the interface slot to tell the two checks of an iterate apart.
const JUMP_CHECK: usize = 1;
const TRACE_CHECK: usize = 2;

struct SubdomainOut {
    i: usize,
    /// `w_i` for every computed iterate (empty for the last subdomain).
    history: Vec<Vec<f64>>,
    final_state: Vec<f64>,
}

struct CoordinatorOut {
    residuals: Vec<f64>,
    iterations: usize,
    converged: bool,
}

enum Out {
    Subdomain(SubdomainOut),
    Coordinator(CoordinatorOut),
}

/// One worker per subdomain, each sweeping the whole horizon per stage, plus
/// a coordinator that reduces the convergence checks. Stops when either the
/// flux jumps or the trace update fall below `tol`, or after `K` iterates.
pub fn run_classical(
    problem: &HeatProblem,
    decomp: &Decomposition,
    config: &NnwrConfig,
) -> Result<RunReport> {
    config.validate()?;
    check_inputs(problem, decomp)?;
    let decomp = decomp.with_blocks(1)?;
    let n = decomp.subdomains();
    let guess = config.initial_guess.build(problem, &decomp)?;
    let nt = problem.grid().nt();

    // Build every kernel up front so configuration errors surface before
    // any thread starts.
    let mut kernels = Vec::with_capacity(n);
    for i in 1..=n {
        let aux = if n > 1 { Some(AuxiliarySweep::new(&decomp, i)?) } else { None };
        kernels.push((DirichletSweep::new(problem, &decomp, i)?, aux));
    }

    let worker_count = if n > 1 { n + 1 } else { 1 };
    let (network, endpoints) = Network::new(worker_count, &config.transport);
    let timeline = Arc::new(Timeline::new());
    let coordinator = Address {
        worker: n,
        subdomain: COORDINATOR,
    };

    let mut workers: Vec<WorkerFn<'_, Out>> = Vec::new();
    for (idx, (mut dirichlet, aux)) in kernels.into_iter().enumerate() {
        let i = idx + 1;
        let timeline = Arc::clone(&timeline);
        let mut w_left = (i > 1).then(|| guess.series[i - 2].clone());
        let mut w_right = (i < n).then(|| guess.series[i - 1].clone());
        let (theta, stencil) = (config.theta, config.flux);
        let (iterates, tol) = (config.iterates, config.tol);
        let addr = move |s: usize| Address {
            worker: s - 1,
            subdomain: s,
        };
        workers.push(Box::new(move |ep: &mut Endpoint| {
            let mut history: Vec<Vec<f64>> = w_right.iter().cloned().collect();
            if n == 1 {
                let out = timeline.record(0, 1, 0, 1, Stage::Solve, || {
                    dirichlet.sweep(problem, 0..nt, None, None)
                })?;
                drop(out);
                return Ok(Out::Subdomain(SubdomainOut {
                    i,
                    history,
                    final_state: dirichlet.state().u.clone(),
                }));
            }
            let mut aux = aux.expect("auxiliary kernel for n > 1");
            let mut final_state = Vec::new();
            for k in 1..=iterates {
                dirichlet.restart();
                let d = timeline.record(idx, i, k, 1, Stage::Solve, || {
                    dirichlet.sweep(problem, 0..nt, w_left.as_deref(), w_right.as_deref())
                })?;
                final_state.clone_from(&dirichlet.state().u);
                let (flux_left, flux_right) = (d.flux_with(Side::Left, stencil), d.flux_with(Side::Right, stencil));

                if i > 1 {
                    let tag = Tag::new(MsgKind::NeumannJumpHalf, k, 1, i - 1, i);
                    ep.send(addr(i - 1), WrMessage::data(tag, flux_left.to_vec()))?;
                }
                if i < n {
                    let tag = Tag::new(MsgKind::NeumannJumpHalf, k, 1, i, i);
                    ep.send(addr(i + 1), WrMessage::data(tag, flux_right.to_vec()))?;
                }
                let jump_left = if i > 1 {
                    let m = ep.recv_match(Tag::new(MsgKind::NeumannJumpHalf, k, 1, i - 1, i - 1))?;
                    Some(neumann_jump(&m.payload, flux_left)?)
                } else {
                    None
                };
                let jump_right = if i < n {
                    let m = ep.recv_match(Tag::new(MsgKind::NeumannJumpHalf, k, 1, i, i + 1))?;
                    Some(neumann_jump(flux_right, &m.payload)?)
                } else {
                    None
                };
                let local = jump_left
                    .iter()
                    .chain(&jump_right)
                    .map(|j| max_abs(j))
                    .fold(0.0, f64::max);
                if allreduce(ep, coordinator, i, k, JUMP_CHECK, local)? < tol {
                    break;
                }

                aux.restart();
                let psi = timeline.record(idx, i, k, 1, Stage::Auxiliary, || {
                    aux.sweep(jump_left.as_deref(), jump_right.as_deref(), nt)
                })?;
                if i > 1 {
                    let tag = Tag::new(MsgKind::DirichletTrace, k, 1, i - 1, i);
                    ep.send(addr(i - 1), WrMessage::data(tag, psi.left_value.clone()))?;
                }
                if i < n {
                    let tag = Tag::new(MsgKind::DirichletTrace, k, 1, i, i);
                    ep.send(addr(i + 1), WrMessage::data(tag, psi.right_value.clone()))?;
                }
                let mut local = 0.0f64;
                if let Some(w) = w_left.as_mut() {
                    let m = ep.recv_match(Tag::new(MsgKind::DirichletTrace, k, 1, i - 1, i - 1))?;
                    let next = update_traces(w, &m.payload, &psi.left_value, theta)?;
                    local = local.max(max_abs_delta(&next, w));
                    *w = next;
                }
                if let Some(w) = w_right.as_mut() {
                    let m = ep.recv_match(Tag::new(MsgKind::DirichletTrace, k, 1, i, i + 1))?;
                    let next = update_traces(w, &psi.right_value, &m.payload, theta)?;
                    local = local.max(max_abs_delta(&next, w));
                    *w = next;
                    history.push(w.clone());
                }
                if allreduce(ep, coordinator, i, k, TRACE_CHECK, local)? < tol {
                    break;
                }
            }
            Ok(Out::Subdomain(SubdomainOut {
                i,
                history,
                final_state,
            }))
        }));
    }
    if n > 1 {
        let (iterates, tol) = (config.iterates, config.tol);
        workers.push(Box::new(move |ep: &mut Endpoint| {
            let mut residuals = Vec::new();
            let mut converged = false;
            let mut iterations = 0;
            for k in 1..=iterates {
                iterations = k;
                if reduce_and_broadcast(ep, n, k, JUMP_CHECK)? < tol {
                    converged = true;
                    break;
                }
                let r = reduce_and_broadcast(ep, n, k, TRACE_CHECK)?;
                residuals.push(r);
                if r < tol {
                    converged = true;
                    break;
                }
            }
            Ok(Out::Coordinator(CoordinatorOut {
                residuals,
                iterations,
                converged,
            }))
        }));
    }

    let (outputs, unmatched) = run_workers(&network, endpoints, workers)?;
    let wall_s = timeline.elapsed();

    let mut coord = CoordinatorOut {
        residuals: Vec::new(),
        iterations: 0,
        converged: true,
    };
    let mut parts = Vec::new();
    let mut histories = vec![Vec::new(); n.saturating_sub(1)];
    for out in outputs {
        match out {
            Out::Coordinator(c) => coord = c,
            Out::Subdomain(s) => {
                if s.i < n {
                    histories[s.i - 1] = s.history;
                }
                parts.push((s.i, s.final_state));
            }
        }
    }
    let computed = histories.first().map_or(1, Vec::len);
    let history: Vec<TraceSet> = (0..computed)
        .map(|k| TraceSet::new(k, histories.iter().map(|h| h[k].clone()).collect()))
        .collect();
    let traces = history
        .last()
        .cloned()
        .unwrap_or_else(|| TraceSet::new(0, Vec::new()));

    let timeline = timeline.events();
    let mut labels: Vec<String> = (1..=n).map(|i| format!("subdomain {i}")).collect();
    if n > 1 {
        labels.push("coordinator".into());
    }
    Ok(RunReport {
        method: Method::Nnwr,
        mode: "classical".into(),
        subdomains: n,
        max_iterates: config.iterates,
        blocks: 1,
        theta: config.theta,
        tol: config.tol,
        iterations: coord.iterations,
        converged: coord.converged,
        residuals: coord.residuals,
        counters: network.counters(),
        unmatched_messages: unmatched,
        worker_count,
        hardware_threads: hardware_threads(),
        workers: worker_stats(&labels, &timeline, wall_s),
        wall_s,
        traces,
        history,
        final_state: assemble_global(&decomp, &parts),
        interface_flux: None,
        timeline,
        message_trace: network.trace(),
    })
}

fn allreduce(ep: &mut Endpoint, coordinator: Address, i: usize, k: usize, check: usize, local: f64) -> Result<f64> {
    ep.send(
        coordinator,
        WrMessage::flag(Tag::new(MsgKind::ConvergenceFlag, k, 0, check, i), local),
    )?;
    let reply = ep.recv_match(Tag::new(MsgKind::ConvergenceFlag, k, 0, check, COORDINATOR))?;
    Ok(reply.flag.unwrap_or(f64::INFINITY))
}

fn reduce_and_broadcast(ep: &mut Endpoint, n: usize, k: usize, check: usize) -> Result<f64> {
    let mut global = 0.0f64;
    for i in 1..=n {
        let m = ep.recv_match(Tag::new(MsgKind::ConvergenceFlag, k, 0, check, i))?;
        global = global.max(m.flag.unwrap_or(f64::INFINITY));
    }
    for i in 1..=n {
        ep.send(
            Address {
                worker: i - 1,
                subdomain: i,
            },
            WrMessage::flag(Tag::new(MsgKind::ConvergenceFlag, k, 0, check, COORDINATOR), global),
        )?;
    }
    Ok(global)
}
