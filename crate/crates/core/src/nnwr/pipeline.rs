use std::sync::Arc;

use super::{check_inputs, neumann_jump, update_traces, AuxiliarySweep, DirichletSweep, NnwrConfig};
use crate::error::Result;
use crate::grid::Decomposition;
use crate::heat::{FluxStencil, Side};
use crate::problem::HeatProblem;
use crate::report::{hardware_threads, Method, RunReport};
use crate::runtime::{assemble_global, run_workers, worker_stats, Stage, Timeline, WorkerFn};
use crate::traces::{residual_history, TraceSet};
use crate::transport::{Address, Endpoint, MsgKind, Network, Tag, WrMessage};

/// Stage `a = 2k - 1` is the Dirichlet solve of iterate `k`, `a = 2k` its
/// auxiliary solve. Stage `2K + 1` only assembles the final traces.
struct Layout {
    n: usize,
    iterates: usize,
    /// Workers per subdomain: `min(J, 2K)`.
    slots: usize,
}

impl Layout {
    fn worker(&self, i: usize, stage: usize) -> usize {
        if stage > 2 * self.iterates {
            self.n * self.slots + i - 1
        } else {
            (i - 1) * self.slots + (stage - 1) % self.slots
        }
    }

    fn address(&self, i: usize, stage: usize) -> Address {
        Address {
            worker: self.worker(i, stage),
            subdomain: i,
        }
    }

    fn worker_count(&self) -> usize {
        self.n * self.slots + self.n
    }
}

struct Context<'a> {
    problem: &'a HeatProblem,
    decomp: &'a Decomposition,
    guess: TraceSet,
    theta: f64,
    flux: FluxStencil,
    layout: Layout,
    timeline: Arc<Timeline>,
}

enum PipeOut {
    /// `w_i` at one iterate, whole horizon.
    Trace { i: usize, iterate: usize, series: Vec<f64> },
    State { i: usize, u: Vec<f64> },
}

/// Pipeline ordering: every (subdomain, stage) pair streams the `J` time
/// blocks as soon as its inputs for a block arrive.
///
/// With `J >= 2K` each subdomain gets one worker per stage (`2NK` workers).
/// With `J < 2K` each subdomain gets `J` workers that take the stages in
/// turn. `N` further workers assemble the traces of the last iterate. All
/// `K` iterates are computed; residuals are evaluated afterwards.
pub fn run_pipeline(
    problem: &HeatProblem,
    decomp: &Decomposition,
    config: &NnwrConfig,
) -> Result<RunReport> {
    config.validate()?;
    check_inputs(problem, decomp)?;
    let n = decomp.subdomains();
    if n == 1 {
        let mut report = super::run_classical(problem, decomp, config)?;
        report.mode = "pipeline".into();
        report.blocks = decomp.blocks();
        return Ok(report);
    }
    let iterates = config.iterates;
    let blocks = decomp.blocks();
    let layout = Layout {
        n,
        iterates,
        slots: blocks.min(2 * iterates),
    };

    let mut prototypes = Vec::with_capacity(n);
    for i in 1..=n {
        prototypes.push((DirichletSweep::new(problem, decomp, i)?, AuxiliarySweep::new(decomp, i)?));
    }
    let ctx = Context {
        problem,
        decomp,
        guess: config.initial_guess.build(problem, decomp)?,
        theta: config.theta,
        flux: config.flux,
        layout,
        timeline: Arc::new(Timeline::new()),
    };
    let ctx = &ctx;
    let worker_count = ctx.layout.worker_count();
    let (network, endpoints) = Network::new(worker_count, &config.transport);

    let mut labels = Vec::with_capacity(worker_count);
    let mut workers: Vec<WorkerFn<'_, Vec<PipeOut>>> = Vec::with_capacity(worker_count);
    for (i, (dirichlet, aux)) in (1..=n).zip(prototypes) {
        for slot in 0..ctx.layout.slots {
            let worker = (i - 1) * ctx.layout.slots + slot;
            let (mut dirichlet, mut aux) = (dirichlet.clone(), aux.clone());
            labels.push(format!("subdomain {i} slot {}", slot + 1));
            workers.push(Box::new(move |ep: &mut Endpoint| {
                let mut out = Vec::new();
                for stage in (slot + 1..=2 * iterates).step_by(ctx.layout.slots) {
                    let k = stage.div_ceil(2);
                    if stage % 2 == 1 {
                        dirichlet_stage(ctx, ep, worker, i, k, &mut dirichlet, &mut out)?;
                    } else {
                        auxiliary_stage(ctx, ep, worker, i, k, &mut aux)?;
                    }
                }
                Ok(out)
            }));
        }
    }
    for i in 1..=n {
        labels.push(format!("trace assembly {i}"));
        workers.push(Box::new(move |ep: &mut Endpoint| {
            let mut own = Vec::new();
            for j in 1..=ctx.decomp.blocks() {
                let (_, right) = incoming_traces(ctx, ep, i, iterates + 1, j)?;
                if let Some(w) = right {
                    own.extend(w);
                }
            }
            Ok(if i < n {
                vec![PipeOut::Trace {
                    i,
                    iterate: iterates,
                    series: own,
                }]
            } else {
                Vec::new()
            })
        }));
    }

    let (outputs, unmatched) = run_workers(&network, endpoints, workers)?;
    let wall_s = ctx.timeline.elapsed();

    let mut series = vec![vec![Vec::new(); n - 1]; iterates + 1];
    let mut parts = Vec::new();
    for out in outputs.into_iter().flatten() {
        match out {
            PipeOut::Trace { i, iterate, series: s } => series[iterate][i - 1] = s,
            PipeOut::State { i, u } => parts.push((i, u)),
        }
    }
    parts.sort_by_key(|p| p.0);
    let history: Vec<TraceSet> = series
        .into_iter()
        .enumerate()
        .map(|(k, s)| TraceSet::new(k, s))
        .collect();
    let residuals = residual_history(&history);
    let converged = residuals.last().is_some_and(|r| *r < config.tol);
    let events = ctx.timeline.events();
    Ok(RunReport {
        method: Method::Nnwr,
        mode: "pipeline".into(),
        subdomains: n,
        max_iterates: iterates,
        blocks,
        theta: config.theta,
        tol: config.tol,
        iterations: iterates,
        converged,
        residuals,
        counters: network.counters(),
        unmatched_messages: unmatched,
        worker_count,
        hardware_threads: hardware_threads(),
        workers: worker_stats(&labels, &events, wall_s),
        wall_s,
        traces: history.last().cloned().expect("at least the initial guess"),
        history,
        final_state: assemble_global(decomp, &parts),
        interface_flux: None,
        timeline: events,
        message_trace: network.trace(),
    })
}

/// Traces `w^[k-1]` for the two ends of subdomain `i` in block `j`.
///
/// For `k = 1` they are the initial guess. Otherwise `w^[k-2]` arrives from
/// the previous Dirichlet stage of the same subdomain and the auxiliary
/// values of iterate `k - 1` from the neighbours; `w^[k-1]` is forwarded to
/// the next Dirichlet stage.
fn incoming_traces(
    ctx: &Context<'_>,
    ep: &mut Endpoint,
    i: usize,
    k: usize,
    j: usize,
) -> Result<(Option<Vec<f64>>, Option<Vec<f64>>)> {
    let n = ctx.layout.n;
    let mut get = |iface: usize| -> Result<Vec<f64>> {
        if k == 1 {
            return Ok(ctx.guess.block(ctx.decomp, iface, j).to_vec());
        }
        let old = ep.recv_match(Tag::new(MsgKind::TraceCarry, k - 2, j, iface, i))?;
        let left = ep.recv_match(Tag::new(MsgKind::DirichletTrace, k - 1, j, iface, iface))?;
        let right = ep.recv_match(Tag::new(MsgKind::DirichletTrace, k - 1, j, iface, iface + 1))?;
        update_traces(&old.payload, &left.payload, &right.payload, ctx.theta)
    };
    let left = if i > 1 { Some(get(i - 1)?) } else { None };
    let right = if i < n { Some(get(i)?) } else { None };
    Ok((left, right))
}

fn dirichlet_stage(
    ctx: &Context<'_>,
    ep: &mut Endpoint,
    worker: usize,
    i: usize,
    k: usize,
    dirichlet: &mut DirichletSweep,
    out: &mut Vec<PipeOut>,
) -> Result<()> {
    let (n, lay) = (ctx.layout.n, &ctx.layout);
    let next = lay.address(i, 2 * k + 1);
    let mut own = Vec::new();
    dirichlet.restart();
    for j in 1..=ctx.decomp.blocks() {
        let (w_left, w_right) = incoming_traces(ctx, ep, i, k, j)?;
        if let Some(w) = &w_left {
            ep.send(next, WrMessage::data(Tag::new(MsgKind::TraceCarry, k - 1, j, i - 1, i), w.clone()))?;
        }
        if let Some(w) = &w_right {
            ep.send(next, WrMessage::data(Tag::new(MsgKind::TraceCarry, k - 1, j, i, i), w.clone()))?;
            own.extend_from_slice(w);
        }
        let steps = ctx.decomp.block_steps(j);
        let d = ctx.timeline.record(worker, i, k, j, Stage::Solve, || {
            dirichlet.sweep(ctx.problem, steps, w_left.as_deref(), w_right.as_deref())
        })?;
        if i > 1 {
            let tag = Tag::new(MsgKind::NeumannJumpHalf, k, j, i - 1, i);
            let flux = d.flux_with(Side::Left, ctx.flux);
            ep.send(lay.address(i - 1, 2 * k), WrMessage::data(tag, flux.to_vec()))?;
            ep.send(lay.address(i, 2 * k), WrMessage::data(tag, flux.to_vec()))?;
        }
        if i < n {
            let tag = Tag::new(MsgKind::NeumannJumpHalf, k, j, i, i);
            let flux = d.flux_with(Side::Right, ctx.flux);
            ep.send(lay.address(i, 2 * k), WrMessage::data(tag, flux.to_vec()))?;
            ep.send(lay.address(i + 1, 2 * k), WrMessage::data(tag, flux.to_vec()))?;
        }
    }
    if i < n {
        out.push(PipeOut::Trace {
            i,
            iterate: k - 1,
            series: own,
        });
    }
    if k == lay.iterates {
        out.push(PipeOut::State {
            i,
            u: dirichlet.state().u.clone(),
        });
    }
    Ok(())
}

fn auxiliary_stage(
    ctx: &Context<'_>,
    ep: &mut Endpoint,
    worker: usize,
    i: usize,
    k: usize,
    aux: &mut AuxiliarySweep,
) -> Result<()> {
    let (n, lay) = (ctx.layout.n, &ctx.layout);
    aux.restart();
    for j in 1..=ctx.decomp.blocks() {
        let mut jump = |iface: usize| -> Result<Vec<f64>> {
            let a = ep.recv_match(Tag::new(MsgKind::NeumannJumpHalf, k, j, iface, iface))?;
            let b = ep.recv_match(Tag::new(MsgKind::NeumannJumpHalf, k, j, iface, iface + 1))?;
            neumann_jump(&a.payload, &b.payload)
        };
        let jump_left = if i > 1 { Some(jump(i - 1)?) } else { None };
        let jump_right = if i < n { Some(jump(i)?) } else { None };
        let len = ctx.decomp.block_len();
        let psi = ctx.timeline.record(worker, i, k, j, Stage::Auxiliary, || {
            aux.sweep(jump_left.as_deref(), jump_right.as_deref(), len)
        })?;
        if i > 1 {
            let tag = Tag::new(MsgKind::DirichletTrace, k, j, i - 1, i);
            ep.send(lay.address(i - 1, 2 * k + 1), WrMessage::data(tag, psi.left_value.clone()))?;
            ep.send(lay.address(i, 2 * k + 1), WrMessage::data(tag, psi.left_value))?;
        }
        if i < n {
            let tag = Tag::new(MsgKind::DirichletTrace, k, j, i, i);
            ep.send(lay.address(i, 2 * k + 1), WrMessage::data(tag, psi.right_value.clone()))?;
            ep.send(lay.address(i + 1, 2 * k + 1), WrMessage::data(tag, psi.right_value))?;
        }
    }
    Ok(())
}
