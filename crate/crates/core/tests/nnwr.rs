use std::time::Duration;

use proptest::prelude::*;
use wavepipe::nnwr::{self, neumann_jump, DirichletSweep, NnwrConfig, NnwrMode};
use wavepipe::oracle::{nnwr_bound, solve_monolithic};
use wavepipe::runtime::Stage;
use wavepipe::transport::{MsgKind, TransportOptions};
use wavepipe::{Decomposition, FluxStencil, HeatProblem, InitialGuess, PivotPolicy, RunReport, SpaceTimeGrid};

fn bump(nx: usize, nt: usize) -> HeatProblem {
    HeatProblem::parabolic_bump(SpaceTimeGrid::new(1.0, 0.1, nx, nt).unwrap())
}

fn run(p: &HeatProblem, d: &Decomposition, k: usize, mode: NnwrMode, tol: f64) -> RunReport {
    let mut c = NnwrConfig::new(k);
    c.mode = mode;
    c.tol = tol;
    nnwr::run(p, d, &c).unwrap()
}

#[test]
fn pipeline_matches_classical_bitwise() {
    let p = bump(63, 64);
    for n in [1, 2, 3, 4, 8] {
        for k in 1..=4 {
            for j in [1, 2, 4, 8, 16] {
                let d = Decomposition::near_uniform(p.grid(), n, j, PivotPolicy::Middle).unwrap();
                let a = run(&p, &d, k, NnwrMode::Classical, 0.0);
                let b = run(&p, &d, k, NnwrMode::Pipeline, 0.0);
                assert!(a.traces.bitwise_eq(&b.traces), "N{n} K{k} J{j}");
                assert_eq!(a.residuals, b.residuals);
                assert_eq!(a.final_state, b.final_state);
                assert_eq!(b.unmatched_messages, 0);
            }
        }
    }
}

#[test]
fn message_counts() {
    let p = bump(63, 64);
    for n in [2, 4, 8] {
        for k in [1, 2, 4] {
            let d = Decomposition::near_uniform(p.grid(), n, 8, PivotPolicy::Middle).unwrap();
            let a = run(&p, &d, k, NnwrMode::Classical, 0.0);
            let expected = 4 * (n as u64 - 1) * k as u64;
            assert_eq!(a.counters.total_messages, expected);
            assert_eq!(
                a.counters.messages_of(MsgKind::NeumannJumpHalf),
                a.counters.messages_of(MsgKind::DirichletTrace)
            );
            let b = run(&p, &d, k, NnwrMode::Pipeline, 0.0);
            assert_eq!(b.counters.total_messages, 8 * expected);
            assert_eq!(b.counters.total_words, a.counters.total_words);
            assert_eq!(a.counters.total_words, expected * 64);
        }
    }
}

#[test]
fn few_blocks_take_the_reduced_worker_layout() {
    let p = bump(63, 64);
    let d = Decomposition::near_uniform(p.grid(), 4, 2, PivotPolicy::Middle).unwrap();
    let a = run(&p, &d, 4, NnwrMode::Classical, 0.0);
    let b = run(&p, &d, 4, NnwrMode::Pipeline, 0.0);
    assert!(a.traces.bitwise_eq(&b.traces));
    // two slots per subdomain plus one trace sink each
    assert_eq!(b.worker_count, 4 * 2 + 4);
}

#[test]
fn pipeline_stage_order_follows_the_task_graph() {
    let p = bump(63, 64);
    let d = Decomposition::near_uniform(p.grid(), 3, 8, PivotPolicy::Middle).unwrap();
    let r = run(&p, &d, 2, NnwrMode::Pipeline, 0.0);
    let find = |i: usize, k: usize, j: usize, s: Stage| {
        r.timeline
            .iter()
            .find(|e| e.subdomain == i && e.iterate == k && e.block == j && e.stage == s)
            .unwrap_or_else(|| panic!("missing task {i} {k} {j} {s:?}"))
    };
    for e in &r.timeline {
        let (i, k, j) = (e.subdomain, e.iterate, e.block);
        if j > 1 {
            assert!(find(i, k, j - 1, e.stage).end_event < e.start_event);
        }
        let (from, fk) = match e.stage {
            Stage::Auxiliary => (Stage::Solve, k),
            Stage::Solve if k > 1 => (Stage::Auxiliary, k - 1),
            Stage::Solve => continue,
        };
        for n in i.saturating_sub(1).max(1)..=(i + 1).min(3) {
            assert!(find(n, fk, j, from).end_event < e.start_event, "{e:?}");
        }
    }
}

#[test]
fn classical_stops_at_tolerance_and_pipeline_reports_post_hoc() {
    let p = bump(99, 32);
    let d = Decomposition::near_uniform(p.grid(), 4, 4, PivotPolicy::Middle).unwrap();
    let a = run(&p, &d, 20, NnwrMode::Classical, 1e-10);
    assert!(a.converged);
    assert!(a.iterations < 20);
    assert!(*a.residuals.last().unwrap() < 1e-10);
    let b = run(&p, &d, 20, NnwrMode::Pipeline, 1e-10);
    assert!(b.converged);
    assert_eq!(&b.residuals[..a.residuals.len()], &a.residuals[..]);
}

#[test]
fn monolithic_traces_have_no_flux_jump() {
    let p = bump(200, 128);
    let mono = solve_monolithic(&p).unwrap();
    for ifs in [vec![101], vec![40, 120, 170]] {
        let d = Decomposition::from_nodes(p.grid(), ifs, 1, PivotPolicy::Middle).unwrap();
        let w = mono.traces(&d);
        let n = d.subdomains();
        let mut fluxes = Vec::new();
        for i in 1..=n {
            let mut s = DirichletSweep::new(&p, &d, i).unwrap();
            let left = (i > 1).then(|| w.series[i - 2].as_slice());
            let right = (i < n).then(|| w.series[i - 1].as_slice());
            fluxes.push(s.sweep(&p, 0..128, left, right).unwrap());
        }
        for b in 1..n {
            let from_left = fluxes[b - 1].flux_with(wavepipe::heat::Side::Right, FluxStencil::Balance);
            let from_right = fluxes[b].flux_with(wavepipe::heat::Side::Left, FluxStencil::Balance);
            let jump = neumann_jump(from_left, from_right).unwrap();
            assert!(jump.iter().all(|v| v.abs() < 1e-11), "{}", jump.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
}

#[test]
fn converged_traces_are_a_fixed_point() {
    let p = bump(200, 128);
    let tol = 1e-9;
    for (ifs, flux) in [(vec![101], FluxStencil::Balance), (vec![50, 100, 150], FluxStencil::Balance), (vec![50, 100, 150], FluxStencil::OneSided)] {
        let d = Decomposition::from_nodes(p.grid(), ifs, 1, PivotPolicy::Middle).unwrap();
        let mut c = NnwrConfig::new(40);
        c.tol = tol;
        c.flux = flux;
        let a = nnwr::run(&p, &d, &c).unwrap();
        assert!(a.converged);
        c.iterates = 1;
        c.tol = 0.0;
        c.initial_guess = InitialGuess::Custom(a.traces.series.clone());
        let b = nnwr::run(&p, &d, &c).unwrap();
        assert!(b.traces.max_abs_diff(&a.traces) <= 10.0 * tol);
    }
}

#[test]
fn balance_flux_converges_to_the_monolithic_traces() {
    let p = bump(200, 128);
    let mono = solve_monolithic(&p).unwrap();
    let d = Decomposition::from_nodes(p.grid(), vec![50, 100, 150], 1, PivotPolicy::Middle).unwrap();
    let mut c = NnwrConfig::new(40);
    c.tol = 1e-12;
    let a = nnwr::run(&p, &d, &c).unwrap();
    assert!(a.traces.max_abs_diff(&mono.traces(&d)) < 1e-10);
}

#[test]
fn asymmetric_split_converges_superlinearly_within_the_bound() {
    let p = bump(200, 128);
    let mono = solve_monolithic(&p).unwrap();
    let d = Decomposition::from_nodes(p.grid(), vec![20], 1, PivotPolicy::Middle).unwrap();
    let r = run(&p, &d, 6, NnwrMode::Classical, 0.0);
    let ratios: Vec<f64> = r.residuals.windows(2).map(|w| w[1] / w[0]).collect();
    assert!(r.residuals.windows(2).all(|w| w[1] < w[0]));
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    let reference = mono.traces(&d);
    let errors: Vec<f64> = r.history.iter().map(|w| w.max_abs_diff(&reference)).collect();
    for k in 1..errors.len() {
        assert!(errors[k] <= 2.0 * nnwr_bound(k, d.h_tilde(), 0.1, errors[0]).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_delays_do_not_change_the_result(seed in any::<u64>(), n in 2usize..5, k in 1usize..4, jexp in 0u32..4) {
        let p = bump(47, 16);
        let j = 1usize << jexp;
        let d = Decomposition::near_uniform(p.grid(), n, j, PivotPolicy::Middle).unwrap();
        let a = run(&p, &d, k, NnwrMode::Classical, 0.0);
        let mut c = NnwrConfig::new(k);
        c.tol = 0.0;
        c.mode = NnwrMode::Pipeline;
        c.transport = TransportOptions {
            random_delay: Some((seed, Duration::from_micros(300))),
            ..TransportOptions::default()
        };
        let b = nnwr::run(&p, &d, &c).unwrap();
        prop_assert!(a.traces.bitwise_eq(&b.traces));
        c.mode = NnwrMode::Classical;
        let e = nnwr::run(&p, &d, &c).unwrap();
        prop_assert!(a.traces.bitwise_eq(&e.traces));
    }
}
