use std::time::Duration;

use proptest::prelude::*;
use wavepipe::dnwr::{self, interface_owner, DnwrConfig, DnwrMode};
use wavepipe::oracle::{dnwr_bound, solve_monolithic};
use wavepipe::transport::{MsgKind, TransportOptions};
use wavepipe::{Decomposition, Error, HeatProblem, InitialGuess, PivotPolicy, RunReport, SpaceTimeGrid};

fn bump(nx: usize, nt: usize) -> HeatProblem {
    HeatProblem::parabolic_bump(SpaceTimeGrid::new(1.0, 0.1, nx, nt).unwrap())
}

fn config(k: usize, mode: DnwrMode) -> DnwrConfig {
    let mut c = DnwrConfig::new(k);
    c.mode = mode;
    c.tol = 0.0;
    c.enforce_block_bound = false;
    c
}

fn run(p: &HeatProblem, d: &Decomposition, k: usize, mode: DnwrMode) -> RunReport {
    let d = if mode == DnwrMode::Pipeline { d.clone() } else { d.with_blocks(1).unwrap() };
    dnwr::run(p, &d, &config(k, mode)).unwrap()
}

#[test]
fn all_orderings_agree_bitwise() {
    let p = bump(63, 64);
    for n in 1..=8 {
        for k in 1..=4 {
            let d1 = Decomposition::near_uniform(p.grid(), n, 1, PivotPolicy::Middle).unwrap();
            let naive = run(&p, &d1, k, DnwrMode::Naive);
            let packed = run(&p, &d1, k, DnwrMode::ClassicalPacked);
            assert!(naive.traces.bitwise_eq(&packed.traces), "N{n} K{k}");
            assert_eq!(naive.residuals, packed.residuals);
            for j in [1, 4, 16] {
                let d = d1.with_blocks(j).unwrap();
                let pipe = run(&p, &d, k, DnwrMode::Pipeline);
                assert!(naive.traces.bitwise_eq(&pipe.traces), "N{n} K{k} J{j}");
                assert_eq!(naive.residuals, pipe.residuals);
                assert_eq!(pipe.unmatched_messages, 0);
            }
        }
    }
}

#[test]
fn off_centre_pivots_agree() {
    let p = bump(63, 32);
    for m in 1..=5 {
        let d = Decomposition::near_uniform(p.grid(), 5, 8, PivotPolicy::Middle).unwrap().with_pivot(m).unwrap();
        let a = run(&p, &d, 3, DnwrMode::Naive);
        let b = run(&p, &d, 3, DnwrMode::ClassicalPacked);
        let c = run(&p, &d, 3, DnwrMode::Pipeline);
        assert!(a.traces.bitwise_eq(&b.traces) && a.traces.bitwise_eq(&c.traces), "m = {m}");
    }
}

#[test]
fn message_counts() {
    let p = bump(63, 64);
    for n in [2, 4, 8] {
        for k in 1..=4 {
            let d = Decomposition::near_uniform(p.grid(), n, 8, PivotPolicy::Middle).unwrap();
            let expected = (n as u64 - 1) * (2 * k as u64 - 1);
            let naive = run(&p, &d, k, DnwrMode::Naive);
            let packed = run(&p, &d, k, DnwrMode::ClassicalPacked);
            let pipe = run(&p, &d, k, DnwrMode::Pipeline);
            assert_eq!(naive.counters.total_messages, expected);
            assert_eq!(packed.counters.total_messages, expected);
            assert_eq!(naive.counters.messages_of(MsgKind::NeumannFlux), (n as u64 - 1) * k as u64);
            assert_eq!(pipe.counters.total_messages, 8 * expected);
            assert_eq!(pipe.counters.total_words, naive.counters.total_words);
        }
    }
}

#[test]
fn pipeline_respects_the_wavefront() {
    // a task waits for the flux of its neighbour nearer the pivot in the
    // same iterate and for the relaxed trace from the previous iterate
    let p = bump(63, 64);
    let (n, kk) = (7, 3);
    let d = Decomposition::near_uniform(p.grid(), n, 8, PivotPolicy::Middle).unwrap();
    let m = d.pivot();
    let r = run(&p, &d, kk, DnwrMode::Pipeline);
    assert_eq!(r.timeline.len(), n * kk * 8);
    let end = |i: usize, k: usize, j: usize| {
        r.timeline
            .iter()
            .find(|e| e.subdomain == i && e.iterate == k && e.block == j)
            .unwrap()
            .end_event
    };
    for e in &r.timeline {
        let (i, k, j) = (e.subdomain, e.iterate, e.block);
        if j > 1 {
            assert!(end(i, k, j - 1) < e.start_event);
        }
        if i < m {
            assert!(end(i + 1, k, j) < e.start_event);
        }
        if i > m {
            assert!(end(i - 1, k, j) < e.start_event);
        }
        if k > 1 {
            if i > 1 && i <= m {
                assert_eq!(interface_owner(i - 1, m), i - 1);
                assert!(end(i - 1, k - 1, j) < e.start_event);
            }
            if i < n && i >= m {
                assert_eq!(interface_owner(i, m), i + 1);
                assert!(end(i + 1, k - 1, j) < e.start_event);
            }
        }
    }
}

#[test]
fn reflection_symmetry() {
    let grid = SpaceTimeGrid::new(1.0, 0.1, 80, 32).unwrap();
    let u0 = |x: f64| (std::f64::consts::PI * x).sin() * (1.0 + 2.0 * x);
    let p = HeatProblem::from_fn(grid, u0);
    let q = HeatProblem::from_fn(grid, move |x| u0(1.0 - x));
    let nodes = vec![13, 30, 52, 60];
    let mirrored: Vec<usize> = nodes.iter().rev().map(|&v| 81 - v).collect();
    for m in 1..=5 {
        let d = Decomposition::from_nodes(&grid, nodes.clone(), 1, PivotPolicy::Middle).unwrap().with_pivot(m).unwrap();
        let e = Decomposition::from_nodes(&grid, mirrored.clone(), 1, PivotPolicy::Middle).unwrap().with_pivot(6 - m).unwrap();
        let a = run(&p, &d, 4, DnwrMode::Naive);
        let b = run(&q, &e, 4, DnwrMode::Naive);
        for (s, t) in a.traces.series.iter().zip(b.traces.series.iter().rev()) {
            let diff = s.iter().zip(t).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
            assert!(diff <= 1e-12, "m = {m}: {diff:e}");
        }
    }
}

#[test]
fn converged_traces_are_a_fixed_point_and_fluxes_match() {
    let p = bump(200, 128);
    let tol = 1e-9;
    for n in [2, 3, 4] {
        let d = Decomposition::near_uniform(p.grid(), n, 1, PivotPolicy::Middle).unwrap();
        let mut c = DnwrConfig::new(40);
        c.tol = tol;
        let a = dnwr::run(&p, &d, &c).unwrap();
        assert!(a.converged, "N = {n}");
        let flux = a.interface_flux.as_ref().unwrap();
        assert!(flux.max_mismatch() < 1e-8, "N = {n}: {}", flux.max_mismatch());
        c.iterates = 1;
        c.tol = 0.0;
        c.initial_guess = InitialGuess::Custom(a.traces.series.clone());
        let b = dnwr::run(&p, &d, &c).unwrap();
        assert!(b.traces.max_abs_diff(&a.traces) <= 10.0 * tol);
        let mono = solve_monolithic(&p).unwrap();
        assert!(a.traces.max_abs_diff(&mono.traces(&d)) < 1e-8);
    }
}

#[test]
fn two_subdomains_converge_superlinearly() {
    let p = bump(200, 128);
    let d = Decomposition::near_uniform(p.grid(), 2, 1, PivotPolicy::Middle).unwrap();
    let r = run(&p, &d, 4, DnwrMode::Naive);
    let ratios: Vec<f64> = r.residuals.windows(2).map(|w| w[1] / w[0]).collect();
    assert!(r.residuals.windows(2).all(|w| w[1] < w[0]), "{:?}", r.residuals);
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
}

#[test]
fn errors_within_the_estimate() {
    let p = bump(200, 128);
    let mono = solve_monolithic(&p).unwrap();
    for n in [3, 4, 8] {
        let d = Decomposition::near_uniform(p.grid(), n, 1, PivotPolicy::Middle).unwrap();
        let r = run(&p, &d, 8, DnwrMode::Naive);
        let reference = mono.traces(&d);
        let errors: Vec<f64> = r.history.iter().map(|w| w.max_abs_diff(&reference)).collect();
        for k in 1..errors.len() {
            let bound = dnwr_bound(k, n, d.h_min(), d.h_max(), d.width(d.pivot()), 0.1, errors[0]).unwrap();
            assert!(errors[k] <= 2.0 * bound, "N{n} k{k}: {} > 2 x {bound}", errors[k]);
        }
    }
}

#[test]
fn block_bound_is_enforced_by_default() {
    let p = bump(63, 64);
    let d = Decomposition::near_uniform(p.grid(), 8, 8, PivotPolicy::Middle).unwrap();
    let mut c = DnwrConfig::new(4);
    c.mode = DnwrMode::Pipeline;
    assert!(matches!(dnwr::run(&p, &d, &c), Err(Error::Precondition(_))));
    let d = d.with_blocks(16).unwrap();
    assert!(dnwr::run(&p, &d, &c).is_ok());
}

#[test]
fn bad_configs() {
    let p = bump(63, 64);
    let d = Decomposition::near_uniform(p.grid(), 4, 1, PivotPolicy::Middle).unwrap();
    let mut c = DnwrConfig::new(2);
    c.theta = 0.0;
    assert!(dnwr::run(&p, &d, &c).is_err());
    let mut c = DnwrConfig::new(2);
    c.pivot = Some(5);
    assert!(dnwr::run(&p, &d, &c).is_err());
    assert!(dnwr::run(&p, &d, &DnwrConfig::new(0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn random_delays_do_not_change_the_result(seed in any::<u64>(), n in 2usize..7, k in 1usize..4, jexp in 0u32..4) {
        let p = bump(47, 16);
        let j = 1usize << jexp;
        let d = Decomposition::near_uniform(p.grid(), n, j, PivotPolicy::Middle).unwrap();
        let a = run(&p, &d, k, DnwrMode::Naive);
        for mode in [DnwrMode::ClassicalPacked, DnwrMode::Pipeline] {
            let mut c = config(k, mode);
            c.transport = TransportOptions {
                random_delay: Some((seed, Duration::from_micros(300))),
                ..TransportOptions::default()
            };
            let dd = if mode == DnwrMode::Pipeline { d.clone() } else { d.with_blocks(1).unwrap() };
            let b = dnwr::run(&p, &dd, &c).unwrap();
            prop_assert!(a.traces.bitwise_eq(&b.traces));
        }
    }
}
