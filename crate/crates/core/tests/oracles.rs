//! Library results against independently computed references.

mod common;

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use statrs::distribution::{Discrete, Hypergeometric as StatrsHg};
use swarmloc::bounds::{
    expected_local_locality, expected_local_random_dense, expected_local_random_sparse, hypergeom_pmf,
    improvement_factor, BoundInputs, HyperGeometric, Mode,
};
use swarmloc::datamodel::{assign_roles, generate_synthetic, ChunkParams, RatioTable, SizeDistribution, SyntheticSpec};
use swarmloc::matching::{
    expected_interest, expected_interest_pmf, filter_problem, filtering_probability, solve_bmatching, CompletionState,
    Matching, MatchingProblem,
};

use common::*;

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[test]
fn pmf_matches_exact_counting() {
    for pop in [1u64, 5, 17, 40, 60] {
        for succ in (0..=pop).step_by(3) {
            for draws in (0..=pop).step_by(4) {
                let total = binom(pop, draws) as f64;
                for x in 0..=draws {
                    let exact = (binom(succ, x) * binom(pop - succ, draws - x)) as f64 / total;
                    let got = hypergeom_pmf(x, pop, succ, draws).unwrap();
                    assert!((got - exact).abs() <= 1e-12 * exact.max(1e-300) + 1e-15, "{x} {pop} {succ} {draws}");
                }
            }
        }
    }
}

#[test]
fn pmf_matches_statrs_on_large_populations() {
    let mut r = rng(1);
    for _ in 0..40 {
        let pop = r.gen_range(1_000..200_000u64);
        let succ = r.gen_range(0..=pop);
        let draws = r.gen_range(0..=pop.min(5_000));
        let reference = StatrsHg::new(pop, succ, draws).unwrap();
        let hg = HyperGeometric::new(pop, succ, draws).unwrap();
        let (lo, hi) = hg.support();
        let mut mass = 0.0;
        for x in lo..=hi {
            let (a, b) = (hg.pmf(x), reference.pmf(x));
            mass += a;
            if b > 1e-12 {
                assert!(close(a, b, 1e-7), "pop {pop} succ {succ} draws {draws} x {x}: {a} vs {b}");
            }
        }
        assert!((mass - 1.0).abs() < 1e-9);
    }
}

/// Mean of `f(locals in the draw)` over every possible draw of `w` from `n-1`.
fn enumerate_draws(n: u64, l: u64, w: u64, f: impl Fn(u64) -> f64) -> f64 {
    let others = (n - 1) as usize;
    let w = w.min(n - 1) as usize;
    let mut total = 0.0;
    let mut count = 0u64;
    for mask in 0u32..(1 << others) {
        if mask.count_ones() as usize != w {
            continue;
        }
        // the first l-1 others are the locals
        let locals = (mask & ((1u32 << (l - 1)) - 1)).count_ones() as u64;
        total += f(locals);
        count += 1;
    }
    total / count as f64
}

#[test]
fn random_bounds_match_enumeration() {
    for n in 2..=13u64 {
        for l in 1..=n {
            for w in 2..=8u64 {
                for k in 1..w.min(5) {
                    let b = BoundInputs::new(n, l, w, k).unwrap();
                    let sparse = enumerate_draws(n, l, w, |x| x.min(k) as f64);
                    assert!(close(expected_local_random_sparse(&b), sparse, 1e-12), "{b:?}");
                    let d = w.min(n - 1) as f64;
                    let kk = k.min(w.min(n - 1)) as f64;
                    let dense = enumerate_draws(n, l, w, |x| kk * x as f64 / d);
                    assert!(close(expected_local_random_dense(&b), dense, 1e-12), "{b:?}");
                    assert!(expected_local_locality(&b, Mode::Sparse) + 1e-12 >= expected_local_random_sparse(&b));
                    assert!(expected_local_locality(&b, Mode::Dense) + 1e-12 >= expected_local_random_dense(&b));
                }
            }
        }
    }
}

#[test]
fn sparse_improvement_reduces_to_ratio_when_draws_hold_at_most_k_locals() {
    // l - 1 == k keeps every draw at or below k locals
    for (n, k, w) in [(200u64, 4u64, 40u64), (1000, 6, 50), (61, 3, 60)] {
        let b = BoundInputs::new(n, k + 1, w, k).unwrap();
        let expected = (k * (n - 1)) as f64 / (w * k) as f64;
        assert!(close(improvement_factor(&b, Mode::Sparse).unwrap(), expected, 1e-10));
    }
}

#[test]
fn interest_matches_subset_simulation() {
    let mut r = rng(2);
    let total = 200u64;
    for &(cv, cu) in &[(150u64, 40u64), (100, 100), (190, 5), (60, 59)] {
        let closed = expected_interest(cv as f64, cu as f64, total as f64).unwrap();
        let pmf = expected_interest_pmf(cv, cu, total).unwrap();
        assert!(close(closed.0, pmf.0, 1e-9) && close(closed.1, pmf.1, 1e-9));
        let trials = 20_000;
        let (mut s_vu, mut s_uv) = (0u64, 0u64);
        for _ in 0..trials {
            let hv: BTreeSet<usize> = index::sample(&mut r, total as usize, cv as usize).into_iter().collect();
            let hu: BTreeSet<usize> = index::sample(&mut r, total as usize, cu as usize).into_iter().collect();
            s_vu += hv.difference(&hu).count() as u64;
            s_uv += hu.difference(&hv).count() as u64;
        }
        let (m_vu, m_uv) = (s_vu as f64 / trials as f64, s_uv as f64 / trials as f64);
        // the counts have a standard deviation of a few chunks
        assert!((m_vu - closed.0).abs() < 0.1, "{cv} {cu}: {m_vu} vs {}", closed.0);
        assert!((m_uv - closed.1).abs() < 0.1, "{cv} {cu}: {m_uv} vs {}", closed.1);
    }
}

#[test]
fn filter_keeps_edges_at_their_probability() {
    let chunk = ChunkParams {
        total_chunks: 1000,
        ..ChunkParams::default()
    };
    let n = 30;
    let mut r = rng(3);
    let prefs: Vec<f64> = (0..n).map(|i| 400.0 + 37.0 * i as f64).collect();
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let p = MatchingProblem::new(prefs.clone(), vec![4; n], edges.clone()).unwrap();
    let state = CompletionState::new((0..n).map(|_| r.gen_range(0.0..1000.0)).collect());
    let rounds = 2000u64;
    let mut kept = vec![0u64; edges.len()];
    for step in 0..rounds {
        let f = filter_problem(&p, &state, &chunk, 9, step).unwrap();
        for (i, &(a, b)) in edges.iter().enumerate() {
            if f.allowed(a).contains(&b) {
                kept[i] += 1;
            }
        }
    }
    for (i, &(a, b)) in edges.iter().enumerate() {
        let phi = filtering_probability(state.chunks[a], state.chunks[b], &chunk, prefs[a], prefs[b]).unwrap();
        let freq = kept[i] as f64 / rounds as f64;
        let sd = (phi * (1.0 - phi) / rounds as f64).sqrt();
        assert!((freq - phi).abs() <= 5.0 * sd + 1e-12, "edge {a}-{b}: {freq} vs {phi}");
    }
}

/// Every feasible matching of a tiny instance, stable ones kept.
fn stable_by_enumeration(p: &MatchingProblem) -> Vec<Matching> {
    let edges: Vec<(usize, usize)> = p.edges().collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << edges.len()) {
        let m = Matching::from_pairs((0..edges.len()).filter(|i| mask >> i & 1 == 1).map(|i| edges[i]));
        let mut deg = vec![0; p.len()];
        for &(a, b) in &m.pairs {
            deg[a] += 1;
            deg[b] += 1;
        }
        if deg.iter().zip(&p.slots).all(|(d, s)| d <= s) && blocking_pairs(p, &m).is_empty() {
            out.push(m);
        }
    }
    out
}

#[test]
fn solver_finds_the_unique_stable_matching_of_tiny_instances() {
    let mut r = rng(4);
    let mut checked = 0;
    while checked < 300 {
        let n = r.gen_range(2..=7);
        let p = random_problem(&mut r, n, 2, 0.6);
        if p.edge_count() > 14 {
            continue;
        }
        let stable = stable_by_enumeration(&p);
        assert_eq!(stable.len(), 1, "{p:?}");
        assert_eq!(solve_bmatching(&p), stable[0]);
        checked += 1;
    }
}

#[test]
fn power_law_sizes_pass_ks() {
    let (min, max, exponent) = (2usize, 500usize, 1.8);
    let spec = SyntheticSpec {
        torrents: 4000,
        sizes: SizeDistribution::PowerLaw { min, max, exponent },
        isps: 3,
        isp_skew: 0.0,
        countries: 1,
        speed_min_kbps: 300.0,
        speed_max_kbps: 3000.0,
        seeder_fraction: 0.25,
    };
    let d = generate_synthetic(&spec, 5).unwrap();
    let mut sizes: Vec<usize> = d.torrents().iter().map(|t| t.len()).collect();
    sizes.sort_unstable();
    let z: f64 = (min..=max).map(|s| (s as f64).powf(-exponent)).sum();
    let mut cdf = 0.0;
    let mut dmax: f64 = 0.0;
    let n = sizes.len() as f64;
    for s in min..=max {
        cdf += (s as f64).powf(-exponent) / z;
        let emp = sizes.partition_point(|&x| x <= s) as f64 / n;
        dmax = dmax.max((emp - cdf).abs());
    }
    // alpha = 0.001
    assert!(dmax < 1.95 / n.sqrt(), "KS statistic {dmax}");
}

#[test]
fn isp_skew_follows_zipf_weights() {
    let spec = SyntheticSpec {
        torrents: 200,
        sizes: SizeDistribution::Point { size: 100 },
        isps: 5,
        isp_skew: 1.0,
        countries: 2,
        speed_min_kbps: 300.0,
        speed_max_kbps: 3000.0,
        seeder_fraction: 0.25,
    };
    let d = generate_synthetic(&spec, 6).unwrap();
    let h: f64 = (1..=5).map(|r| 1.0 / r as f64).sum();
    let total = d.peer_count() as f64;
    for r in 0..5 {
        let p = 1.0 / (r + 1) as f64 / h;
        let got = d.isp_population(&SyntheticSpec::isp_id(r)) as f64 / total;
        let sd = (p * (1.0 - p) / total).sqrt();
        assert!((got - p).abs() < 5.0 * sd, "isp {r}: {got} vs {p}");
    }
}

#[test]
fn role_assignment_concentrates_on_ratio() {
    let mut r = rng(7);
    let t = torrent("big", &[("H", "US", 5000), ("R1", "DE", 5000)], 0.0, &mut r);
    let d = swarmloc::datamodel::Dataset::new(vec![t]).unwrap();
    let ratios: RatioTable = [("big".to_string(), (3u64, 7u64))].into_iter().collect();
    let assigned = assign_roles(&d, &ratios, 11).unwrap();
    let seeders = assigned.torrents()[0].peers.iter().filter(|p| p.is_seeder()).count() as f64;
    let n = 10_000.0;
    let sd = (n * 0.3 * 0.7f64).sqrt();
    assert!((seeders - 0.3 * n).abs() < 5.0 * sd, "{seeders}");
}
