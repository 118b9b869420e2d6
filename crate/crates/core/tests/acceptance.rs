//! Acceptance suite. One line per criterion; exits non-zero on any failure.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use swarmloc::bounds::{expected_local_random_dense, expected_local_random_sparse, BoundInputs};
use swarmloc::datamodel::{ChunkParams, Dataset, Role, SpeedModel, SyntheticSpec, SizeDistribution};
use swarmloc::experiment::{self, DataSource, ExperimentConfig, Inputs};
use swarmloc::localizability::{isp_localizability, torrent_localizability, LocalizabilityQuery};
use swarmloc::matching::{
    run_completion_simulation, solve_bmatching, tiebreak_speeds, uniform_swarm, verify_stability, Matching,
    MatchingProblem,
};
use swarmloc::overlay::{self, OverlayPolicy};
use swarmloc::traffic::{aggregate, torrent_matrix, SeederPolicy};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome { pass: true, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome { pass: false, detail: detail.into() }
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn stability_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut pairs = 0usize;
    for i in 0..1000 {
        let n = r.gen_range(2..=200);
        let k = 1 + i % 5;
        let density = r.gen_range(0.02..1.0);
        let mut p = random_problem(&mut r, n, k, density);
        if i % 2 == 0 {
            // a common k for every node
            p = MatchingProblem::new(p.preference.clone(), vec![k; n], p.edges().collect::<Vec<_>>()).unwrap();
        }
        let m = solve_bmatching(&p);
        let blocking = verify_stability(&p, &m);
        if !blocking.is_empty() {
            return fail(format!("instance {i}: blocking pairs {blocking:?}"));
        }
        pairs += m.len();
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(60), format!("1000 instances, {pairs} matched pairs, {}", secs(t)))
}

fn order_invariance() -> Outcome {
    let mut r = rng(102);
    for i in 0..100 {
        let n = r.gen_range(2..=120);
        let (k, density) = (r.gen_range(1..=5), r.gen_range(0.05..0.8));
        let p = random_problem(&mut r, n, k, density);
        let m = solve_bmatching(&p);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let mut inv = vec![0; n];
        for (pos, &v) in perm.iter().enumerate() {
            inv[v] = pos;
        }
        let q = MatchingProblem::new(
            perm.iter().map(|&v| p.preference[v]).collect(),
            perm.iter().map(|&v| p.slots[v]).collect(),
            p.edges().map(|(a, b)| (inv[a], inv[b])).collect::<Vec<_>>(),
        )
        .unwrap();
        let back = Matching::from_pairs(solve_bmatching(&q).pairs.iter().map(|&(a, b)| (perm[a], perm[b])));
        if back != m {
            return fail(format!("instance {i} (n = {n}) changed under shuffling"));
        }
    }
    pass("100 shuffled instances, identical matchings")
}

fn stratification() -> Outcome {
    let n = 40;
    let k = 4;
    let speeds: Vec<f64> = (0..n).map(|i| 80.0 + 24.0 * i as f64).collect();
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let p = MatchingProblem::new(speeds, vec![k; n], edges).unwrap();
    let m = solve_bmatching(&p);
    let expected = Matching::from_pairs(
        (0..n).flat_map(|a| (a + 1..n).filter(move |&b| a / 5 == b / 5).map(move |b| (a, b))),
    );
    let blocking = blocking_pairs(&p, &m);
    if !blocking.is_empty() {
        return fail(format!("independent scan found blocking pairs {blocking:?}"));
    }
    check(m == expected, format!("{} pairs in 8 blocks of 5, no blocking pair", m.len()))
}

/// Locals among `draws` peers taken one at a time without replacement.
fn urn_draw(r: &mut impl Rng, population: u64, successes: u64, draws: u64) -> u64 {
    let mut hits = 0;
    for j in 0..draws {
        if r.gen_range(0..population - j) < successes - hits {
            hits += 1;
        }
    }
    hits
}

fn bounds_vs_monte_carlo() -> Outcome {
    let start = Instant::now();
    let mut r = rng(104);
    let draws_per_input = 1_000_000;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 20 {
        let n = r.gen_range(20..5000u64);
        let w = r.gen_range(5..80u64);
        let k = r.gen_range(1..w.min(6));
        let l = r.gen_range(1..=n);
        let b = BoundInputs::new(n, l, w, k).unwrap();
        let d = b.draws();
        // keep the expected local count away from zero so 1% is resolvable
        if (l - 1) as f64 * d as f64 / (n - 1) as f64 <= 0.5 {
            continue;
        }
        let kk = k.min(d) as f64;
        let (mut sparse, mut dense) = (0.0, 0.0);
        for _ in 0..draws_per_input {
            let x = urn_draw(&mut r, n - 1, l - 1, d);
            sparse += x.min(k) as f64;
            dense += kk * x as f64 / d as f64;
        }
        let (sparse, dense) = (sparse / draws_per_input as f64, dense / draws_per_input as f64);
        for (name, got, sim) in [
            ("sparse", expected_local_random_sparse(&b), sparse),
            ("dense", expected_local_random_dense(&b), dense),
        ] {
            let rel = (got - sim).abs() / sim;
            if rel > 0.01 {
                return fail(format!("{name} {b:?}: {got} vs simulated {sim}"));
            }
            worst = worst.max(rel);
        }
        checked += 1;
    }
    let t = start.elapsed();
    check(
        t < Duration::from_secs(120),
        format!("20 inputs x 10^6 draws, worst relative error {worst:.2e}, {}", secs(t)),
    )
}

fn scope(geo: &BTreeMap<String, String>, a: &str, b: &str) -> usize {
    if a == b {
        0
    } else if geo[a] == geo[b] {
        1
    } else {
        2
    }
}

fn conservation() -> Outcome {
    let mut r = rng(105);
    let mut uploaders = 0;
    let mut entries = 0;
    for i in 0..100 {
        let d = Dataset::new(vec![random_torrent(&format!("t{i}"), &mut r, 150, 0.3)]).unwrap();
        let s = with_peer_speeds(random_speeds(&mut r, 300.0, 3000.0), &d, &mut r, 100.0, 5000.0);
        let t = &d.torrents()[0];
        let speeds = s.torrent_speeds(t).unwrap();
        let pref = tiebreak_speeds(&speeds, 1e-9, i);
        let policy = [OverlayPolicy::Random, OverlayPolicy::loif(), OverlayPolicy::locality()][i as usize % 3];
        let g = overlay::build(t, policy, &speeds, 20, i).unwrap();
        let sp = if i % 2 == 0 { SeederPolicy::Proportional } else { SeederPolicy::Uniform };
        let m = torrent_matrix(t, &g, &speeds, &pref, 4, sp).unwrap().matrix;
        for (v, &speed) in speeds.iter().enumerate() {
            let serves = g.neighbors(v).iter().any(|&u| t.peers[u].role == Some(Role::Leecher));
            if serves {
                uploaders += 1;
                if !close(m.outgoing(v), speed, 1e-9) {
                    return fail(format!("torrent {i} peer {v}: sends {} of {speed}", m.outgoing(v)));
                }
            }
        }
        if !d.contains_isp("H") {
            continue;
        }
        let rep = aggregate([(t, &m)], "H", d.geo()).unwrap();
        let mut by_scope = [0.0; 3];
        for ((a, b), rate) in m.entries() {
            let (ia, ib) = (&t.peers[a].isp_id, &t.peers[b].isp_id);
            if ia == "H" || ib == "H" {
                by_scope[scope(d.geo(), ia, ib)] += rate;
                entries += 1;
            }
        }
        let got = [rep.totals.internal, rep.totals.peering, rep.totals.transit];
        if got.iter().zip(by_scope).any(|(g, e)| !close(*g, e, 1e-12) && (*g - e).abs() > 1e-9) {
            return fail(format!("torrent {i}: scope totals {got:?} vs {by_scope:?}"));
        }
    }
    pass(format!("{uploaders} uploaders conserve their uplink; {entries} home-ISP entries partitioned"))
}

fn completion_convergence() -> Vec<Outcome> {
    let start = Instant::now();
    let chunk = ChunkParams::default();
    let n = 40;
    let (lo, hi) = (1000.0, 3000.0);
    let (p, s0) = uniform_swarm(n, lo, hi, chunk.total_chunks as f64 / 100.0, chunk.regular_slots, 0).unwrap();
    let tr = run_completion_simulation(&p, &chunk, s0, 720, 0).unwrap();
    let t = start.elapsed();
    let ratio_at_60 = tr
        .rows
        .iter()
        .filter(|row| row.sim_time_sec + chunk.unchoke_interval_sec <= 60.0)
        .map(|row| row.capacity_kbps / tr.baseline_capacity_kbps)
        .min_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
        .unwrap_or(0.0);
    let capacity = check(
        (ratio_at_60 - 1.0).abs() <= 0.05 && t < Duration::from_secs(60),
        format!("capacity/baseline {ratio_at_60:.3} within 60 s, {}", secs(t)),
    );

    let minutes = |count: usize| {
        tr.rows
            .iter()
            .find(|row| row.completed >= count)
            .map(|row| format!("{:.1}", (row.sim_time_sec + chunk.unchoke_interval_sec) / 60.0))
            .unwrap_or_else(|| "never".into())
    };
    // time to pull C chunks at a node's own uplink, for the fastest and slowest node
    let own = |u: f64| chunk.total_chunks as f64 * chunk.chunk_size_bytes as f64 * 8.0 / (u * 1000.0) / 60.0;
    let umax = p.preference.iter().copied().fold(f64::MIN, f64::max);
    let umin = p.preference.iter().copied().fold(f64::MAX, f64::min);
    let detail = format!(
        "all nodes done: {} (band 24..36 min); first {} / half {} / 75% {} min; stalls at {} min with {} of {n} done; own-uplink time {:.1}..{:.1} min",
        tr.all_complete_at_sec.map_or("never".into(), |s| format!("{:.1} min", s / 60.0)),
        minutes(1),
        minutes(n / 2),
        minutes(3 * n / 4),
        tr.quiescent_at_sec.map_or("-".into(), |s| format!("{:.1}", s / 60.0)),
        tr.final_state.completed(chunk.total_chunks),
        own(umax),
        own(umin),
    );
    let band = check(tr.all_complete_at_sec.is_some_and(|s| (24.0..=36.0).contains(&(s / 60.0))), detail);
    vec![capacity, band]
}

/// `torrents` torrents with `home` peers in H and `remote` peers in each of
/// three foreign ISPs.
fn localizable_inputs(torrents: usize, home: usize, remote: usize, r: &mut rand_chacha::ChaCha8Rng) -> Inputs {
    let ts = (0..torrents)
        .map(|i| {
            torrent(
                &format!("t{i:02}"),
                &[("H", "US", home + r.gen_range(0..10)), ("R1", "DE", remote), ("R2", "FR", remote + 1), ("R4", "JP", remote + 2)],
                0.25,
                r,
            )
        })
        .collect();
    let dataset = Dataset::new(ts).unwrap();
    let medians: BTreeMap<String, f64> =
        [("H", 2000.0), ("R1", 1500.0), ("R2", 2500.0), ("R4", 1000.0)].into_iter().map(|(i, v)| (i.to_string(), v)).collect();
    let speeds = with_peer_speeds(SpeedModel::from_isp_medians(medians).unwrap(), &dataset, r, 300.0, 4000.0);
    Inputs { dataset, speeds }
}

fn synthetic_spec() -> SyntheticSpec {
    SyntheticSpec {
        torrents: 60,
        sizes: SizeDistribution::PowerLaw { min: 2, max: 300, exponent: 1.8 },
        isps: 8,
        isp_skew: 1.0,
        countries: 3,
        speed_min_kbps: 300.0,
        speed_max_kbps: 4000.0,
        seeder_fraction: 0.3,
    }
}

/// `evaluate` takes its inputs directly, so the source is never read.
fn evaluation_config(policies: Vec<OverlayPolicy>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(DataSource::Synthetic(synthetic_spec()));
    cfg.home_isps = vec!["H".into()];
    cfg.policies = policies;
    cfg.seed = 107;
    cfg
}

fn policy_dominance() -> Outcome {
    let mut r = rng(107);
    let cfg = evaluation_config(vec![
        OverlayPolicy::Random,
        OverlayPolicy::loif(),
        OverlayPolicy::locality(),
        OverlayPolicy::strict(1),
    ]);
    let inputs = localizable_inputs(30, cfg.chunk.neighborhood + 1, 2, &mut r);
    let e = experiment::evaluate(&cfg, &inputs).unwrap();
    let transit = |p: &OverlayPolicy| e.report("H", p).unwrap().traffic.totals.transit;
    let [random, loif, locality, strict] = [
        transit(&OverlayPolicy::Random),
        transit(&OverlayPolicy::loif()),
        transit(&OverlayPolicy::locality()),
        transit(&OverlayPolicy::strict(1)),
    ];
    let reduction = e.report("H", &OverlayPolicy::locality()).unwrap().transit_reduction.value();
    let detail = format!(
        "transit kbps random {random:.0} >= loif {loif:.0} >= locality {locality} >= strict {strict}; locality reduction {}",
        reduction.map_or("NA".into(), |v| format!("{:.1}%", 100.0 * v))
    );
    check(
        random > 0.0 && locality == 0.0 && reduction == Some(1.0) && strict <= locality && locality <= loif && loif <= random,
        detail,
    )
}

fn loif_boundary() -> Outcome {
    let mut r = rng(108);
    let cfg = evaluation_config(vec![OverlayPolicy::Random, OverlayPolicy::loif()]);
    let mut inputs = localizable_inputs(20, 10, 3, &mut r);
    let flat: BTreeMap<String, f64> = inputs.dataset.isps().map(|i| (i.to_string(), 1500.0)).collect();
    inputs.speeds = SpeedModel::from_isp_medians(flat).unwrap();
    let e = experiment::evaluate(&cfg, &inputs).unwrap();
    let mut graphs = 0;
    for t in inputs.dataset.torrents() {
        let id = t.torrent_id.clone();
        let (a, b) = (&e.runs[&(id.clone(), 0)], &e.runs[&(id, 1)]);
        if a.graph != b.graph || a.traffic != b.traffic {
            return fail(format!("torrent {} differs", t.torrent_id));
        }
        graphs += 1;
    }
    let (a, b) = (e.report("H", &OverlayPolicy::Random).unwrap(), e.report("H", &OverlayPolicy::loif()).unwrap());
    check(
        a.traffic == b.traffic && a.qos_reduction == b.qos_reduction && a.unlocalizable == b.unlocalizable,
        format!("{graphs} overlays and the H report identical"),
    )
}

fn localizability_properties() -> Outcome {
    let mut r = rng(109);
    let qs = [0.0, 0.05, 0.1, 0.2, 0.25, 0.4, 0.6, 0.8, 1.0];
    let mut evaluated = 0;
    for i in 0..100 {
        let d = random_dataset(&mut r, 10, 60);
        let s = random_speeds(&mut r, 200.0, 4000.0);
        let Some(home) = d.isps().next().map(str::to_string) else { continue };
        let mut prev = f64::INFINITY;
        for q in qs {
            let v = isp_localizability(&d, &s, &LocalizabilityQuery::new(&home, q).unwrap()).unwrap();
            if v > prev {
                return fail(format!("dataset {i}: I rises to {v} at q = {q}"));
            }
            prev = v;
        }
        evaluated += 1;
    }

    let solo = Dataset::new(vec![torrent("solo", &[("H", "US", 17)], 0.2, &mut r)]).unwrap();
    let s = random_speeds(&mut r, 200.0, 4000.0);
    for q in qs {
        if isp_localizability(&solo, &s, &LocalizabilityQuery::new("H", q).unwrap()).unwrap() != 1.0 {
            return fail(format!("single-ISP torrent below 1 at q = {q}"));
        }
    }

    let d = Dataset::new(vec![torrent("t", &[("A", "US", 10), ("B", "US", 30), ("C", "DE", 60)], 0.0, &mut r)]).unwrap();
    let s = SpeedModel::from_isp_medians(
        [("A", 1000.0), ("B", 1100.0), ("C", 2000.0)].into_iter().map(|(i, v)| (i.to_string(), v)).collect(),
    )
    .unwrap();
    let three = torrent_localizability(&d, &s, "t", &LocalizabilityQuery::new("A", 0.25).unwrap()).unwrap();
    check(
        three == 0.25,
        format!("{evaluated} datasets non-increasing in q; single ISP = 1; three-ISP example = {three}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = synthetic_spec();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = ExperimentConfig::new(DataSource::Synthetic(spec.clone()));
        cfg.seed = 110;
        cfg.out = dir.path().join(run);
        cfg.dump_overlays = true;
        cfg.dump_matchings = true;
        let out = experiment::run(&cfg).unwrap();
        let files: Vec<(String, Vec<u8>)> = out
            .files
            .iter()
            .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(f).unwrap()))
            .collect();
        outputs.push(files);
    }
    let bytes: usize = outputs[0].iter().map(|(_, b)| b.len()).sum();
    check(
        outputs[0] == outputs[1],
        format!("{} files, {bytes} bytes, byte-identical", outputs[0].len()),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: &str, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("[{tag}] {id:3} {name}: {}", o.detail);
    };
    report("1", "stability oracle", stability_oracle());
    report("2", "order invariance", order_invariance());
    report("3", "stratification", stratification());
    report("4", "bounds vs monte carlo", bounds_vs_monte_carlo());
    report("5", "conservation", conservation());
    let mut six = completion_convergence().into_iter();
    report("6a", "capacity convergence", six.next().unwrap());
    report("6b", "full download in 30 +/- 6 min", six.next().unwrap());
    report("7", "policy dominance", policy_dominance());
    report("8", "loif boundary", loif_boundary());
    report("9", "localizability", localizability_properties());
    report("10", "determinism", determinism());
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
