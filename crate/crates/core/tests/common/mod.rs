#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use swarmloc::datamodel::{Dataset, Peer, Role, SpeedModel, TorrentRecord};
use swarmloc::matching::{Matching, MatchingProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    swarmloc::seed::rng(seed, &["tests"])
}

/// Blocking pairs found by a scan that shares nothing with the library's
/// verifier: a node accepts `u` if it has a free slot or some current
/// partner it likes less than `u`.
pub fn blocking_pairs(p: &MatchingProblem, m: &Matching) -> Vec<(usize, usize)> {
    let n = p.len();
    let mut partners = vec![Vec::new(); n];
    for &(a, b) in &m.pairs {
        partners[a].push(b);
        partners[b].push(a);
    }
    let accepts = |v: usize, u: usize| {
        partners[v].len() < p.slots[v] || partners[v].iter().any(|&c| p.preference[c] < p.preference[u])
    };
    let mut out = Vec::new();
    for a in 0..n {
        for &b in p.allowed(a) {
            if a < b && !m.contains(a, b) && accepts(a, b) && accepts(b, a) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Random graph with distinct preferences and per-node slots in `1..=kmax`.
pub fn random_problem(r: &mut ChaCha8Rng, n: usize, kmax: usize, density: f64) -> MatchingProblem {
    let mut prefs: Vec<f64> = (0..n).map(|i| i as f64 + r.gen::<f64>() * 0.5).collect();
    prefs.shuffle(r);
    let slots = (0..n).map(|_| r.gen_range(1..=kmax)).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.gen_bool(density) {
                edges.push((a, b));
            }
        }
    }
    MatchingProblem::new(prefs, slots, edges).unwrap()
}

/// `(isp, country, count)` groups, roles drawn with `seed_frac`.
pub fn torrent(tid: &str, groups: &[(&str, &str, usize)], seed_frac: f64, r: &mut ChaCha8Rng) -> TorrentRecord {
    let mut peers = Vec::new();
    for &(isp, c, n) in groups {
        for i in 0..n {
            let role = if r.gen_bool(seed_frac) { Role::Seeder } else { Role::Leecher };
            peers.push(Peer::new(format!("{tid}.{isp}.{i:04}"), isp, c).with_role(role));
        }
    }
    TorrentRecord::new(tid, peers).unwrap()
}

pub const ISPS: [(&str, &str); 6] = [
    ("H", "US"),
    ("P", "US"),
    ("R1", "DE"),
    ("R2", "FR"),
    ("R3", "DE"),
    ("R4", "JP"),
];

/// A torrent with random size and random ISP mix over [`ISPS`].
pub fn random_torrent(tid: &str, r: &mut ChaCha8Rng, max_size: usize, seed_frac: f64) -> TorrentRecord {
    let n = r.gen_range(1..=max_size);
    let mut counts = [0usize; ISPS.len()];
    for _ in 0..n {
        counts[r.gen_range(0..ISPS.len())] += 1;
    }
    let groups: Vec<(&str, &str, usize)> = ISPS
        .iter()
        .zip(counts)
        .filter(|(_, c)| *c > 0)
        .map(|(&(i, c), n)| (i, c, n))
        .collect();
    torrent(tid, &groups, seed_frac, r)
}

pub fn random_dataset(r: &mut ChaCha8Rng, torrents: usize, max_size: usize) -> Dataset {
    let ts = (0..torrents)
        .map(|i| random_torrent(&format!("t{i:03}"), r, max_size, 0.2))
        .collect();
    Dataset::new(ts).unwrap()
}

pub fn random_speeds(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> SpeedModel {
    let m: BTreeMap<String, f64> = ISPS.iter().map(|(i, _)| (i.to_string(), r.gen_range(lo..hi))).collect();
    SpeedModel::from_isp_medians(m).unwrap()
}

/// Per-peer speeds for every peer of `d`, uniform in `[lo, hi)`.
pub fn with_peer_speeds(s: SpeedModel, d: &Dataset, r: &mut ChaCha8Rng, lo: f64, hi: f64) -> SpeedModel {
    let m = d
        .torrents()
        .iter()
        .flat_map(|t| t.peers.iter())
        .map(|p| (p.peer_id.clone(), r.gen_range(lo..hi)))
        .collect();
    s.with_peer_speeds(m).unwrap()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}
