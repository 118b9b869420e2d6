//! Reciprocal unchokes as a stable b-matching with a global preference.
//!
//! Every leecher ranks its neighbors by (tie-broken) uplink speed, the same
//! ranking for everybody. Such preferences admit no cycles, so exactly one
//! stable matching exists and a greedy pass finds it.

mod completion;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;

use crate::datamodel::TorrentRecord;
use crate::error::{Error, Result};
use crate::overlay::OverlayGraph;
use crate::seed;

pub use completion::{
    edge_probabilities, expected_interest, expected_interest_pmf, filter_problem, filtering_probability, pair_interest,
    run_completion_simulation, step_completions, uniform_swarm, CompletionState, CompletionTrace, TraceRow,
};

pub const DEFAULT_TIEBREAK_EPSILON: f64 = 1e-9;

/// Perturb speeds by a relative amount below `epsilon` so that all values are
/// pairwise distinct. Values that were already distinct keep their order.
pub fn tiebreak_speeds(speeds: &[f64], epsilon: f64, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed, &["tiebreak"]);
    let jitter: Vec<f64> = speeds.iter().map(|_| rng.gen::<f64>()).collect();
    let mut out: Vec<f64> = speeds
        .iter()
        .zip(&jitter)
        .map(|(s, r)| s * (1.0 + 0.5 * epsilon * r))
        .collect();
    let mut order: Vec<usize> = (0..speeds.len()).collect();
    order.sort_by(|&a, &b| {
        speeds[a]
            .total_cmp(&speeds[b])
            .then(jitter[a].total_cmp(&jitter[b]))
            .then(a.cmp(&b))
    });
    let mut prev = f64::NEG_INFINITY;
    for i in order {
        if out[i] <= prev {
            out[i] = prev.next_up();
        }
        prev = out[i];
    }
    out
}

/// `<V, n, b, p>` with a global preference `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingProblem {
    /// Caller's identifier for each node (peer index for overlay-derived problems).
    pub labels: Vec<usize>,
    /// Allowed partners, most preferred first.
    allowed: Vec<Vec<usize>>,
    pub slots: Vec<usize>,
    pub preference: Vec<f64>,
}

impl MatchingProblem {
    pub fn new(preference: Vec<f64>, slots: Vec<usize>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = preference.len();
        Self::with_labels((0..n).collect(), preference, slots, edges)
    }

    pub fn with_labels(
        labels: Vec<usize>,
        preference: Vec<f64>,
        slots: Vec<usize>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = preference.len();
        if slots.len() != n || labels.len() != n {
            return Err(Error::Domain("labels, slots and preferences must have equal length".into()));
        }
        if slots.contains(&0) {
            return Err(Error::Domain("every node needs at least one slot".into()));
        }
        let mut sorted = preference.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.iter().any(|p| !p.is_finite()) || sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("preferences must be finite and pairwise distinct".into()));
        }
        let mut sets = vec![BTreeSet::new(); n];
        for (a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(Error::Domain(format!("bad allowed pair ({a}, {b})")));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        let allowed = sets
            .into_iter()
            .map(|s| {
                let mut v: Vec<usize> = s.into_iter().collect();
                v.sort_by(|&x, &y| preference[y].total_cmp(&preference[x]));
                v
            })
            .collect();
        Ok(MatchingProblem {
            labels,
            allowed,
            slots,
            preference,
        })
    }

    /// Leechers of `t` with their overlay links, `k` slots each.
    /// `preference` is aligned with `t.peers` and must already be tie-broken.
    pub fn from_overlay(t: &TorrentRecord, g: &OverlayGraph, preference: &[f64], k: usize) -> Result<Self> {
        let leechers: Vec<usize> = (0..t.len()).filter(|&i| !t.peers[i].is_seeder()).collect();
        let mut pos = vec![usize::MAX; t.len()];
        for (j, &i) in leechers.iter().enumerate() {
            pos[i] = j;
        }
        let edges: Vec<(usize, usize)> = g
            .edges()
            .filter(|&(a, b)| pos[a] != usize::MAX && pos[b] != usize::MAX)
            .map(|(a, b)| (pos[a], pos[b]))
            .collect();
        let pref = leechers.iter().map(|&i| preference[i]).collect();
        Self::with_labels(leechers.clone(), pref, vec![k; leechers.len()], edges)
    }

    pub fn len(&self) -> usize {
        self.preference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preference.is_empty()
    }

    pub fn allowed(&self, v: usize) -> &[usize] {
        &self.allowed[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.allowed
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.allowed.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Same nodes and preferences, restricted to the edges `keep` accepts.
    pub fn restrict(&self, mut keep: impl FnMut(usize, usize) -> bool) -> MatchingProblem {
        let kept: BTreeSet<(usize, usize)> = self.edges().filter(|&(a, b)| keep(a, b)).collect();
        let allowed = self
            .allowed
            .iter()
            .enumerate()
            .map(|(a, ns)| {
                ns.iter()
                    .copied()
                    .filter(|&b| kept.contains(&(a.min(b), a.max(b))))
                    .collect()
            })
            .collect();
        MatchingProblem {
            labels: self.labels.clone(),
            allowed,
            slots: self.slots.clone(),
            preference: self.preference.clone(),
        }
    }
}

/// Unordered pairs of problem nodes, stored as `(a, b)` with `a < b`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    pub pairs: BTreeSet<(usize, usize)>,
}

impl Matching {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Matching {
            pairs: pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect(),
        }
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a.min(b), a.max(b)))
    }

    pub fn partners(&self, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n];
        for &(a, b) in &self.pairs {
            out[a].push(b);
            out[b].push(a);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs translated to the problem's labels, each as `(low, high)`.
    pub fn labelled(&self, p: &MatchingProblem) -> BTreeSet<(usize, usize)> {
        self.pairs
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (p.labels[a], p.labels[b]);
                (x.min(y), x.max(y))
            })
            .collect()
    }

    /// `peer_a,peer_b` per matched pair.
    pub fn to_csv(&self, p: &MatchingProblem, t: &TorrentRecord) -> String {
        let mut out = String::new();
        for (a, b) in self.labelled(p) {
            let _ = writeln!(out, "{},{},{}", t.torrent_id, t.peers[a].peer_id, t.peers[b].peer_id);
        }
        out
    }
}

/// The unique stable matching.
///
/// Nodes are visited from most to least preferred; each takes its most
/// preferred less-preferred allowed partners that still have a free slot.
/// This processes every edge in decreasing order of (higher endpoint, lower
/// endpoint) preference, which is consistent with every node's ranking.
pub fn solve_bmatching(p: &MatchingProblem) -> Matching {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p.preference[b].total_cmp(&p.preference[a]));
    let mut free = p.slots.clone();
    let mut pairs = BTreeSet::new();
    for v in order {
        if free[v] == 0 {
            continue;
        }
        let ns = &p.allowed[v];
        let start = ns.partition_point(|&u| p.preference[u] > p.preference[v]);
        for &u in &ns[start..] {
            if free[u] > 0 {
                pairs.insert((v.min(u), v.max(u)));
                free[u] -= 1;
                free[v] -= 1;
                if free[v] == 0 {
                    break;
                }
            }
        }
    }
    Matching { pairs }
}

/// Allowed, unmatched pairs where both sides would take the other, either
/// into a free slot or in place of their least preferred partner.
pub fn verify_stability(p: &MatchingProblem, m: &Matching) -> Vec<(usize, usize)> {
    let partners = m.partners(p.len());
    let worst: Vec<f64> = partners
        .iter()
        .map(|ps| ps.iter().map(|&u| p.preference[u]).fold(f64::INFINITY, f64::min))
        .collect();
    let wants = |v: usize, u: usize| partners[v].len() < p.slots[v] || p.preference[u] > worst[v];
    p.edges()
        .filter(|&(a, b)| !m.contains(a, b) && wants(a, b) && wants(b, a))
        .collect()
}

/// Slot and allowed-set constraints hold.
pub fn is_feasible(p: &MatchingProblem, m: &Matching) -> bool {
    let partners = m.partners(p.len());
    partners.iter().enumerate().all(|(v, ps)| ps.len() <= p.slots[v])
        && m.pairs.iter().all(|&(a, b)| p.allowed[a].contains(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(prefs: &[f64], k: usize) -> MatchingProblem {
        let n = prefs.len();
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        MatchingProblem::new(prefs.to_vec(), vec![k; n], edges).unwrap()
    }

    #[test]
    fn six_nodes_k1_pairs_by_rank() {
        let p = complete(&[100.0, 90.0, 80.0, 70.0, 60.0, 50.0], 1);
        let m = solve_bmatching(&p);
        assert_eq!(m, Matching::from_pairs([(0, 1), (2, 3), (4, 5)]));
        assert!(verify_stability(&p, &m).is_empty());
    }

    #[test]
    fn six_nodes_k2_two_triples() {
        let p = complete(&[100.0, 90.0, 80.0, 70.0, 60.0, 50.0], 2);
        let m = solve_bmatching(&p);
        assert_eq!(m, Matching::from_pairs([(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]));
        assert!(verify_stability(&p, &m).is_empty());
        // swap partners across blocks
        let bad = Matching::from_pairs([(0, 1), (0, 3), (1, 2), (2, 4), (3, 5), (4, 5)]);
        assert!(is_feasible(&p, &bad));
        assert!(!verify_stability(&p, &bad).is_empty());
    }

    #[test]
    fn two_nodes() {
        let p = MatchingProblem::new(vec![3.0, 7.0], vec![4, 4], [(0, 1)]).unwrap();
        assert_eq!(solve_bmatching(&p), Matching::from_pairs([(0, 1)]));
    }

    #[test]
    fn empty_matching_is_blocked() {
        let p = MatchingProblem::new(vec![3.0, 7.0, 1.0], vec![1, 1, 1], [(0, 1)]).unwrap();
        assert_eq!(verify_stability(&p, &Matching::default()), vec![(0, 1)]);
    }

    #[test]
    fn rejects_ties_and_zero_slots() {
        assert!(MatchingProblem::new(vec![1.0, 1.0], vec![1, 1], []).is_err());
        assert!(MatchingProblem::new(vec![1.0, 2.0], vec![0, 1], []).is_err());
        assert!(MatchingProblem::new(vec![1.0, 2.0], vec![1, 1], [(1, 1)]).is_err());
    }

    #[test]
    fn tiebreak_contracts() {
        let distinct = [5.0, 1.0, 3.0, 3.0000001, 2.0];
        let out = tiebreak_speeds(&distinct, 1e-9, 11);
        let mut a: Vec<usize> = (0..5).collect();
        let mut b = a.clone();
        a.sort_by(|&x, &y| distinct[x].total_cmp(&distinct[y]));
        b.sort_by(|&x, &y| out[x].total_cmp(&out[y]));
        assert_eq!(a, b);

        let equal = [250.0, 250.0];
        let out = tiebreak_speeds(&equal, 1e-9, 0);
        assert_ne!(out[0], out[1]);

        let many = vec![1000.0; 10_000];
        let out = tiebreak_speeds(&many, 1e-9, 3);
        let mut s = out.clone();
        s.sort_by(f64::total_cmp);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(out.iter().all(|v| (v - 1000.0).abs() / 1000.0 < 1e-9));
        assert_eq!(out, tiebreak_speeds(&many, 1e-9, 3));
    }
}
