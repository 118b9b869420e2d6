//! Rate matrices, scope aggregation, and the transit / QoS metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datamodel::TorrentRecord;
use crate::error::{Error, Result};
use crate::matching::{solve_bmatching, Matching, MatchingProblem};
use crate::overlay::{OverlayGraph, Scope};

/// Directed rates of one torrent, keyed by `(from, to)` peer index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateMatrix {
    entries: BTreeMap<(usize, usize), f64>,
}

impl RateMatrix {
    pub fn add(&mut self, from: usize, to: usize, kbps: f64) {
        if kbps > 0.0 {
            *self.entries.entry((from, to)).or_insert(0.0) += kbps;
        }
    }

    pub fn merge(&mut self, other: &RateMatrix) {
        for (&(a, b), &r) in &other.entries {
            self.add(a, b, r);
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.entries.get(&(from, to)).copied().unwrap_or(0.0)
    }

    pub fn outgoing(&self, v: usize) -> f64 {
        self.entries
            .range((v, 0)..=(v, usize::MAX))
            .map(|(_, r)| r)
            .sum()
    }

    pub fn incoming(&self, v: usize) -> f64 {
        self.entries.iter().filter(|((_, b), _)| *b == v).map(|(_, r)| r).sum()
    }

    /// Incoming total for every peer index below `n`.
    pub fn incoming_all(&self, n: usize) -> Vec<f64> {
        let mut inc = vec![0.0; n];
        for (&(_, b), &r) in &self.entries {
            inc[b] += r;
        }
        inc
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeederPolicy {
    Uniform,
    #[default]
    Proportional,
}

fn leecher_neighbors(t: &TorrentRecord, g: &OverlayGraph, v: usize) -> Vec<usize> {
    g.neighbors(v).iter().copied().filter(|&u| !t.peers[u].is_seeder()).collect()
}

/// Leecher uploads: `U/(k+1)` to each matched partner, and the optimistic
/// pool `(k - m + 1) U/(k+1)` spread evenly over choked leecher neighbors
/// (over the matched ones when nobody is choked).
pub fn leecher_rates(t: &TorrentRecord, g: &OverlayGraph, p: &MatchingProblem, m: &Matching, speeds: &[f64], k: usize) -> RateMatrix {
    let mut matched: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (a, b) in m.labelled(p) {
        matched.entry(a).or_default().insert(b);
        matched.entry(b).or_default().insert(a);
    }
    let none = BTreeSet::new();
    let mut out = RateMatrix::default();
    let share = 1.0 / (k as f64 + 1.0);
    for v in (0..t.len()).filter(|&v| !t.peers[v].is_seeder()) {
        let recipients = leecher_neighbors(t, g, v);
        if recipients.is_empty() {
            continue;
        }
        let mv = matched.get(&v).unwrap_or(&none);
        let u = speeds[v];
        for &w in mv {
            out.add(v, w, u * share);
        }
        let pool = (k - mv.len().min(k) + 1) as f64 * u * share;
        let choked: Vec<usize> = recipients.iter().copied().filter(|w| !mv.contains(w)).collect();
        let targets: Vec<usize> = if choked.is_empty() { mv.iter().copied().collect() } else { choked };
        let each = pool / targets.len() as f64;
        for w in targets {
            out.add(v, w, each);
        }
    }
    out
}

/// Seeder uploads over leecher neighbors; returns the matrix and the seeders
/// that had nobody to serve.
pub fn seeder_rates(t: &TorrentRecord, g: &OverlayGraph, speeds: &[f64], policy: SeederPolicy) -> (RateMatrix, Vec<usize>) {
    let mut out = RateMatrix::default();
    let mut idle = Vec::new();
    for s in (0..t.len()).filter(|&s| t.peers[s].is_seeder()) {
        let ns = leecher_neighbors(t, g, s);
        if ns.is_empty() {
            idle.push(s);
            continue;
        }
        match policy {
            SeederPolicy::Uniform => {
                let each = speeds[s] / ns.len() as f64;
                ns.iter().for_each(|&u| out.add(s, u, each));
            }
            SeederPolicy::Proportional => {
                let total: f64 = ns.iter().map(|&u| speeds[u]).sum();
                ns.iter().for_each(|&u| out.add(s, u, speeds[s] * speeds[u] / total));
            }
        }
    }
    (out, idle)
}

/// Everything computed for one torrent under one overlay.
#[derive(Clone, Debug, PartialEq)]
pub struct TorrentTraffic {
    pub matrix: RateMatrix,
    pub problem: MatchingProblem,
    pub matching: Matching,
    pub idle_seeders: Vec<usize>,
}

/// Solve the leecher b-matching on `g` and add leecher and seeder rates.
/// `preference` must be the tie-broken version of `speeds`.
pub fn torrent_matrix(
    t: &TorrentRecord,
    g: &OverlayGraph,
    speeds: &[f64],
    preference: &[f64],
    k: usize,
    seeder_policy: SeederPolicy,
) -> Result<TorrentTraffic> {
    let problem = MatchingProblem::from_overlay(t, g, preference, k)?;
    let matching = solve_bmatching(&problem);
    let mut matrix = leecher_rates(t, g, &problem, &matching, speeds, k);
    let (seeds, idle_seeders) = seeder_rates(t, g, speeds, seeder_policy);
    matrix.merge(&seeds);
    Ok(TorrentTraffic {
        matrix,
        problem,
        matching,
        idle_seeders,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScopeTotals {
    pub internal: f64,
    pub peering: f64,
    pub transit: f64,
}

impl ScopeTotals {
    fn add(&mut self, s: Scope, r: f64) {
        match s {
            Scope::Internal => self.internal += r,
            Scope::Peering => self.peering += r,
            Scope::Transit => self.transit += r,
        }
    }

    pub fn total(&self) -> f64 {
        self.internal + self.peering + self.transit
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorrentBreakdown {
    pub torrent_id: String,
    /// |V(A,T)|
    pub local_nodes: usize,
    pub totals: ScopeTotals,
}

/// Traffic touching one home ISP, over all its torrents.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficReport {
    pub isp_id: String,
    pub totals: ScopeTotals,
    /// Download rate of every home-ISP leecher, torrent by torrent.
    pub leecher_downloads: Vec<f64>,
    pub torrents: Vec<TorrentBreakdown>,
}

/// Accumulate every directed rate with at least one endpoint in `home_isp`:
/// both endpoints home is internal, otherwise the remote end's country
/// decides between peering and transit. Both directions count.
pub fn aggregate<'a>(
    parts: impl IntoIterator<Item = (&'a TorrentRecord, &'a RateMatrix)>,
    home_isp: &str,
    geo: &'a BTreeMap<String, String>,
) -> Result<TrafficReport> {
    let home_country = geo
        .get(home_isp)
        .ok_or_else(|| Error::UnknownIsp(home_isp.to_string()))?;
    let country = |t: &'a TorrentRecord, i: usize| -> &'a str {
        let p = &t.peers[i];
        geo.get(&p.isp_id).map_or(p.country_code.as_str(), String::as_str)
    };
    let mut rep = TrafficReport {
        isp_id: home_isp.to_string(),
        totals: ScopeTotals::default(),
        leecher_downloads: Vec::new(),
        torrents: Vec::new(),
    };
    for (t, mat) in parts {
        let is_home = |i: usize| t.peers[i].isp_id == home_isp;
        let mut tot = ScopeTotals::default();
        for ((a, b), r) in mat.entries() {
            let remote = match (is_home(a), is_home(b)) {
                (true, true) => {
                    tot.add(Scope::Internal, r);
                    continue;
                }
                (true, false) => b,
                (false, true) => a,
                (false, false) => continue,
            };
            let p = &t.peers[remote];
            tot.add(Scope::between(home_isp, home_country, &p.isp_id, country(t, remote)), r);
        }
        let inc = mat.incoming_all(t.len());
        rep.leecher_downloads.extend(
            (0..t.len())
                .filter(|&i| is_home(i) && !t.peers[i].is_seeder())
                .map(|i| inc[i]),
        );
        rep.totals.internal += tot.internal;
        rep.totals.peering += tot.peering;
        rep.totals.transit += tot.transit;
        rep.torrents.push(TorrentBreakdown {
            torrent_id: t.torrent_id.clone(),
            local_nodes: t.local_count(home_isp),
            totals: tot,
        });
    }
    Ok(rep)
}

/// A ratio that may be undefined because its baseline is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    Value(f64),
    Undefined,
}

impl Metric {
    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Value(v) => Some(v),
            Metric::Undefined => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Value(v) => write!(f, "{v:.6}"),
            Metric::Undefined => f.write_str("NA"),
        }
    }
}

/// (transit under Random - transit under policy) / transit under Random.
pub fn transit_reduction(policy: &TrafficReport, random: &TrafficReport) -> Metric {
    relative_drop(random.totals.transit, policy.totals.transit)
}

fn relative_drop(base: f64, other: f64) -> Metric {
    if base > 0.0 {
        Metric::Value((base - other) / base)
    } else {
        Metric::Undefined
    }
}

/// Nearest-rank percentile (`pct` in (0, 100]) of unsorted values.
pub fn percentile(values: &[f64], pct: f64) -> Option<f64> {
    if values.is_empty() || !(pct > 0.0 && pct <= 100.0) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

/// (q_x(Random) - q_x(policy)) / q_x(Random) on leecher download rates.
/// Negative values mean the policy speeds users up.
pub fn qos_reduction(policy: &[f64], random: &[f64], pct: f64) -> Metric {
    match (percentile(random, pct), percentile(policy, pct)) {
        (Some(r), Some(p)) => relative_drop(r, p),
        _ => Metric::Undefined,
    }
}

/// Cumulative transit share against cumulative share of home-ISP nodes, with
/// torrents taken in decreasing order of transit.
#[derive(Clone, Debug, PartialEq)]
pub struct Unlocalizable {
    /// `(node_share, transit_share)` after each torrent.
    pub curve: Vec<(f64, f64)>,
    /// Transit share actually reached at the threshold point.
    pub transit_share: f64,
    /// Node share needed to account for the threshold share of transit.
    pub node_share: Option<f64>,
}

pub fn unlocalizable_analysis(report: &TrafficReport, threshold: f64) -> Unlocalizable {
    let mut ts: Vec<&TorrentBreakdown> = report.torrents.iter().collect();
    ts.sort_by(|a, b| {
        b.totals
            .transit
            .total_cmp(&a.totals.transit)
            .then_with(|| a.torrent_id.cmp(&b.torrent_id))
    });
    let nodes: usize = ts.iter().map(|t| t.local_nodes).sum();
    let transit: f64 = ts.iter().map(|t| t.totals.transit).sum();
    let mut curve = Vec::with_capacity(ts.len());
    let (mut n_acc, mut t_acc) = (0usize, 0.0);
    let mut hit = None;
    for t in ts {
        n_acc += t.local_nodes;
        t_acc += t.totals.transit;
        let point = (
            if nodes > 0 { n_acc as f64 / nodes as f64 } else { 0.0 },
            if transit > 0.0 { t_acc / transit } else { 0.0 },
        );
        if hit.is_none() && transit > 0.0 && point.1 >= threshold {
            hit = Some(point);
        }
        curve.push(point);
    }
    Unlocalizable {
        curve,
        transit_share: hit.map_or(0.0, |p| p.1),
        node_share: hit.map(|p| p.0),
    }
}
