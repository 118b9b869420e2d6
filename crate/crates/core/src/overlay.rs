//! Overlay construction: Random and the `Locality(delta, mu)` family.
//!
//! Every node first draws `min(W, |V(T)|-1)` random neighbors from a stream
//! keyed by the torrent only, so all policies start from the same draw.
//! Family members then filter each node's draw against its own ISP's peers:
//!
//! * while the node has more than `mu` remotes, the slowest remote is
//!   replaced by the fastest unused local, or dropped if none is left;
//! * afterwards a remote `u` is replaced by the fastest unused local `w`
//!   only if `1 - U(w)/U(u) < delta`.
//!
//! Adjacency is the union of the filtered draws. A node receiving an
//! unsolicited connection from a remote peer applies its own policy to it:
//! it refuses when it already holds `mu` remotes or when one of its locals
//! passes the `delta` test against the caller. The `mu` cap is enforced
//! once more on the final graph, pruning slowest remotes first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use rand::seq::index;

use crate::datamodel::TorrentRecord;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RemoteCap {
    Bounded(usize),
    Unbounded,
}

impl RemoteCap {
    fn allows(self, n: usize) -> bool {
        match self {
            RemoteCap::Bounded(mu) => n <= mu,
            RemoteCap::Unbounded => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OverlayPolicy {
    Random,
    Family { delta: f64, mu: RemoteCap },
}

impl OverlayPolicy {
    pub fn family(delta: f64, mu: RemoteCap) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Domain(format!("delta must lie in [0,1], got {delta}")));
        }
        Ok(OverlayPolicy::Family { delta, mu })
    }

    /// Local Only If Faster: delta = 0, no remote cap.
    pub fn loif() -> Self {
        OverlayPolicy::Family {
            delta: 0.0,
            mu: RemoteCap::Unbounded,
        }
    }

    pub fn locality() -> Self {
        OverlayPolicy::Family {
            delta: 1.0,
            mu: RemoteCap::Unbounded,
        }
    }

    pub fn strict(mu: usize) -> Self {
        OverlayPolicy::Family {
            delta: 1.0,
            mu: RemoteCap::Bounded(mu),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, OverlayPolicy::Random)
    }

    /// Accepts `random`, `loif`, `locality`, `strict`, `strict:<mu>` and
    /// `family:<delta>:<mu|inf>`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("unknown policy `{s}`"));
        let cap = |t: &str| -> Result<RemoteCap> {
            if t == "inf" || t == "unbounded" {
                Ok(RemoteCap::Unbounded)
            } else {
                t.parse().map(RemoteCap::Bounded).map_err(|_| bad())
            }
        };
        match parts.as_slice() {
            ["random"] => Ok(OverlayPolicy::Random),
            ["loif"] => Ok(Self::loif()),
            ["locality"] => Ok(Self::locality()),
            ["strict"] => Ok(Self::strict(1)),
            ["strict", mu] => Ok(Self::strict(mu.parse().map_err(|_| bad())?)),
            ["family", d, mu] => Self::family(d.parse().map_err(|_| bad())?, cap(mu)?),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for OverlayPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            OverlayPolicy::Random => f.write_str("random"),
            p if p == Self::loif() => f.write_str("loif"),
            p if p == Self::locality() => f.write_str("locality"),
            p if p == Self::strict(1) => f.write_str("strict"),
            OverlayPolicy::Family {
                delta: 1.0,
                mu: RemoteCap::Bounded(mu),
            } => write!(f, "strict:{mu}"),
            OverlayPolicy::Family { delta, mu } => match mu {
                RemoteCap::Unbounded => write!(f, "family:{delta}:inf"),
                RemoteCap::Bounded(m) => write!(f, "family:{delta}:{m}"),
            },
        }
    }
}

/// Routing class of a link, seen from its endpoints' ISPs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    Internal,
    Peering,
    Transit,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Internal => "internal",
            Scope::Peering => "peering",
            Scope::Transit => "transit",
        }
    }

    /// Same ISP is internal, same country peering, anything else transit.
    pub fn between(isp_a: &str, country_a: &str, isp_b: &str, country_b: &str) -> Scope {
        if isp_a == isp_b {
            Scope::Internal
        } else if country_a == country_b {
            Scope::Peering
        } else {
            Scope::Transit
        }
    }
}

/// Undirected neighbor relation over a torrent's peers (by canonical index).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlayGraph {
    pub torrent_id: String,
    adjacency: Vec<BTreeSet<usize>>,
    scopes: Option<BTreeMap<(usize, usize), Scope>>,
    /// Set when the torrent has a single peer and the graph is empty.
    pub singleton: bool,
}

impl OverlayGraph {
    fn empty(torrent_id: &str, n: usize) -> Self {
        OverlayGraph {
            torrent_id: torrent_id.to_string(),
            adjacency: vec![BTreeSet::new(); n],
            scopes: None,
            singleton: n < 2,
        }
    }

    pub fn from_edges(torrent_id: &str, n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Self::empty(torrent_id, n);
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    fn add_edge(&mut self, a: usize, b: usize) -> bool {
        assert_ne!(a, b, "self edge");
        let fresh = self.adjacency[a].insert(b);
        self.adjacency[b].insert(a);
        fresh
    }

    fn remove_edge(&mut self, a: usize, b: usize) {
        self.adjacency[a].remove(&b);
        self.adjacency[b].remove(&a);
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(&b)
    }

    /// Each edge once, as `(a, b)` with `a < b`, in order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.range(a + 1..).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn scope(&self, a: usize, b: usize) -> Option<Scope> {
        self.scopes.as_ref()?.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn is_classified(&self) -> bool {
        self.scopes.is_some()
    }

    /// Count of classified edges per scope.
    pub fn scope_counts(&self) -> BTreeMap<Scope, usize> {
        let mut m = BTreeMap::new();
        for s in self.scopes.iter().flat_map(|s| s.values()) {
            *m.entry(*s).or_insert(0) += 1;
        }
        m
    }

    /// Edges of the given scope touching a peer of `isp`.
    pub fn edges_of_isp(&self, t: &TorrentRecord, isp: &str, scope: Scope) -> usize {
        self.edges()
            .filter(|&(a, b)| t.peers[a].isp_id == isp || t.peers[b].isp_id == isp)
            .filter(|&(a, b)| self.scope(a, b) == Some(scope))
            .count()
    }

    /// Neighbors of `v` outside its ISP.
    pub fn remote_degree(&self, t: &TorrentRecord, v: usize) -> usize {
        let isp = &t.peers[v].isp_id;
        self.adjacency[v].iter().filter(|&&u| &t.peers[u].isp_id != isp).count()
    }

    /// Edge list CSV: `torrent_id,peer_a,peer_b,scope`.
    pub fn to_csv(&self, t: &TorrentRecord) -> String {
        let mut out = String::new();
        for (a, b) in self.edges() {
            let scope = self.scope(a, b).map_or("", Scope::as_str);
            let _ = writeln!(out, "{},{},{},{}", self.torrent_id, t.peers[a].peer_id, t.peers[b].peer_id, scope);
        }
        out
    }
}

/// Per-node random draws of `min(W, |V(T)|-1)` distinct other peers.
pub fn random_selections(t: &TorrentRecord, neighborhood: usize, seed: u64) -> Vec<Vec<usize>> {
    let n = t.len();
    if n < 2 {
        return vec![Vec::new(); n];
    }
    let draws = neighborhood.min(n - 1);
    let mut rng = seed::rng(seed, &["neighbors", &t.torrent_id]);
    (0..n)
        .map(|v| {
            index::sample(&mut rng, n - 1, draws)
                .into_iter()
                .map(|i| if i >= v { i + 1 } else { i })
                .collect()
        })
        .collect()
}

pub fn build_random(t: &TorrentRecord, neighborhood: usize, seed: u64) -> OverlayGraph {
    let sel = random_selections(t, neighborhood, seed);
    let mut g = OverlayGraph::empty(&t.torrent_id, t.len());
    for (v, ns) in sel.iter().enumerate() {
        for &u in ns {
            g.add_edge(v, u);
        }
    }
    g
}

/// Builds the overlay for any policy; `speeds` is aligned with `t.peers`.
pub fn build(t: &TorrentRecord, policy: OverlayPolicy, speeds: &[f64], neighborhood: usize, seed: u64) -> Result<OverlayGraph> {
    match policy {
        OverlayPolicy::Random => Ok(build_random(t, neighborhood, seed)),
        OverlayPolicy::Family { delta, mu } => build_family(t, delta, mu, speeds, neighborhood, seed),
    }
}

/// Slowest first, index as tie-break.
fn by_speed_asc(speeds: &[f64]) -> impl Fn(&usize, &usize) -> std::cmp::Ordering + '_ {
    move |&a, &b| speeds[a].total_cmp(&speeds[b]).then(a.cmp(&b))
}

fn filter_node(
    v: usize,
    draw: &[usize],
    local: &[usize],
    same_isp: impl Fn(usize) -> bool,
    speeds: &[f64],
    delta: f64,
    mu: RemoteCap,
) -> Vec<usize> {
    let in_draw: BTreeSet<usize> = draw.iter().copied().collect();
    // fastest unused local first
    let mut unused: Vec<usize> = local.iter().copied().filter(|w| *w != v && !in_draw.contains(w)).collect();
    unused.sort_by(|a, b| by_speed_asc(speeds)(b, a));
    let mut unused = unused.into_iter().peekable();

    let mut kept: Vec<usize> = draw.iter().copied().filter(|&u| same_isp(u)).collect();
    let mut remotes: Vec<usize> = draw.iter().copied().filter(|&u| !same_isp(u)).collect();
    remotes.sort_by(by_speed_asc(speeds));
    let mut remotes = std::collections::VecDeque::from(remotes);

    while !mu.allows(remotes.len()) {
        remotes.pop_front();
        if let Some(w) = unused.next() {
            kept.push(w);
        }
    }
    let mut retained = Vec::new();
    while let Some(u) = remotes.pop_front() {
        match unused.peek() {
            // the fastest local failing against the slowest remaining remote
            // fails against every faster remote too
            Some(&w) if 1.0 - speeds[w] / speeds[u] < delta => {
                kept.push(w);
                unused.next();
            }
            _ => {
                retained.push(u);
                retained.extend(remotes.drain(..));
            }
        }
    }
    kept.extend(retained);
    kept
}

pub fn build_family(
    t: &TorrentRecord,
    delta: f64,
    mu: RemoteCap,
    speeds: &[f64],
    neighborhood: usize,
    seed: u64,
) -> Result<OverlayGraph> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!("delta must lie in [0,1], got {delta}")));
    }
    if speeds.len() != t.len() || speeds.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Domain("speeds must be positive and match the peer count".into()));
    }
    let n = t.len();
    let isp: Vec<&str> = t.peers.iter().map(|p| p.isp_id.as_str()).collect();
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, a) in isp.iter().enumerate() {
        members.entry(a).or_default().push(i);
    }
    let draws = random_selections(t, neighborhood, seed);
    let filtered: Vec<Vec<usize>> = (0..n)
        .map(|v| filter_node(v, &draws[v], &members[isp[v]], |u| isp[u] == isp[v], speeds, delta, mu))
        .collect();
    let chose: Vec<BTreeSet<usize>> = filtered.iter().map(|f| f.iter().copied().collect()).collect();

    // fastest other local per node, for the delta test on incoming remotes
    let best_local: Vec<Option<f64>> = (0..n)
        .map(|v| {
            members[isp[v]]
                .iter()
                .filter(|&&w| w != v)
                .map(|&w| speeds[w])
                .max_by(f64::total_cmp)
        })
        .collect();

    let mut g = OverlayGraph::empty(&t.torrent_id, n);
    let mut remote_deg = vec![0usize; n];
    for v in 0..n {
        for &u in &filtered[v] {
            let remote = isp[u] != isp[v];
            if (!remote || chose[u].contains(&v)) && g.add_edge(v, u) && remote {
                remote_deg[v] += 1;
                remote_deg[u] += 1;
            }
        }
    }
    let refuses = |receiver: usize, caller: usize, remote_deg: &[usize]| {
        !mu.allows(remote_deg[receiver] + 1)
            || best_local[receiver].is_some_and(|w| 1.0 - w / speeds[caller] < delta)
    };
    for v in 0..n {
        for &u in &filtered[v] {
            if isp[u] == isp[v] || g.has_edge(v, u) {
                continue;
            }
            if !mu.allows(remote_deg[v] + 1) || refuses(u, v, &remote_deg) {
                continue;
            }
            g.add_edge(v, u);
            remote_deg[v] += 1;
            remote_deg[u] += 1;
        }
    }

    enforce_cap(&mut g, &isp, speeds, mu);

    // a node left without any link falls back to the first peer that fits
    // under both caps, trying its own draw first
    for v in 0..n {
        if n < 2 || g.degree(v) > 0 {
            continue;
        }
        let candidates = draws[v].iter().copied().chain((0..n).filter(|&u| u != v));
        for u in candidates {
            let remote = isp[u] != isp[v];
            let deg = |x: usize| g.neighbors(x).iter().filter(|&&y| isp[y] != isp[x]).count();
            if !remote || (mu.allows(deg(v) + 1) && mu.allows(deg(u) + 1)) {
                g.add_edge(v, u);
                break;
            }
        }
    }
    Ok(g)
}

fn enforce_cap(g: &mut OverlayGraph, isp: &[&str], speeds: &[f64], mu: RemoteCap) {
    let RemoteCap::Bounded(cap) = mu else { return };
    for v in 0..g.node_count() {
        let mut remotes: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| isp[u] != isp[v]).collect();
        if remotes.len() <= cap {
            continue;
        }
        remotes.sort_by(by_speed_asc(speeds));
        let excess = remotes.len() - cap;
        for &u in &remotes[..excess] {
            g.remove_edge(v, u);
        }
    }
}

/// Tag every edge with its routing scope. `geo` maps ISP to country; peers
/// whose ISP is missing fall back to their own country label.
pub fn classify_edges(g: &OverlayGraph, t: &TorrentRecord, geo: &BTreeMap<String, String>) -> OverlayGraph {
    let country = |i: usize| {
        let p = &t.peers[i];
        geo.get(&p.isp_id).map_or(p.country_code.as_str(), String::as_str)
    };
    let scopes = g
        .edges()
        .map(|(a, b)| {
            let s = Scope::between(&t.peers[a].isp_id, country(a), &t.peers[b].isp_id, country(b));
            ((a, b), s)
        })
        .collect();
    OverlayGraph {
        scopes: Some(scopes),
        ..g.clone()
    }
}
