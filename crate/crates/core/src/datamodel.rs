//! Domain records, dataset ingestion, synthetic workloads and seeder roles.
//!
//! Peers are always kept in canonical order (lexicographic by `peer_id`)
//! inside a torrent, and torrents in lexicographic order of `torrent_id`, so
//! every downstream computation is independent of input ordering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Seeder,
    Leecher,
}

impl Role {
    fn token(self) -> &'static str {
        match self {
            Role::Seeder => "seeder",
            Role::Leecher => "leecher",
        }
    }

    fn parse(tok: &str) -> Option<Self> {
        match tok.to_ascii_lowercase().as_str() {
            "s" | "seed" | "seeder" => Some(Role::Seeder),
            "l" | "leech" | "leecher" => Some(Role::Leecher),
            _ => None,
        }
    }
}

/// One client of one torrent.
///
/// Uplink speeds are resolved through a [`SpeedModel`] and completion levels
/// live in [`crate::matching::CompletionState`], so a peer only carries its
/// labels and role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Peer {
    pub peer_id: String,
    pub isp_id: String,
    pub country_code: String,
    /// `None` until roles are assigned.
    pub role: Option<Role>,
}

impl Peer {
    pub fn new(peer_id: impl Into<String>, isp_id: impl Into<String>, country: impl Into<String>) -> Self {
        Peer {
            peer_id: peer_id.into(),
            isp_id: isp_id.into(),
            country_code: country.into(),
            role: None,
        }
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = Some(role);
        self
    }

    /// Unassigned peers behave as leechers.
    pub fn is_seeder(&self) -> bool {
        self.role == Some(Role::Seeder)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorrentRecord {
    pub torrent_id: String,
    pub peers: Vec<Peer>,
    pub seeder_count: usize,
    pub leecher_count: usize,
}

impl TorrentRecord {
    /// Sorts peers canonically and rejects empty torrents and duplicate peers.
    pub fn new(torrent_id: impl Into<String>, mut peers: Vec<Peer>) -> Result<Self> {
        let torrent_id = torrent_id.into();
        if peers.is_empty() {
            return Err(Error::Validation(format!("torrent `{torrent_id}` has no peers")));
        }
        peers.sort_by(|a, b| a.peer_id.cmp(&b.peer_id));
        if let Some(w) = peers.windows(2).find(|w| w[0].peer_id == w[1].peer_id) {
            return Err(Error::Validation(format!(
                "duplicate peer `{}` in torrent `{torrent_id}`",
                w[0].peer_id
            )));
        }
        let mut t = TorrentRecord {
            torrent_id,
            peers,
            seeder_count: 0,
            leecher_count: 0,
        };
        t.recount();
        Ok(t)
    }

    fn recount(&mut self) {
        self.seeder_count = self.peers.iter().filter(|p| p.role == Some(Role::Seeder)).count();
        self.leecher_count = self.peers.iter().filter(|p| p.role == Some(Role::Leecher)).count();
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    /// |V(A,T)|
    pub fn local_count(&self, isp: &str) -> usize {
        self.peers.iter().filter(|p| p.isp_id == isp).count()
    }

    /// Peer count per ISP present in the torrent.
    pub fn isp_counts(&self) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for p in &self.peers {
            *m.entry(p.isp_id.as_str()).or_insert(0) += 1;
        }
        m
    }
}

/// ISP id to per-torrent local peer counts.
pub type IspIndex = BTreeMap<String, BTreeMap<String, usize>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    torrents: Vec<TorrentRecord>,
    isp_index: IspIndex,
    isp_country: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(mut torrents: Vec<TorrentRecord>) -> Result<Self> {
        torrents.sort_by(|a, b| a.torrent_id.cmp(&b.torrent_id));
        if let Some(w) = torrents.windows(2).find(|w| w[0].torrent_id == w[1].torrent_id) {
            return Err(Error::Validation(format!("duplicate torrent `{}`", w[0].torrent_id)));
        }
        let mut isp_country = BTreeMap::new();
        for t in &torrents {
            if t.peers.is_empty() {
                return Err(Error::Validation(format!("torrent `{}` has no peers", t.torrent_id)));
            }
            for p in &t.peers {
                let c = isp_country.entry(p.isp_id.clone()).or_insert_with(|| p.country_code.clone());
                if *c != p.country_code {
                    return Err(Error::Validation(format!(
                        "isp `{}` labelled with countries `{c}` and `{}`",
                        p.isp_id, p.country_code
                    )));
                }
            }
        }
        let isp_index = build_index(&torrents);
        Ok(Dataset {
            torrents,
            isp_index,
            isp_country,
        })
    }

    pub fn torrents(&self) -> &[TorrentRecord] {
        &self.torrents
    }

    pub fn torrent(&self, id: &str) -> Option<&TorrentRecord> {
        self.torrents
            .binary_search_by(|t| t.torrent_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.torrents[i])
    }

    pub fn isp_index(&self) -> &IspIndex {
        &self.isp_index
    }

    /// Recompute the index from the torrents (used to check consistency).
    pub fn rebuild_index(&self) -> IspIndex {
        build_index(&self.torrents)
    }

    pub fn isps(&self) -> impl Iterator<Item = &str> {
        self.isp_index.keys().map(String::as_str)
    }

    pub fn contains_isp(&self, isp: &str) -> bool {
        self.isp_index.contains_key(isp)
    }

    /// T(A) with the local counts |V(A,T)|, in torrent order.
    pub fn torrents_of<'a>(&'a self, isp: &str) -> impl Iterator<Item = (&'a TorrentRecord, usize)> + 'a {
        let counts = self.isp_index.get(isp);
        self.torrents.iter().filter_map(move |t| {
            counts
                .and_then(|c| c.get(&t.torrent_id))
                .map(|&n| (t, n))
        })
    }

    /// |V(A)|
    pub fn isp_population(&self, isp: &str) -> usize {
        self.isp_index.get(isp).map_or(0, |m| m.values().sum())
    }

    pub fn country_of(&self, isp: &str) -> Option<&str> {
        self.isp_country.get(isp).map(String::as_str)
    }

    pub fn geo(&self) -> &BTreeMap<String, String> {
        &self.isp_country
    }

    pub fn peer_count(&self) -> usize {
        self.torrents.iter().map(TorrentRecord::len).sum()
    }
}

fn build_index(torrents: &[TorrentRecord]) -> IspIndex {
    let mut idx: IspIndex = BTreeMap::new();
    for t in torrents {
        for (isp, n) in t.isp_counts() {
            idx.entry(isp.to_string()).or_default().insert(t.torrent_id.clone(), n);
        }
    }
    idx
}

/// Per-ISP median uplinks with optional per-peer overrides, in kbps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpeedModel {
    pub per_isp_median_kbps: BTreeMap<String, f64>,
    pub per_peer_kbps: Option<BTreeMap<String, f64>>,
}

impl SpeedModel {
    pub fn from_isp_medians(m: BTreeMap<String, f64>) -> Result<Self> {
        let s = SpeedModel {
            per_isp_median_kbps: m,
            per_peer_kbps: None,
        };
        s.check_positive()?;
        Ok(s)
    }

    pub fn with_peer_speeds(mut self, m: BTreeMap<String, f64>) -> Result<Self> {
        self.per_peer_kbps = Some(m);
        self.check_positive()?;
        Ok(self)
    }

    fn check_positive(&self) -> Result<()> {
        let all = self
            .per_isp_median_kbps
            .iter()
            .chain(self.per_peer_kbps.iter().flatten());
        for (k, &v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("speed for `{k}` must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn isp_speed(&self, isp: &str) -> Option<f64> {
        self.per_isp_median_kbps.get(isp).copied()
    }

    /// Per-peer value when present, else the ISP median.
    pub fn peer_speed(&self, p: &Peer) -> Result<f64> {
        if let Some(v) = self.per_peer_kbps.as_ref().and_then(|m| m.get(&p.peer_id)) {
            return Ok(*v);
        }
        self.isp_speed(&p.isp_id)
            .ok_or_else(|| Error::MissingSpeeds(vec![p.isp_id.clone()]))
    }

    pub fn torrent_speeds(&self, t: &TorrentRecord) -> Result<Vec<f64>> {
        t.peers.iter().map(|p| self.peer_speed(p)).collect()
    }

    /// Fails listing every ISP of `d` that has no median speed.
    pub fn check_covers(&self, d: &Dataset) -> Result<()> {
        let missing: Vec<String> = d
            .isps()
            .filter(|isp| !self.per_isp_median_kbps.contains_key(*isp))
            .map(str::to_string)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingSpeeds(missing))
        }
    }
}

/// Chunk, unchoke and neighborhood parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkParams {
    /// C
    pub total_chunks: u64,
    /// sigma, bytes
    pub chunk_size_bytes: u64,
    /// T, seconds
    pub unchoke_interval_sec: f64,
    /// k
    pub regular_slots: usize,
    /// W
    pub neighborhood: usize,
}

impl Default for ChunkParams {
    fn default() -> Self {
        ChunkParams {
            total_chunks: 10_000,
            chunk_size_bytes: 32 * 1024,
            unchoke_interval_sec: 10.0,
            regular_slots: 4,
            neighborhood: 40,
        }
    }
}

impl ChunkParams {
    pub fn validate(&self) -> Result<()> {
        if self.total_chunks == 0 || self.chunk_size_bytes == 0 || self.regular_slots == 0 {
            return Err(Error::Validation("C, sigma and k must be positive".into()));
        }
        if !(self.unchoke_interval_sec > 0.0) {
            return Err(Error::Validation("unchoke interval must be positive".into()));
        }
        if self.neighborhood <= self.regular_slots {
            return Err(Error::Validation(format!(
                "neighborhood W={} must exceed k={}",
                self.neighborhood, self.regular_slots
            )));
        }
        Ok(())
    }

    /// Chunks a node of uplink `kbps` can push through one regular slot
    /// during one unchoke interval: T*U/(sigma*k).
    pub fn slot_budget_chunks(&self, kbps: f64) -> f64 {
        let bytes_per_sec = kbps * 1000.0 / 8.0;
        self.unchoke_interval_sec * bytes_per_sec / (self.chunk_size_bytes as f64 * self.regular_slots as f64)
    }
}

// ---------------------------------------------------------------------------
// File formats

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            None
        } else {
            Some((i + 1, line.split(',').map(str::trim).collect()))
        }
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parse demographics records: `torrent_id, peer_id, isp_id, country_code[, role]`.
pub fn parse_demographics(text: &str, source: &str) -> Result<Dataset> {
    let mut by_torrent: BTreeMap<String, Vec<Peer>> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut isp_country: BTreeMap<String, String> = BTreeMap::new();
    for (line, f) in data_lines(text) {
        if f.len() < 4 || f.len() > 5 {
            return Err(parse_err(source, line, format!("expected 4 or 5 fields, found {}", f.len())));
        }
        if f[..4].iter().any(|s| s.is_empty()) {
            return Err(parse_err(source, line, "empty field"));
        }
        let role = match f.get(4) {
            None | Some(&"") => None,
            Some(tok) => Some(
                Role::parse(tok).ok_or_else(|| parse_err(source, line, format!("unknown role `{tok}`")))?,
            ),
        };
        if !seen.insert((f[0].to_string(), f[1].to_string())) {
            return Err(parse_err(
                source,
                line,
                format!("duplicate peer `{}` in torrent `{}`", f[1], f[0]),
            ));
        }
        let c = isp_country.entry(f[2].to_string()).or_insert_with(|| f[3].to_string());
        if c != f[3] {
            return Err(parse_err(
                source,
                line,
                format!("isp `{}` already labelled with country `{c}`", f[2]),
            ));
        }
        by_torrent.entry(f[0].to_string()).or_default().push(Peer {
            peer_id: f[1].to_string(),
            isp_id: f[2].to_string(),
            country_code: f[3].to_string(),
            role,
        });
    }
    let torrents = by_torrent
        .into_iter()
        .map(|(id, peers)| TorrentRecord::new(id, peers))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(torrents)
}

pub fn load_demographics(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    parse_demographics(&read(path)?, &path.display().to_string())
}

/// Canonical text form; `parse_demographics` of the result equals `d`.
pub fn format_demographics(d: &Dataset) -> String {
    let mut out = String::from("# torrent_id,peer_id,isp_id,country_code,role\n");
    for t in d.torrents() {
        for p in &t.peers {
            let role = p.role.map_or("", Role::token);
            let _ = writeln!(out, "{},{},{},{},{}", t.torrent_id, p.peer_id, p.isp_id, p.country_code, role);
        }
    }
    out
}

pub fn write_demographics(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_demographics(d)).map_err(|e| Error::io(path, e))
}

fn parse_speed_pairs(text: &str, source: &str) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    for (line, f) in data_lines(text) {
        if f.len() != 2 || f[0].is_empty() {
            return Err(parse_err(source, line, "expected `id, kbps`"));
        }
        let v: f64 = f[1]
            .parse()
            .map_err(|_| parse_err(source, line, format!("bad speed `{}`", f[1])))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(parse_err(source, line, "speed must be positive"));
        }
        if m.insert(f[0].to_string(), v).is_some() {
            return Err(parse_err(source, line, format!("duplicate id `{}`", f[0])));
        }
    }
    Ok(m)
}

pub fn parse_speed_model(isp_text: &str, peer_text: Option<&str>) -> Result<SpeedModel> {
    let s = SpeedModel::from_isp_medians(parse_speed_pairs(isp_text, "speeds")?)?;
    match peer_text {
        Some(t) => s.with_peer_speeds(parse_speed_pairs(t, "peer speeds")?),
        None => Ok(s),
    }
}

pub fn load_speed_model(isp_path: impl AsRef<Path>, peer_path: Option<&Path>) -> Result<SpeedModel> {
    let isp_path = isp_path.as_ref();
    let isp = parse_speed_pairs(&read(isp_path)?, &isp_path.display().to_string())?;
    let s = SpeedModel::from_isp_medians(isp)?;
    match peer_path {
        Some(p) => s.with_peer_speeds(parse_speed_pairs(&read(p)?, &p.display().to_string())?),
        None => Ok(s),
    }
}

pub fn format_speed_model(s: &SpeedModel) -> String {
    let mut out = String::from("# isp_id,median_uplink_kbps\n");
    for (k, v) in &s.per_isp_median_kbps {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// Seeder/leecher counts per torrent.
pub type RatioTable = BTreeMap<String, (u64, u64)>;

pub fn parse_ratios(text: &str, source: &str) -> Result<RatioTable> {
    let mut m = BTreeMap::new();
    for (line, f) in data_lines(text) {
        if f.len() != 3 {
            return Err(parse_err(source, line, "expected `torrent_id, seeders, leechers`"));
        }
        let num = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| parse_err(source, line, format!("bad count `{s}`")))
        };
        if m.insert(f[0].to_string(), (num(f[1])?, num(f[2])?)).is_some() {
            return Err(parse_err(source, line, format!("duplicate torrent `{}`", f[0])));
        }
    }
    Ok(m)
}

pub fn load_ratios(path: impl AsRef<Path>) -> Result<RatioTable> {
    let path = path.as_ref();
    parse_ratios(&read(path)?, &path.display().to_string())
}

pub fn format_ratios(r: &RatioTable) -> String {
    let mut out = String::from("# torrent_id,seeders,leechers\n");
    for (k, (s, l)) in r {
        let _ = writeln!(out, "{k},{s},{l}");
    }
    out
}

// ---------------------------------------------------------------------------
// Seeder roles

/// Make each peer a seeder with probability seeders/(seeders+leechers) of its
/// torrent. Only roles change.
pub fn assign_roles(d: &Dataset, ratios: &RatioTable, seed: u64) -> Result<Dataset> {
    let mut torrents = Vec::with_capacity(d.torrents.len());
    for t in &d.torrents {
        let &(s, l) = ratios
            .get(&t.torrent_id)
            .ok_or_else(|| Error::MissingRatio(t.torrent_id.clone()))?;
        if s + l == 0 {
            return Err(Error::Validation(format!(
                "torrent `{}` has zero seeders and leechers in ratio table",
                t.torrent_id
            )));
        }
        let p_seed = s as f64 / (s + l) as f64;
        let mut rng = seed::rng(seed, &["roles", &t.torrent_id]);
        let mut t = t.clone();
        for p in &mut t.peers {
            let role = if rng.gen_bool(p_seed) { Role::Seeder } else { Role::Leecher };
            p.role = Some(role);
        }
        t.recount();
        torrents.push(t);
    }
    Ok(Dataset {
        torrents,
        isp_index: d.isp_index.clone(),
        isp_country: d.isp_country.clone(),
    })
}

// ---------------------------------------------------------------------------
// Synthetic workloads

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeDistribution {
    Point { size: usize },
    Uniform { min: usize, max: usize },
    /// P(size = n) proportional to n^-exponent on [min, max].
    PowerLaw { min: usize, max: usize, exponent: f64 },
}

impl SizeDistribution {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SizeDistribution::Point { size } => size > 0,
            SizeDistribution::Uniform { min, max } => min > 0 && min <= max,
            SizeDistribution::PowerLaw { min, max, exponent } => min > 0 && min <= max && exponent.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid size distribution {self:?}")))
        }
    }
}

const COUNTRIES: [&str; 20] = [
    "US", "DE", "FR", "ES", "GB", "IT", "BR", "CA", "NL", "SE", "PL", "JP", "AU", "IN", "MX", "AR", "PT", "BE", "GR",
    "RO",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub torrents: usize,
    pub sizes: SizeDistribution,
    pub isps: usize,
    /// Zipf exponent over ISP ranks for peer placement; 0 is uniform.
    #[serde(default)]
    pub isp_skew: f64,
    /// ISPs are spread round-robin over this many countries.
    #[serde(default = "default_countries")]
    pub countries: usize,
    #[serde(default = "default_speed_min")]
    pub speed_min_kbps: f64,
    #[serde(default = "default_speed_max")]
    pub speed_max_kbps: f64,
    /// Seeder share written to the synthetic ratio table.
    #[serde(default = "default_seeder_fraction")]
    pub seeder_fraction: f64,
}

fn default_countries() -> usize {
    4
}
fn default_speed_min() -> f64 {
    300.0
}
fn default_speed_max() -> f64 {
    3000.0
}
fn default_seeder_fraction() -> f64 {
    0.25
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.torrents == 0 || self.isps == 0 || self.countries == 0 {
            return Err(Error::Validation("torrent, isp and country counts must be positive".into()));
        }
        if self.countries > COUNTRIES.len() {
            return Err(Error::Validation(format!("at most {} countries supported", COUNTRIES.len())));
        }
        if !(self.speed_min_kbps > 0.0 && self.speed_min_kbps <= self.speed_max_kbps) {
            return Err(Error::Validation("speed range must be positive and ordered".into()));
        }
        if !(self.isp_skew >= 0.0) || !(0.0..=1.0).contains(&self.seeder_fraction) {
            return Err(Error::Validation("isp_skew must be >= 0 and seeder_fraction in [0,1]".into()));
        }
        self.sizes.validate()
    }

    pub fn isp_id(i: usize) -> String {
        format!("AS{:04}", i + 1)
    }

    fn country(&self, isp: usize) -> &'static str {
        COUNTRIES[isp % self.countries]
    }
}

/// Deterministic synthetic demographics for `(spec, seed)`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seed::rng(seed, &["synthetic", "sizes"]);
    let sizes: Vec<usize> = match spec.sizes {
        SizeDistribution::Point { size } => vec![size; spec.torrents],
        SizeDistribution::Uniform { min, max } => (0..spec.torrents).map(|_| rng.gen_range(min..=max)).collect(),
        SizeDistribution::PowerLaw { min, max, exponent } => {
            let w = WeightedIndex::new((min..=max).map(|n| (n as f64).powf(-exponent)))
                .map_err(|e| Error::Validation(format!("power law weights: {e}")))?;
            (0..spec.torrents).map(|_| min + w.sample(&mut rng)).collect()
        }
    };
    let isp_weights = WeightedIndex::new((1..=spec.isps).map(|r| (r as f64).powf(-spec.isp_skew)))
        .map_err(|e| Error::Validation(format!("isp weights: {e}")))?;
    let mut rng = seed::rng(seed, &["synthetic", "placement"]);
    let width = spec.torrents.to_string().len();
    let torrents = sizes
        .iter()
        .enumerate()
        .map(|(t, &n)| {
            let tid = format!("t{t:0width$}");
            let pw = n.to_string().len();
            let peers = (0..n)
                .map(|j| {
                    let isp = isp_weights.sample(&mut rng);
                    Peer::new(format!("{tid}.p{j:0pw$}"), SyntheticSpec::isp_id(isp), spec.country(isp))
                })
                .collect();
            TorrentRecord::new(tid, peers)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(torrents)
}

/// Per-ISP medians drawn uniformly from the synthetic speed range.
pub fn synthetic_speeds(spec: &SyntheticSpec, seed: u64) -> Result<SpeedModel> {
    spec.validate()?;
    let mut rng = seed::rng(seed, &["synthetic", "speeds"]);
    let m = (0..spec.isps)
        .map(|i| {
            let v = if spec.speed_min_kbps == spec.speed_max_kbps {
                spec.speed_min_kbps
            } else {
                rng.gen_range(spec.speed_min_kbps..spec.speed_max_kbps)
            };
            // whole kbps keeps the speed file exact on round trip
            (SyntheticSpec::isp_id(i), v.round().max(1.0))
        })
        .collect();
    SpeedModel::from_isp_medians(m)
}

pub fn synthetic_ratios(spec: &SyntheticSpec, d: &Dataset) -> RatioTable {
    d.torrents()
        .iter()
        .map(|t| {
            let n = t.len() as u64;
            let s = ((n as f64) * spec.seeder_fraction).round() as u64;
            (t.torrent_id.clone(), (s, n - s.min(n)))
        })
        .collect()
}
