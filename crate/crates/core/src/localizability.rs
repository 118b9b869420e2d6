//! Inherent localizability: how much of a torrent's speed-compatible
//! population sits inside the home ISP.
//!
//! Speeds are ISP granular here; per-peer speeds are ignored and every ISP is
//! represented by its median.

use crate::datamodel::{Dataset, SpeedModel, TorrentRecord};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizabilityQuery {
    pub isp_id: String,
    /// Half-width of the speed band, in [0,1].
    pub q: f64,
    /// Replaces U(A) for what-if sweeps.
    pub speed_override_kbps: Option<f64>,
}

impl LocalizabilityQuery {
    pub const DEFAULT_Q: f64 = 0.25;

    pub fn new(isp_id: impl Into<String>, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!("q must lie in [0,1], got {q}")));
        }
        Ok(LocalizabilityQuery {
            isp_id: isp_id.into(),
            q,
            speed_override_kbps: None,
        })
    }

    pub fn with_speed(mut self, kbps: f64) -> Result<Self> {
        if !(kbps.is_finite() && kbps > 0.0) {
            return Err(Error::Domain(format!("override speed must be positive, got {kbps}")));
        }
        self.speed_override_kbps = Some(kbps);
        Ok(self)
    }
}

/// True iff `U(A)(1-q) <= U(A') <= U(A)(1+q)`, both ends inclusive.
pub fn indicator(home_kbps: f64, other_kbps: f64, q: f64) -> bool {
    home_kbps * (1.0 - q) <= other_kbps && other_kbps <= home_kbps * (1.0 + q)
}

fn isp_speed(s: &SpeedModel, isp: &str) -> Result<f64> {
    s.isp_speed(isp).ok_or_else(|| Error::MissingSpeeds(vec![isp.to_string()]))
}

fn home_speed(s: &SpeedModel, query: &LocalizabilityQuery) -> Result<f64> {
    match query.speed_override_kbps {
        Some(v) => Ok(v),
        None => isp_speed(s, &query.isp_id),
    }
}

fn record_localizability(t: &TorrentRecord, s: &SpeedModel, query: &LocalizabilityQuery, home: f64) -> Result<f64> {
    let counts = t.isp_counts();
    let local = *counts.get(query.isp_id.as_str()).ok_or_else(|| {
        Error::Domain(format!("isp `{}` has no peers in torrent `{}`", query.isp_id, t.torrent_id))
    })?;
    let mut denom = 0usize;
    for (isp, n) in counts {
        // the home ISP is always in its own band, even under an override
        if isp == query.isp_id || indicator(home, isp_speed(s, isp)?, query.q) {
            denom += n;
        }
    }
    Ok(local as f64 / denom as f64)
}

/// I_q(A,T) = |V(A,T)| / sum over in-band ISPs A' of |V(A',T)|.
pub fn torrent_localizability(d: &Dataset, s: &SpeedModel, torrent_id: &str, query: &LocalizabilityQuery) -> Result<f64> {
    let t = d
        .torrent(torrent_id)
        .ok_or_else(|| Error::Domain(format!("unknown torrent `{torrent_id}`")))?;
    record_localizability(t, s, query, home_speed(s, query)?)
}

/// Which torrents of T(A) enter an ISP aggregate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TorrentFilter {
    #[default]
    All,
    /// The N torrents with most home-ISP peers.
    TopLocal(usize),
    /// The N largest torrents overall.
    TopGlobal(usize),
}

fn selected<'a>(d: &'a Dataset, isp: &str, filter: TorrentFilter) -> Vec<(&'a TorrentRecord, usize)> {
    let mut ts: Vec<_> = d.torrents_of(isp).collect();
    match filter {
        TorrentFilter::All => {}
        TorrentFilter::TopLocal(n) => {
            ts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.torrent_id.cmp(&b.0.torrent_id)));
            ts.truncate(n);
        }
        TorrentFilter::TopGlobal(n) => {
            ts.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.torrent_id.cmp(&b.0.torrent_id)));
            ts.truncate(n);
        }
    }
    ts
}

/// I_q(A): per-torrent values weighted by |V(A,T)| / |V(A)|.
pub fn isp_localizability(d: &Dataset, s: &SpeedModel, query: &LocalizabilityQuery) -> Result<f64> {
    isp_localizability_filtered(d, s, query, TorrentFilter::All)
}

pub fn isp_localizability_filtered(
    d: &Dataset,
    s: &SpeedModel,
    query: &LocalizabilityQuery,
    filter: TorrentFilter,
) -> Result<f64> {
    if !d.contains_isp(&query.isp_id) {
        return Err(Error::UnknownIsp(query.isp_id.clone()));
    }
    let home = home_speed(s, query)?;
    let ts = selected(d, &query.isp_id, filter);
    let total: usize = ts.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(Error::Domain("torrent filter selected nothing".into()));
    }
    let mut acc = 0.0;
    for (t, n) in ts {
        acc += n as f64 * record_localizability(t, s, query, home)?;
    }
    // a weighted mean of values in (0,1] can round past 1
    Ok((acc / total as f64).min(1.0))
}

/// I_q(A) as U(A) moves over `grid`, all other ISPs held fixed.
pub fn speed_sweep(d: &Dataset, s: &SpeedModel, isp: &str, q: f64, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    speed_sweep_filtered(d, s, isp, q, grid, TorrentFilter::All)
}

pub fn speed_sweep_filtered(
    d: &Dataset,
    s: &SpeedModel,
    isp: &str,
    q: f64,
    grid: &[f64],
    filter: TorrentFilter,
) -> Result<Vec<(f64, f64)>> {
    let base = LocalizabilityQuery::new(isp, q)?;
    grid.iter()
        .map(|&v| {
            let query = base.clone().with_speed(v)?;
            Ok((v, isp_localizability_filtered(d, s, &query, filter)?))
        })
        .collect()
}

/// `steps` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !(lo > 0.0) || hi < lo {
        return Err(Error::Domain(format!("bad sweep {lo}:{hi}:{steps}")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let h = (hi - lo) / (steps - 1) as f64;
    Ok((0..steps).map(|i| if i + 1 == steps { hi } else { lo + h * i as f64 }).collect())
}
