//! Speed-agnostic expectations of localized regular unchokes.
//!
//! For a node of ISP `A` in torrent `T`, a random neighborhood is a draw of
//! `min(W, |V(T)|-1)` peers out of `|V(T)|-1`, `|V(A,T)|-1` of which are
//! local. In sparse mode every local in the neighborhood (up to `k`) gets a
//! regular unchoke; in dense mode unchokes are spread proportionally over
//! the neighborhood. Sparse values upper-bound and dense values lower-bound
//! what a policy can keep inside the ISP.

use crate::datamodel::{ChunkParams, Dataset};
use crate::error::{Error, Result};

/// Hypergeometric law: `draws` items without replacement from `population`
/// items of which `successes` are marked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HyperGeometric {
    population: u64,
    successes: u64,
    draws: u64,
}

impl HyperGeometric {
    pub fn new(population: u64, successes: u64, draws: u64) -> Result<Self> {
        if successes > population || draws > population {
            return Err(Error::Domain(format!(
                "hypergeometric needs successes ({successes}) and draws ({draws}) <= population ({population})"
            )));
        }
        Ok(HyperGeometric {
            population,
            successes,
            draws,
        })
    }

    /// Inclusive support `[lo, hi]`.
    pub fn support(&self) -> (u64, u64) {
        let failures = self.population - self.successes;
        (self.draws.saturating_sub(failures), self.draws.min(self.successes))
    }

    pub fn mean(&self) -> f64 {
        if self.population == 0 {
            return 0.0;
        }
        self.draws as f64 * self.successes as f64 / self.population as f64
    }

    /// pmf over the support, index `i` holding `P(X = lo + i)`.
    ///
    /// Built from the mode outwards with the ratio recurrence and then
    /// normalized, so it never touches factorials and sums to one up to
    /// rounding.
    pub fn pmf_table(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        let (n_pop, k_succ, n_draw) = (self.population as f64, self.successes as f64, self.draws as f64);
        let mode = (((self.draws + 1) as f64 * (self.successes + 1) as f64) / (self.population + 2) as f64).floor() as u64;
        let mode = mode.clamp(lo, hi);
        let mut p = vec![0.0; (hi - lo + 1) as usize];
        let m = (mode - lo) as usize;
        p[m] = 1.0;
        // p(x+1)/p(x) = (K-x)(n-x) / ((x+1)(N-K-n+x+1))
        for i in m..p.len() - 1 {
            let x = (lo + i as u64) as f64;
            let r = (k_succ - x) * (n_draw - x) / ((x + 1.0) * (n_pop - k_succ - n_draw + x + 1.0));
            p[i + 1] = p[i] * r;
        }
        // p(x-1)/p(x) = x(N-K-n+x) / ((K-x+1)(n-x+1))
        for i in (1..=m).rev() {
            let x = (lo + i as u64) as f64;
            let r = x * (n_pop - k_succ - n_draw + x) / ((k_succ - x + 1.0) * (n_draw - x + 1.0));
            p[i - 1] = p[i] * r;
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        p
    }

    pub fn pmf(&self, x: u64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        self.pmf_table()[(x - lo) as usize]
    }

    /// `E[f(X)]` over the support.
    pub fn expect(&self, f: impl Fn(u64) -> f64) -> f64 {
        let (lo, _) = self.support();
        self.pmf_table()
            .iter()
            .enumerate()
            .map(|(i, p)| p * f(lo + i as u64))
            .sum()
    }
}

/// Probability of exactly `x` successes.
pub fn hypergeom_pmf(x: u64, population: u64, successes: u64, draws: u64) -> Result<f64> {
    Ok(HyperGeometric::new(population, successes, draws)?.pmf(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Sparse,
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundInputs {
    /// |V(T)|
    pub torrent_size: u64,
    /// |V(A,T)|
    pub local_size: u64,
    /// W
    pub neighborhood: u64,
    /// k
    pub slots: u64,
}

impl BoundInputs {
    pub fn new(torrent_size: u64, local_size: u64, neighborhood: u64, slots: u64) -> Result<Self> {
        if local_size < 1 || local_size > torrent_size {
            return Err(Error::Domain(format!(
                "need 1 <= local_size ({local_size}) <= torrent_size ({torrent_size})"
            )));
        }
        if slots < 1 || slots >= neighborhood {
            return Err(Error::Domain(format!("need 1 <= k ({slots}) < W ({neighborhood})")));
        }
        Ok(BoundInputs {
            torrent_size,
            local_size,
            neighborhood,
            slots,
        })
    }

    /// Neighborhood actually drawn: min(W, |V(T)|-1).
    pub fn draws(&self) -> u64 {
        self.neighborhood.min(self.torrent_size - 1)
    }

    /// Regular slots that can be filled: min(k, neighborhood).
    fn usable_slots(&self) -> u64 {
        self.slots.min(self.draws())
    }

    fn other_locals(&self) -> u64 {
        self.local_size - 1
    }

    fn law(&self) -> HyperGeometric {
        HyperGeometric::new(self.torrent_size - 1, self.other_locals(), self.draws())
            .expect("BoundInputs invariants keep the law well formed")
    }
}

/// Sum over x of min(x,k) * HyperGeo(x, |V(T)|-1, |V(A,T)|-1, W).
pub fn expected_local_random_sparse(b: &BoundInputs) -> f64 {
    if b.draws() == 0 {
        return 0.0;
    }
    let k = b.slots;
    b.law().expect(|x| x.min(k) as f64)
}

/// Sparse formula with min(x,k) replaced by k*x/W.
pub fn expected_local_random_dense(b: &BoundInputs) -> f64 {
    let draws = b.draws();
    if draws == 0 {
        return 0.0;
    }
    let k = b.usable_slots() as f64;
    let v = b.law().expect(|x| k * x as f64 / draws as f64);
    debug_assert!({
        let closed = k * b.other_locals() as f64 / (b.torrent_size - 1) as f64;
        (v - closed).abs() <= 1e-9 * closed.max(1.0)
    });
    v
}

/// Locality puts every available local in the neighborhood first.
pub fn expected_local_locality(b: &BoundInputs, mode: Mode) -> f64 {
    let locals = b.other_locals();
    match mode {
        Mode::Sparse => locals.min(b.slots) as f64,
        Mode::Dense => {
            let draws = b.draws();
            if draws == 0 {
                0.0
            } else if locals >= draws {
                b.usable_slots() as f64
            } else {
                b.usable_slots() as f64 * locals as f64 / draws as f64
            }
        }
    }
}

pub fn expected_local_random(b: &BoundInputs, mode: Mode) -> f64 {
    match mode {
        Mode::Sparse => expected_local_random_sparse(b),
        Mode::Dense => expected_local_random_dense(b),
    }
}

/// W(|V(A,T)|-1)/(|V(T)|-1) >= k, the mean-draw condition for Random to keep
/// all unchokes local in sparse mode.
pub fn sparse_condition_holds(b: &BoundInputs) -> bool {
    if b.torrent_size <= 1 || b.local_size <= 1 {
        return false;
    }
    b.neighborhood as u128 * b.other_locals() as u128 >= b.slots as u128 * (b.torrent_size - 1) as u128
}

/// Improvement of Locality over Random in localized unchokes.
///
/// Defined for `|V(A,T)|-1 >= k` and `|V(T)|-1 >= W`. Dense mode uses the
/// closed forms `(|V(T)|-1)/(|V(A,T)|-1)` when the locals fill the
/// neighborhood and `(|V(T)|-1)/W` otherwise. Sparse mode divides `k` by the
/// exact sparse expectation, which reduces to `k(|V(T)|-1) / (W(|V(A,T)|-1))`
/// whenever a draw can never hold more than `k` locals.
pub fn improvement_factor(b: &BoundInputs, mode: Mode) -> Result<f64> {
    let locals = b.other_locals();
    let others = b.torrent_size - 1;
    if locals < b.slots {
        return Err(Error::Domain(format!(
            "improvement factor needs |V(A,T)|-1 >= k, got {locals} < {}",
            b.slots
        )));
    }
    if others < b.neighborhood {
        return Err(Error::Domain(format!(
            "improvement factor needs |V(T)|-1 >= W, got {others} < {}",
            b.neighborhood
        )));
    }
    Ok(match mode {
        Mode::Sparse => b.slots as f64 / expected_local_random_sparse(b),
        Mode::Dense if locals >= b.neighborhood => others as f64 / locals as f64,
        Mode::Dense => others as f64 / b.neighborhood as f64,
    })
}

/// One torrent's weighted share of an ISP aggregate. Values are fractions of k.
#[derive(Clone, Debug, PartialEq)]
pub struct TorrentBound {
    pub torrent_id: String,
    pub torrent_size: u64,
    pub local_size: u64,
    pub weight: f64,
    pub random_sparse: f64,
    pub random_dense: f64,
    pub locality_sparse: f64,
    pub locality_dense: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IspBoundsReport {
    pub isp_id: String,
    pub random_sparse: f64,
    pub random_dense: f64,
    pub locality_sparse: f64,
    pub locality_dense: f64,
    pub torrents: Vec<TorrentBound>,
}

impl IspBoundsReport {
    pub fn improvement(&self, mode: Mode) -> Option<f64> {
        let (loc, rnd) = match mode {
            Mode::Sparse => (self.locality_sparse, self.random_sparse),
            Mode::Dense => (self.locality_dense, self.random_dense),
        };
        (rnd > 0.0).then(|| loc / rnd)
    }

    pub const CSV_HEADER: &'static str =
        "isp_id,random_sparse,random_dense,locality_sparse,locality_dense,improvement_sparse,improvement_dense";

    pub fn csv_row(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{},{}",
            self.isp_id,
            self.random_sparse,
            self.random_dense,
            self.locality_sparse,
            self.locality_dense,
            f(self.improvement(Mode::Sparse)),
            f(self.improvement(Mode::Dense)),
        )
    }
}

/// ISP-wide bounds: each torrent of T(A) weighted by |V(A,T)| / |V(A)|.
pub fn isp_bounds(d: &Dataset, isp: &str, params: &ChunkParams) -> Result<IspBoundsReport> {
    if !d.contains_isp(isp) {
        return Err(Error::UnknownIsp(isp.to_string()));
    }
    let (w, k) = (params.neighborhood as u64, params.regular_slots as u64);
    let total = d.isp_population(isp) as f64;
    let mut rep = IspBoundsReport {
        isp_id: isp.to_string(),
        random_sparse: 0.0,
        random_dense: 0.0,
        locality_sparse: 0.0,
        locality_dense: 0.0,
        torrents: Vec::new(),
    };
    let kf = k as f64;
    for (t, local) in d.torrents_of(isp) {
        let b = BoundInputs::new(t.len() as u64, local as u64, w, k)?;
        let tb = TorrentBound {
            torrent_id: t.torrent_id.clone(),
            torrent_size: b.torrent_size,
            local_size: b.local_size,
            weight: local as f64 / total,
            random_sparse: expected_local_random_sparse(&b) / kf,
            random_dense: expected_local_random_dense(&b) / kf,
            locality_sparse: expected_local_locality(&b, Mode::Sparse) / kf,
            locality_dense: expected_local_locality(&b, Mode::Dense) / kf,
        };
        rep.random_sparse += tb.weight * tb.random_sparse;
        rep.random_dense += tb.weight * tb.random_dense;
        rep.locality_sparse += tb.weight * tb.locality_sparse;
        rep.locality_dense += tb.weight * tb.locality_dense;
        rep.torrents.push(tb);
    }
    Ok(rep)
}
