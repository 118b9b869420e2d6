//! Completion-aware b-matching: pairs with little mutual interest are
//! filtered out before solving, and completions advance by what matched
//! partners can send in one unchoke interval.
//!
//! Chunk holdings are modelled as uniformly random subsets of the file, so
//! the overlap of two holdings is hypergeometric. Completion levels are kept
//! as expected (fractional) chunk counts.

use rand::Rng;

use super::{solve_bmatching, Matching, MatchingProblem};
use crate::bounds::HyperGeometric;
use crate::datamodel::ChunkParams;
use crate::error::{Error, Result};
use crate::seed;

/// Expected interest `(E{I(v->u)}, E{I(u->v)})` for `c_u <= c_v <= C`.
///
/// Closed form: `E{I(v->u)} = c_v (C - c_u) / C`.
pub fn expected_interest(c_v: f64, c_u: f64, total: f64) -> Result<(f64, f64)> {
    if !(0.0 <= c_u && c_u <= c_v && c_v <= total && total > 0.0) {
        return Err(Error::Domain(format!(
            "expected interest needs 0 <= c_u ({c_u}) <= c_v ({c_v}) <= C ({total})"
        )));
    }
    let e_vu = c_v * (total - c_u) / total;
    Ok((e_vu, c_u - c_v + e_vu))
}

/// Same quantity by summing over the overlap distribution: the overlap of
/// the two holdings is `HyperGeo(C, c_v, c_u)` and `I(v->u) = c_v - overlap`.
pub fn expected_interest_pmf(c_v: u64, c_u: u64, total: u64) -> Result<(f64, f64)> {
    if !(c_u <= c_v && c_v <= total && total > 0) {
        return Err(Error::Domain(format!(
            "expected interest needs c_u ({c_u}) <= c_v ({c_v}) <= C ({total})"
        )));
    }
    let overlap = HyperGeometric::new(total, c_v, c_u)?;
    let e_vu = overlap.expect(|o| (c_v - o) as f64);
    let e_uv = overlap.expect(|o| (c_u - o) as f64);
    Ok((e_vu, e_uv))
}

/// `(E{I(a->b)}, E{I(b->a)})` for any order of completions.
pub fn pair_interest(c_a: f64, c_b: f64, total: f64) -> (f64, f64) {
    let a_to_b = c_a * (total - c_b) / total;
    let b_to_a = c_b * (total - c_a) / total;
    (a_to_b.max(0.0), b_to_a.max(0.0))
}

/// `min(E{I(v->u)} / budget(v), E{I(u->v)} / budget(u), 1)` where a budget is
/// what one regular slot carries in one unchoke interval.
pub fn filtering_probability(c_v: f64, c_u: f64, chunk: &ChunkParams, speed_v: f64, speed_u: f64) -> Result<f64> {
    let total = chunk.total_chunks as f64;
    for c in [c_v, c_u] {
        if !(0.0..=total).contains(&c) {
            return Err(Error::Domain(format!("completion {c} outside [0, {total}]")));
        }
    }
    let (vu, uv) = pair_interest(c_v, c_u, total);
    let (bv, bu) = (chunk.slot_budget_chunks(speed_v), chunk.slot_budget_chunks(speed_u));
    Ok((vu / bv).min(uv / bu).min(1.0))
}

/// Expected holdings approach `C` only asymptotically, so a node missing less
/// than half a chunk counts as complete.
fn is_complete(c: f64, total: f64) -> bool {
    c >= total - 0.5
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionState {
    /// Chunks held per problem node, in `[0, C]`.
    pub chunks: Vec<f64>,
    pub sim_time_sec: f64,
}

impl CompletionState {
    pub fn new(chunks: Vec<f64>) -> Self {
        CompletionState {
            chunks,
            sim_time_sec: 0.0,
        }
    }

    /// Nodes whose expected holding rounds to the full file.
    pub fn completed(&self, total: u64) -> usize {
        self.chunks.iter().filter(|&&c| is_complete(c, total as f64)).count()
    }
}

/// Filtering probability of every allowed pair, in `p.edges()` order.
pub fn edge_probabilities(p: &MatchingProblem, state: &CompletionState, chunk: &ChunkParams) -> Result<Vec<f64>> {
    if state.chunks.len() != p.len() {
        return Err(Error::Domain("completion state does not match problem size".into()));
    }
    p.edges()
        .map(|(a, b)| {
            filtering_probability(
                state.chunks[a],
                state.chunks[b],
                chunk,
                p.preference[a],
                p.preference[b],
            )
        })
        .collect()
}

/// Keep each allowed pair with its filtering probability. Preferences double
/// as uplink speeds. Coin flips come from a stream keyed by `(seed, step)`.
pub fn filter_problem(p: &MatchingProblem, state: &CompletionState, chunk: &ChunkParams, seed: u64, step: u64) -> Result<MatchingProblem> {
    if state.chunks.len() != p.len() {
        return Err(Error::Domain("completion state does not match problem size".into()));
    }
    let phi = edge_probabilities(p, state, chunk)?;
    let mut rng = seed::rng(seed, &["filter", &step.to_string()]);
    let mut phi = phi.into_iter();
    Ok(p.restrict(|_, _| {
        let f = phi.next().expect("one probability per edge");
        rng.gen_bool(f.clamp(0.0, 1.0))
    }))
}

/// `c(v) += sum over partners u of min(E{I(u->v)}, budget(u))`, capped at C.
pub fn step_completions(m: &Matching, state: &CompletionState, chunk: &ChunkParams, speeds: &[f64]) -> CompletionState {
    let total = chunk.total_chunks as f64;
    let mut next = state.chunks.clone();
    for &(a, b) in &m.pairs {
        let (ab, ba) = pair_interest(state.chunks[a], state.chunks[b], total);
        next[b] += ab.min(chunk.slot_budget_chunks(speeds[a]));
        next[a] += ba.min(chunk.slot_budget_chunks(speeds[b]));
    }
    for c in &mut next {
        *c = if is_complete(*c, total) { total } else { *c };
    }
    CompletionState {
        chunks: next,
        sim_time_sec: state.sim_time_sec + chunk.unchoke_interval_sec,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    /// Start of the unchoke interval.
    pub sim_time_sec: f64,
    /// Sum of regular-unchoke rates U/(k+1) over both directions of every matched pair.
    pub capacity_kbps: f64,
    /// Nodes complete at the end of the interval.
    pub completed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionTrace {
    pub rows: Vec<TraceRow>,
    pub final_state: CompletionState,
    /// Capacity of the unfiltered (steady-state) matching.
    pub baseline_capacity_kbps: f64,
    /// End of the interval in which the last node completed.
    pub all_complete_at_sec: Option<f64>,
    /// First time from which no allowed pair has a positive filtering
    /// probability, so holdings can no longer change. Nodes still incomplete
    /// then are stranded among partners that need nothing from them.
    pub quiescent_at_sec: Option<f64>,
}

impl CompletionTrace {
    pub const CSV_HEADER: &'static str = "step,sim_time_sec,aggregate_capacity_kbps,completed_nodes";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            out.push_str(&format!("{},{:.1},{:.6},{}\n", r.step, r.sim_time_sec, r.capacity_kbps, r.completed));
        }
        out
    }
}

fn matched_capacity(m: &Matching, speeds: &[f64], k: usize) -> f64 {
    m.pairs
        .iter()
        .map(|&(a, b)| (speeds[a] + speeds[b]) / (k as f64 + 1.0))
        .sum()
}

/// Filter, solve, record, advance; until `max_steps` or every node is complete.
pub fn run_completion_simulation(
    base: &MatchingProblem,
    chunk: &ChunkParams,
    initial: CompletionState,
    max_steps: u64,
    seed: u64,
) -> Result<CompletionTrace> {
    chunk.validate()?;
    let speeds = &base.preference;
    let baseline = matched_capacity(&solve_bmatching(base), speeds, chunk.regular_slots);
    let total = chunk.total_chunks;
    let mut state = initial;
    let mut rows = Vec::new();
    let mut done_at = (state.completed(total) == state.chunks.len()).then_some(state.sim_time_sec);
    let mut quiescent_at = done_at;
    for step in 0..max_steps {
        if done_at.is_some() {
            break;
        }
        if edge_probabilities(base, &state, chunk)?.iter().all(|&f| f <= 0.0) {
            quiescent_at = Some(state.sim_time_sec);
            break;
        }
        let filtered = filter_problem(base, &state, chunk, seed, step)?;
        let m = solve_bmatching(&filtered);
        let start = state.sim_time_sec;
        state = step_completions(&m, &state, chunk, speeds);
        let completed = state.completed(total);
        rows.push(TraceRow {
            step,
            sim_time_sec: start,
            capacity_kbps: matched_capacity(&m, speeds, chunk.regular_slots),
            completed,
        });
        if completed == state.chunks.len() {
            done_at = Some(state.sim_time_sec);
            quiescent_at = done_at;
        }
    }
    Ok(CompletionTrace {
        rows,
        final_state: state,
        baseline_capacity_kbps: baseline,
        all_complete_at_sec: done_at,
        quiescent_at_sec: quiescent_at,
    })
}

/// Complete graph of `n` leechers with uplinks uniform in `[lo_kbps, hi_kbps)`
/// and initial holdings uniform in `[1, c0_max)` chunks.
pub fn uniform_swarm(
    n: usize,
    lo_kbps: f64,
    hi_kbps: f64,
    c0_max: f64,
    k: usize,
    seed: u64,
) -> Result<(MatchingProblem, CompletionState)> {
    if !(n >= 2 && lo_kbps > 0.0 && lo_kbps < hi_kbps && c0_max > 1.0) {
        return Err(Error::Domain("uniform swarm needs n >= 2, 0 < lo < hi and c0_max > 1".into()));
    }
    let mut rng = seed::rng(seed, &["swarm"]);
    let speeds: Vec<f64> = (0..n).map(|_| rng.gen_range(lo_kbps..hi_kbps)).collect();
    let chunks = (0..n).map(|_| rng.gen_range(1.0..c0_max)).collect();
    let pref = super::tiebreak_speeds(&speeds, super::DEFAULT_TIEBREAK_EPSILON, seed);
    let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
    let p = MatchingProblem::new(pref, vec![k; n], edges)?;
    Ok((p, CompletionState::new(chunks)))
}
