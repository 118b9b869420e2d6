//! Config-driven pipeline: load or synthesize a dataset, build every policy's
//! overlay over the home ISPs' torrents, solve matchings, aggregate traffic
//! and write CSV reports.
//!
//! Config files are TOML:
//!
//! ```toml
//! seed = 7
//! out = "out"
//!
//! [data]                      # or a [synthetic] section
//! demographics = "demographics.csv"
//! speeds = "speeds.csv"
//! peer_speeds = "peers.csv"   # optional
//! ratios = "ratios.csv"       # optional if every peer carries a role
//!
//! [experiment]
//! home_isps = ["AS0001"]      # default: the most populous ISP
//! policies = ["loif", "locality", "strict"]
//! seeder_policy = "proportional"
//! percentiles = [5, 25, 50, 75, 95]
//!
//! [chunk]
//! neighborhood = 40
//! regular_slots = 4
//!
//! [bounds]
//! top_n = 100
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::bounds::{isp_bounds, IspBoundsReport};
use crate::datamodel::{
    assign_roles, format_demographics, format_ratios, format_speed_model, generate_synthetic, load_demographics,
    load_ratios, load_speed_model, synthetic_ratios, synthetic_speeds, ChunkParams, Dataset, RatioTable, SpeedModel,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::matching::{tiebreak_speeds, DEFAULT_TIEBREAK_EPSILON};
use crate::overlay::{self, classify_edges, OverlayGraph, OverlayPolicy};
use crate::seed;
use crate::traffic::{
    aggregate, qos_reduction, transit_reduction, unlocalizable_analysis, Metric, SeederPolicy, TorrentTraffic,
    TrafficReport, Unlocalizable,
};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    out: Option<PathBuf>,
    data: Option<DataPaths>,
    synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    chunk: ChunkParams,
    #[serde(default)]
    bounds: BoundsSection,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub demographics: PathBuf,
    pub speeds: PathBuf,
    pub peer_speeds: Option<PathBuf>,
    pub ratios: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawExperiment {
    home_isps: Vec<String>,
    policies: Vec<String>,
    seeder_policy: SeederPolicy,
    percentiles: Vec<f64>,
    tiebreak_epsilon: f64,
    unlocalizable_threshold: f64,
    dump_overlays: bool,
    dump_matchings: bool,
}

impl Default for RawExperiment {
    fn default() -> Self {
        RawExperiment {
            home_isps: Vec::new(),
            policies: vec!["loif".into(), "locality".into(), "strict".into()],
            seeder_policy: SeederPolicy::default(),
            percentiles: vec![5.0, 25.0, 50.0, 75.0, 95.0],
            tiebreak_epsilon: DEFAULT_TIEBREAK_EPSILON,
            unlocalizable_threshold: 0.9,
            dump_overlays: false,
            dump_matchings: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    pub top_n: usize,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection { top_n: 100 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Files(DataPaths),
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub source: DataSource,
    /// Empty means the most populous ISP.
    pub home_isps: Vec<String>,
    /// Always starts with Random.
    pub policies: Vec<OverlayPolicy>,
    pub seeder_policy: SeederPolicy,
    pub percentiles: Vec<f64>,
    pub tiebreak_epsilon: f64,
    pub unlocalizable_threshold: f64,
    pub dump_overlays: bool,
    pub dump_matchings: bool,
    pub chunk: ChunkParams,
    pub top_n: usize,
}

impl ExperimentConfig {
    /// Defaults around an in-memory source; used by tests and the demo.
    pub fn new(source: DataSource) -> Self {
        let raw = RawExperiment::default();
        ExperimentConfig {
            seed: 0,
            out: PathBuf::from("out"),
            source,
            home_isps: Vec::new(),
            policies: vec![
                OverlayPolicy::Random,
                OverlayPolicy::loif(),
                OverlayPolicy::locality(),
                OverlayPolicy::strict(1),
            ],
            seeder_policy: raw.seeder_policy,
            percentiles: raw.percentiles,
            tiebreak_epsilon: raw.tiebreak_epsilon,
            unlocalizable_threshold: raw.unlocalizable_threshold,
            dump_overlays: false,
            dump_matchings: false,
            chunk: ChunkParams::default(),
            top_n: 100,
        }
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let source = match (raw.data, raw.synthetic) {
            (Some(d), None) => {
                let abs = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
                DataSource::Files(DataPaths {
                    demographics: abs(d.demographics),
                    speeds: abs(d.speeds),
                    peer_speeds: d.peer_speeds.map(abs),
                    ratios: d.ratios.map(abs),
                })
            }
            (None, Some(s)) => DataSource::Synthetic(s),
            _ => return Err(Error::Config("exactly one of [data] or [synthetic] is required".into())),
        };
        let mut policies = vec![OverlayPolicy::Random];
        for name in &raw.experiment.policies {
            let p = OverlayPolicy::parse(name)?;
            if !policies.contains(&p) {
                policies.push(p);
            }
        }
        let out = raw.out.unwrap_or_else(|| PathBuf::from("out"));
        let cfg = ExperimentConfig {
            seed: raw.seed,
            out: if out.is_absolute() { out } else { base_dir.join(out) },
            source,
            home_isps: raw.experiment.home_isps,
            policies,
            seeder_policy: raw.experiment.seeder_policy,
            percentiles: raw.experiment.percentiles,
            tiebreak_epsilon: raw.experiment.tiebreak_epsilon,
            unlocalizable_threshold: raw.experiment.unlocalizable_threshold,
            dump_overlays: raw.experiment.dump_overlays,
            dump_matchings: raw.experiment.dump_matchings,
            chunk: raw.chunk,
            top_n: raw.bounds.top_n,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, dir)
    }

    pub fn validate(&self) -> Result<()> {
        self.chunk.validate()?;
        if self.policies.first() != Some(&OverlayPolicy::Random) {
            return Err(Error::Config("policy list must start with random".into()));
        }
        if let Some(p) = self.percentiles.iter().find(|p| !(**p > 0.0 && **p <= 100.0)) {
            return Err(Error::Config(format!("percentile {p} outside (0, 100]")));
        }
        if !(self.tiebreak_epsilon > 0.0 && self.tiebreak_epsilon < 1e-3) {
            return Err(Error::Config("tiebreak_epsilon must lie in (0, 1e-3)".into()));
        }
        if !(0.0..=1.0).contains(&self.unlocalizable_threshold) {
            return Err(Error::Config("unlocalizable_threshold must lie in [0, 1]".into()));
        }
        if let DataSource::Synthetic(s) = &self.source {
            s.validate()?;
        }
        Ok(())
    }
}

/// Dataset with roles assigned, plus speeds covering every ISP.
#[derive(Clone, Debug, PartialEq)]
pub struct Inputs {
    pub dataset: Dataset,
    pub speeds: SpeedModel,
}

/// Synthetic dataset, speeds and ratio table for `(spec, master seed)`.
pub fn synthesize(spec: &SyntheticSpec, master: u64) -> Result<(Dataset, SpeedModel, RatioTable)> {
    let d = generate_synthetic(spec, seed::derive(master, &["synthetic"]))?;
    let s = synthetic_speeds(spec, seed::derive(master, &["synthetic"]))?;
    let r = synthetic_ratios(spec, &d);
    Ok((d, s, r))
}

/// Load or synthesize the dataset without assigning roles.
pub fn load_raw(cfg: &ExperimentConfig) -> Result<(Dataset, SpeedModel, Option<RatioTable>)> {
    match &cfg.source {
        DataSource::Files(p) => {
            let d = load_demographics(&p.demographics)?;
            let s = load_speed_model(&p.speeds, p.peer_speeds.as_deref())?;
            let r = p.ratios.as_ref().map(load_ratios).transpose()?;
            Ok((d, s, r))
        }
        DataSource::Synthetic(spec) => {
            let (d, s, r) = synthesize(spec, cfg.seed)?;
            Ok((d, s, Some(r)))
        }
    }
}

pub fn load_inputs(cfg: &ExperimentConfig) -> Result<Inputs> {
    let (d, speeds, ratios) = load_raw(cfg)?;
    speeds.check_covers(&d)?;
    let dataset = match ratios {
        Some(r) => assign_roles(&d, &r, seed::derive(cfg.seed, &["roles"]))?,
        None => {
            let missing = d.torrents().iter().find(|t| t.peers.iter().any(|p| p.role.is_none()));
            if let Some(t) = missing {
                return Err(Error::Validation(format!(
                    "torrent `{}` has peers without a role and no ratio table was given",
                    t.torrent_id
                )));
            }
            d
        }
    };
    Ok(Inputs { dataset, speeds })
}

/// Metrics for one `(home ISP, policy)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyReport {
    pub policy: OverlayPolicy,
    pub traffic: TrafficReport,
    pub transit_reduction: Metric,
    /// `(percentile, reduction)` in config order.
    pub qos_reduction: Vec<(f64, Metric)>,
    pub unlocalizable: Unlocalizable,
    pub idle_seeders: usize,
}

/// Overlay and traffic of one torrent under one policy.
#[derive(Clone, Debug, PartialEq)]
pub struct TorrentRun {
    pub graph: OverlayGraph,
    pub traffic: TorrentTraffic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub policies: Vec<OverlayPolicy>,
    pub percentiles: Vec<f64>,
    /// Grouped by home ISP, then in policy order.
    pub reports: Vec<PolicyReport>,
    /// Keyed by `(torrent_id, policy index)`.
    pub runs: BTreeMap<(String, usize), TorrentRun>,
    pub warnings: Vec<String>,
}

impl Evaluation {
    pub fn report(&self, isp: &str, policy: &OverlayPolicy) -> Option<&PolicyReport> {
        self.reports
            .iter()
            .find(|r| r.traffic.isp_id == isp && r.policy == *policy)
    }
}

/// The most populous ISP first, ties by id.
pub fn ranked_isps(d: &Dataset) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = d.isps().map(|i| (i.to_string(), d.isp_population(i))).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

fn home_isps(cfg: &ExperimentConfig, d: &Dataset) -> Vec<String> {
    if cfg.home_isps.is_empty() {
        ranked_isps(d).into_iter().take(1).map(|(i, _)| i).collect()
    } else {
        cfg.home_isps.clone()
    }
}

/// Run every policy over T(A) of every home ISP. Overlays do not depend on
/// the home ISP, so each `(torrent, policy)` pair is computed once.
pub fn evaluate(cfg: &ExperimentConfig, inputs: &Inputs) -> Result<Evaluation> {
    cfg.validate()?;
    let d = &inputs.dataset;
    let homes = home_isps(cfg, d);
    let mut warnings = Vec::new();
    let mut needed: BTreeMap<&str, ()> = BTreeMap::new();
    for h in &homes {
        if !d.contains_isp(h) {
            warnings.push(format!("home isp `{h}` has no torrents; its report is empty"));
        }
        for (t, _) in d.torrents_of(h) {
            needed.insert(&t.torrent_id, ());
        }
    }
    let overlay_seed = seed::derive(cfg.seed, &["overlay"]);
    let tasks: Vec<(&str, usize)> = needed
        .keys()
        .flat_map(|&t| (0..cfg.policies.len()).map(move |p| (t, p)))
        .collect();
    let runs: BTreeMap<(String, usize), TorrentRun> = tasks
        .par_iter()
        .map(|&(tid, pi)| {
            let t = d.torrent(tid).expect("torrent listed in the index");
            let speeds = inputs.speeds.torrent_speeds(t)?;
            let pref = tiebreak_speeds(&speeds, cfg.tiebreak_epsilon, seed::derive(cfg.seed, &["tiebreak", tid]));
            let graph = overlay::build(t, cfg.policies[pi], &speeds, cfg.chunk.neighborhood, overlay_seed)?;
            let traffic = crate::traffic::torrent_matrix(
                t,
                &graph,
                &speeds,
                &pref,
                cfg.chunk.regular_slots,
                cfg.seeder_policy,
            )?;
            Ok(((tid.to_string(), pi), TorrentRun { graph, traffic }))
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::new();
    for h in &homes {
        let ts: Vec<_> = d.torrents_of(h).map(|(t, _)| t).collect();
        let mut per_policy = Vec::new();
        for pi in 0..cfg.policies.len() {
            let parts = ts.iter().map(|t| (*t, &runs[&(t.torrent_id.clone(), pi)].traffic.matrix));
            let traffic = if ts.is_empty() {
                TrafficReport {
                    isp_id: h.clone(),
                    totals: Default::default(),
                    leecher_downloads: Vec::new(),
                    torrents: Vec::new(),
                }
            } else {
                aggregate(parts, h, d.geo())?
            };
            let idle = ts
                .iter()
                .map(|t| {
                    runs[&(t.torrent_id.clone(), pi)]
                        .traffic
                        .idle_seeders
                        .iter()
                        .filter(|&&s| t.peers[s].isp_id == *h)
                        .count()
                })
                .sum();
            per_policy.push((traffic, idle));
        }
        let (random, _) = &per_policy[0];
        for (pi, (traffic, idle)) in per_policy.iter().enumerate() {
            reports.push(PolicyReport {
                policy: cfg.policies[pi],
                transit_reduction: transit_reduction(traffic, random),
                qos_reduction: cfg
                    .percentiles
                    .iter()
                    .map(|&p| (p, qos_reduction(&traffic.leecher_downloads, &random.leecher_downloads, p)))
                    .collect(),
                unlocalizable: unlocalizable_analysis(traffic, cfg.unlocalizable_threshold),
                idle_seeders: *idle,
                traffic: traffic.clone(),
            });
        }
    }
    Ok(Evaluation {
        policies: cfg.policies.clone(),
        percentiles: cfg.percentiles.clone(),
        reports,
        runs,
        warnings,
    })
}

fn pct_label(p: f64) -> String {
    let s = format!("{p}");
    s.replace('.', "_")
}

pub fn report_csv(e: &Evaluation) -> String {
    let mut out = String::from("policy,isp_id,internal_kbps,peering_kbps,transit_kbps,transit_reduction");
    for p in &e.percentiles {
        let _ = write!(out, ",qos_reduction_p{}", pct_label(*p));
    }
    out.push_str(",leechers,idle_seeders\n");
    for r in &e.reports {
        let t = &r.traffic.totals;
        let _ = write!(
            out,
            "{},{},{:.6},{:.6},{:.6},{}",
            r.policy, r.traffic.isp_id, t.internal, t.peering, t.transit, r.transit_reduction
        );
        for (_, m) in &r.qos_reduction {
            let _ = write!(out, ",{m}");
        }
        let _ = writeln!(out, ",{},{}", r.traffic.leecher_downloads.len(), r.idle_seeders);
    }
    out
}

pub fn torrents_csv(e: &Evaluation) -> String {
    let mut out = String::from("policy,isp_id,torrent_id,local_nodes,internal_kbps,peering_kbps,transit_kbps\n");
    for r in &e.reports {
        for b in &r.traffic.torrents {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                r.policy, r.traffic.isp_id, b.torrent_id, b.local_nodes, b.totals.internal, b.totals.peering, b.totals.transit
            );
        }
    }
    out
}

pub fn unlocalizable_csv(e: &Evaluation) -> String {
    let mut out = String::from("policy,isp_id,rank,node_share,transit_share\n");
    for r in &e.reports {
        for (i, (n, t)) in r.unlocalizable.curve.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{:.6},{:.6}", r.policy, r.traffic.isp_id, i + 1, n, t);
        }
    }
    out
}

fn overlays_csv(e: &Evaluation, d: &Dataset) -> String {
    let mut out = String::from("policy,torrent_id,peer_a,peer_b,scope\n");
    for ((tid, pi), run) in &e.runs {
        let t = d.torrent(tid).expect("run of a known torrent");
        let g = classify_edges(&run.graph, t, d.geo());
        for line in g.to_csv(t).lines() {
            let _ = writeln!(out, "{},{line}", e.policies[*pi]);
        }
    }
    out
}

fn matchings_csv(e: &Evaluation, d: &Dataset) -> String {
    let mut out = String::from("policy,torrent_id,peer_a,peer_b\n");
    for ((tid, pi), run) in &e.runs {
        let t = d.torrent(tid).expect("run of a known torrent");
        let tr = &run.traffic;
        for line in tr.matching.to_csv(&tr.problem, t).lines().skip(1) {
            let _ = writeln!(out, "{},{line}", e.policies[*pi]);
        }
    }
    out
}

fn write_file(dir: &Path, name: &str, body: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub evaluation: Evaluation,
    pub files: Vec<PathBuf>,
}

/// Load, evaluate and write `report.csv`, `torrents.csv`,
/// `unlocalizable.csv` and optional overlay / matching dumps.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let inputs = load_inputs(cfg)?;
    let evaluation = evaluate(cfg, &inputs)?;
    ensure_dir(&cfg.out)?;
    let mut files = Vec::new();
    write_file(&cfg.out, "report.csv", &report_csv(&evaluation), &mut files)?;
    write_file(&cfg.out, "torrents.csv", &torrents_csv(&evaluation), &mut files)?;
    write_file(&cfg.out, "unlocalizable.csv", &unlocalizable_csv(&evaluation), &mut files)?;
    if cfg.dump_overlays {
        write_file(&cfg.out, "overlays.csv", &overlays_csv(&evaluation, &inputs.dataset), &mut files)?;
    }
    if cfg.dump_matchings {
        write_file(&cfg.out, "matchings.csv", &matchings_csv(&evaluation, &inputs.dataset), &mut files)?;
    }
    Ok(RunOutput { evaluation, files })
}

/// Bounds for the `top_n` most populous ISPs, ties broken by id.
pub fn bounds_reports(d: &Dataset, chunk: &ChunkParams, top_n: usize) -> Result<Vec<IspBoundsReport>> {
    chunk.validate()?;
    ranked_isps(d)
        .into_iter()
        .take(top_n)
        .map(|(isp, _)| isp_bounds(d, &isp, chunk))
        .collect()
}

/// Writes `bounds.csv` and `bounds_torrents.csv`. Roles play no part here.
pub fn bounds_sweep(cfg: &ExperimentConfig) -> Result<(Vec<IspBoundsReport>, Vec<PathBuf>)> {
    let (d, _, _) = load_raw(cfg)?;
    let reports = bounds_reports(&d, &cfg.chunk, cfg.top_n)?;
    let mut main = format!("{}\n", IspBoundsReport::CSV_HEADER);
    let mut detail = String::from(
        "isp_id,torrent_id,torrent_size,local_size,weight,random_sparse,random_dense,locality_sparse,locality_dense\n",
    );
    for r in &reports {
        main.push_str(&r.csv_row());
        main.push('\n');
        for t in &r.torrents {
            let _ = writeln!(
                detail,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.isp_id,
                t.torrent_id,
                t.torrent_size,
                t.local_size,
                t.weight,
                t.random_sparse,
                t.random_dense,
                t.locality_sparse,
                t.locality_dense
            );
        }
    }
    ensure_dir(&cfg.out)?;
    let mut files = Vec::new();
    write_file(&cfg.out, "bounds.csv", &main, &mut files)?;
    write_file(&cfg.out, "bounds_torrents.csv", &detail, &mut files)?;
    Ok((reports, files))
}

/// Writes the synthetic dataset as `demographics.csv`, `speeds.csv` and
/// `ratios.csv`, loadable through a `[data]` section.
pub fn write_synthetic(spec: &SyntheticSpec, master: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let (d, s, r) = synthesize(spec, master)?;
    ensure_dir(out)?;
    let mut files = Vec::new();
    write_file(out, "demographics.csv", &format_demographics(&d), &mut files)?;
    write_file(out, "speeds.csv", &format_speed_model(&s), &mut files)?;
    write_file(out, "ratios.csv", &format_ratios(&r), &mut files)?;
    Ok(files)
}
