use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swarmloc::datamodel::SyntheticSpec;
use swarmloc::experiment::{self, DataSource, ExperimentConfig};
use swarmloc::localizability::{linear_grid, speed_sweep, LocalizabilityQuery};
use swarmloc::Error;

#[derive(Parser)]
#[command(name = "swarmloc", version, about = "Inter-ISP traffic under locality-biased BitTorrent overlays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured policy and write traffic reports
    Run(Common),
    /// Write sparse/dense bounds for the most populous ISPs
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Overrides `[bounds] top_n`
        #[arg(long)]
        top_n: Option<usize>,
    },
    /// Inherent localizability of one ISP, optionally swept over its speed
    Localizability {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        isp: String,
        #[arg(long, default_value_t = LocalizabilityQuery::DEFAULT_Q)]
        q: f64,
        /// `lo:hi:steps` in kbps
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Write the config's synthetic dataset as data files
    Synth(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn parse_sweep(s: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::Config(format!("sweep must be lo:hi:steps, got `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        return Err(bad());
    };
    linear_grid(
        lo.parse().map_err(|_| bad())?,
        hi.parse().map_err(|_| bad())?,
        steps.parse().map_err(|_| bad())?,
    )
}

fn write_out(cfg: &ExperimentConfig, name: &str, body: &str) -> Result<PathBuf, Error> {
    let io = |path: &PathBuf, source| Error::Io {
        path: path.clone(),
        source,
    };
    fs::create_dir_all(&cfg.out).map_err(|e| io(&cfg.out, e))?;
    let path = cfg.out.join(name);
    fs::write(&path, body).map_err(|e| io(&path, e))?;
    Ok(path)
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let out = experiment::run(&cfg)?;
            for w in &out.evaluation.warnings {
                eprintln!("warning: {w}");
            }
            for f in &out.files {
                println!("{}", f.display());
            }
        }
        Command::Bounds { common, top_n } => {
            let mut cfg = load(&common)?;
            if let Some(n) = top_n {
                cfg.top_n = n;
            }
            let (_, files) = experiment::bounds_sweep(&cfg)?;
            for f in &files {
                println!("{}", f.display());
            }
        }
        Command::Localizability {
            common,
            isp,
            q,
            sweep,
        } => {
            let cfg = load(&common)?;
            let (d, speeds, _) = experiment::load_raw(&cfg)?;
            speeds.check_covers(&d)?;
            let grid = match sweep {
                Some(s) => parse_sweep(&s)?,
                None => vec![speeds.isp_speed(&isp).ok_or_else(|| Error::UnknownIsp(isp.clone()))?],
            };
            let curve = speed_sweep(&d, &speeds, &isp, q, &grid)?;
            let mut csv = String::from("speed_kbps,localizability\n");
            for (s, v) in curve {
                let _ = writeln!(csv, "{s:.3},{v:.6}");
            }
            print!("{csv}");
            write_out(&cfg, "localizability.csv", &csv)?;
        }
        Command::Synth(c) => {
            let cfg = load(&c)?;
            let DataSource::Synthetic(spec) = &cfg.source else {
                return Err(Error::Config("synth needs a [synthetic] section".into()));
            };
            let spec: &SyntheticSpec = spec;
            for f in experiment::write_synthetic(spec, cfg.seed, &cfg.out)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
