use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zrange::config::{DataSource, FeederSource, LibrarySource, RunConfig};
use zrange::run::{run_diagnose, run_identify, run_simulate, RunError, EXIT_OK, EXIT_OTHER};
use zrange::sweep::run_sweep;

/// Environment variable holding the worker-thread count.
const WORKERS_ENV: &str = "ZRANGE_WORKERS";

#[derive(Parser)]
#[command(name = "zrange", version, about = "Branch impedance ranges for radial LV feeders from smart-meter data")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Full identification: report, candidate CSVs and diagnostics.
    Identify(Overrides),
    /// Writes feeder, meter data, library and ground truth for a synthetic config.
    Simulate(Overrides),
    /// Runs the configured noise sweep.
    Sweep(Overrides),
    /// Modeling error, identifiability and Chebyshev center only.
    Diagnose(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    feeder: Option<PathBuf>,
    /// Meter CSV (`t,node,p,q,v`).
    #[arg(long)]
    meter: Option<PathBuf>,
    #[arg(long)]
    library: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    m_prime: Option<usize>,
    /// Neighborhood size of the similarity graph.
    #[arg(long = "neighbors", short = 'K')]
    neighbors: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snapshot_subset: Option<usize>,
    /// Use every snapshot.
    #[arg(long, conflicts_with = "snapshot_subset")]
    all_snapshots: bool,
    #[arg(long)]
    subset_seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Overrides {
    fn resolve(self) -> Result<RunConfig, RunError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(path) = self.feeder {
            cfg.feeder = FeederSource::File { path };
        }
        if let Some(path) = self.meter {
            cfg.data = DataSource::File { path };
        }
        if let Some(path) = self.library {
            cfg.library = LibrarySource::File { path };
        }
        if self.truth.is_some() {
            cfg.truth = self.truth;
        }
        cfg.m = self.m.unwrap_or(cfg.m);
        cfg.kappa = self.kappa.unwrap_or(cfg.kappa);
        cfg.lambda = self.lambda.unwrap_or(cfg.lambda);
        cfg.rho = self.rho.or(cfg.rho);
        cfg.m_prime = self.m_prime.or(cfg.m_prime);
        cfg.neighbors = self.neighbors.unwrap_or(cfg.neighbors);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        if self.all_snapshots {
            cfg.snapshot_subset = None;
        } else if self.snapshot_subset.is_some() {
            cfg.snapshot_subset = self.snapshot_subset;
        }
        cfg.subset_seed = self.subset_seed.unwrap_or(cfg.subset_seed);
        cfg.output_dir = self.output_dir.unwrap_or(cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn init_workers() -> Result<(), String> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value.parse().map_err(|_| format!("{WORKERS_ENV} must be a positive integer, got {value:?}"))?;
    if n == 0 {
        return Err(format!("{WORKERS_ENV} must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn execute(verb: Verb) -> Result<i32, RunError> {
    match verb {
        Verb::Identify(o) => {
            let cfg = o.resolve()?;
            let out = run_identify(&cfg)?;
            let r = &out.report;
            println!("run {}", out.dir.display());
            println!("modeling error {:.3e} (slack {:.3e})", r.delta_star, r.slack);
            if let Some(acc) = &r.accuracy {
                println!(
                    "MAPE* r {:.2}% x {:.2}% (raw samples r {:.2}% x {:.2}%), truth inside range on {:.0}% of branches",
                    acc.refined.r_percent,
                    acc.refined.x_percent,
                    acc.sampled.r_percent,
                    acc.sampled.x_percent,
                    100.0 * acc.contained_fraction
                );
            }
            if r.derailed {
                eprintln!("warning: modeling error exceeds the derail threshold; the range is not trustworthy");
            }
            Ok(out.exit_code())
        }
        Verb::Simulate(o) => {
            let cfg = o.resolve()?;
            println!("run {}", run_simulate(&cfg)?.display());
            Ok(EXIT_OK)
        }
        Verb::Sweep(o) => {
            let cfg = o.resolve()?;
            let (dir, report) = run_sweep(&cfg)?;
            println!("run {}", dir.display());
            for l in &report.levels {
                let band = |b: Option<zrange::sweep::Band>| {
                    b.map_or("n/a".to_string(), |b| format!("{:.2} [{:.2}, {:.2}]", b.median, b.q25, b.q75))
                };
                println!(
                    "level {}: MAPE* r {} x {} ({} ok, {} derailed, {} failed)",
                    l.level,
                    band(l.mape_r),
                    band(l.mape_x),
                    l.ok,
                    l.derailed,
                    l.failed
                );
            }
            Ok(EXIT_OK)
        }
        Verb::Diagnose(o) => {
            let cfg = o.resolve()?;
            let (dir, d) = run_diagnose(&cfg)?;
            println!("run {}", dir.display());
            println!(
                "modeling error {:.3e}, rank {} of {}, Chebyshev radius {:.3e}",
                d.delta_star, d.identifiability.numerical_rank, d.identifiability.n_columns, d.chebyshev_radius
            );
            if let Some(t) = d.identifiability.constant_ratio {
                println!("reactance columns are {t:.6} times the resistance columns (constant power factor)");
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_OTHER as u8);
    }
    let code = match execute(cli.verb) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
