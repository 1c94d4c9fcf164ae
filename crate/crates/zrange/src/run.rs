//! Verbs that write artifacts into a run directory named by the config hash.

use std::path::{Path, PathBuf};

use serde::Serialize;
use zrange_core::metrics::{range_report, RangeReport};
use zrange_core::polytope::IdentifiabilityReport;
use zrange_core::FeederTopology;

use crate::config::{load_sources, problem_from, ConfigError, RunConfig};
use crate::io::{self, IoError};
use crate::pipeline::{
    evaluate, identify, prepare, Evaluation, FailureKind, Identification, PipelineError, Problem, RefineSummary,
    SamplerInfo, Step,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
/// Identification finished but the modeling error is too large to trust the range.
pub const EXIT_DERAILED: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("cannot create {path}: {source}")]
    Dir { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Pipeline(e) => match e.kind {
                FailureKind::InfeasibleData => EXIT_INFEASIBLE,
                FailureKind::SamplerDegeneracy => EXIT_DEGENERATE,
                FailureKind::Other => EXIT_OTHER,
            },
            _ => EXIT_OTHER,
        }
    }
}

/// Creates `<output_dir>/<hash>` and stores the canonical config there.
pub fn run_dir(cfg: &RunConfig) -> Result<PathBuf, RunError> {
    let dir = cfg.output_dir.join(cfg.hash());
    std::fs::create_dir_all(&dir).map_err(|source| RunError::Dir { path: dir.clone(), source })?;
    io::write_json(&dir.join("config.json"), cfg)?;
    Ok(dir)
}

#[derive(Debug, Serialize)]
struct FailureRecord<'a> {
    config_hash: &'a str,
    step: Step,
    kind: FailureKind,
    message: &'a str,
}

/// Writes `failure.json` for a pipeline error; other errors leave no record.
pub fn record_failure(dir: &Path, cfg: &RunConfig, err: &RunError) -> Result<(), IoError> {
    if let RunError::Pipeline(e) = err {
        let hash = cfg.hash();
        let rec = FailureRecord { config_hash: &hash, step: e.step, kind: e.kind, message: &e.message };
        io::write_json(&dir.join("failure.json"), &rec)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeSummary {
    pub edge: String,
    pub r_min: f64,
    pub r_max: f64,
    pub r_median: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub x_median: f64,
    pub magnitude_min: f64,
    pub magnitude_max: f64,
}

fn edge_summaries(topology: &FeederTopology, ranges: &RangeReport) -> Vec<EdgeSummary> {
    topology
        .edges()
        .iter()
        .zip(&ranges.edges)
        .map(|(e, r)| EdgeSummary {
            edge: format!("{}_{}", e.parent, e.child),
            r_min: r.r.min,
            r_max: r.r.max,
            r_median: r.r.median,
            x_min: r.x.min,
            x_max: r.x.max,
            x_median: r.x.median,
            magnitude_min: r.magnitude.min,
            magnitude_max: r.magnitude.max,
        })
        .collect()
}

/// MAPE pair rounded to two decimals, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapeSummary {
    pub r_percent: f64,
    pub x_percent: f64,
}

impl From<zrange_core::metrics::MapePair> for MapeSummary {
    fn from(p: zrange_core::metrics::MapePair) -> Self {
        Self { r_percent: p.r.rounded(), x_percent: p.x.rounded() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AccuracySummary {
    pub sampled: MapeSummary,
    pub refined: MapeSummary,
    pub thinned: Option<MapeSummary>,
    pub collapsed_refined: MapeSummary,
    pub contained_fraction: f64,
    pub out_of_range_edges: Vec<String>,
}

fn accuracy(topology: &FeederTopology, ev: &Evaluation) -> AccuracySummary {
    let out_of_range_edges = topology
        .edges()
        .iter()
        .zip(&ev.containment.out_of_range)
        .filter(|(_, &d)| d > 0.0)
        .map(|(e, _)| format!("{}_{}", e.parent, e.child))
        .collect();
    AccuracySummary {
        sampled: ev.sampled.into(),
        refined: ev.refined.into(),
        thinned: ev.thinned.map(Into::into),
        collapsed_refined: ev.collapsed_refined.into(),
        contained_fraction: ev.contained_fraction,
        out_of_range_edges,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config_hash: String,
    pub status: &'static str,
    pub delta_star: f64,
    pub slack: f64,
    pub max_measured_drop: f64,
    pub derailed: bool,
    pub chebyshev_radius: f64,
    pub free_coordinates: Vec<String>,
    pub sampler: SamplerInfo,
    pub refinement: RefineSummary,
    pub m: usize,
    pub m_prime: Option<usize>,
    pub reported_stage: &'static str,
    pub thinned_rows: Option<Vec<usize>>,
    pub ranges: Vec<EdgeSummary>,
    pub accuracy: Option<AccuracySummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub config_hash: String,
    pub snapshots: usize,
    pub edges: usize,
    pub leaves: usize,
    pub delta_star: f64,
    pub delta_certificate: zrange_core::lp::Certificate,
    pub slack: f64,
    pub max_measured_drop: f64,
    pub derailed: bool,
    pub polytope_rows: usize,
    pub chebyshev_radius: f64,
    pub chebyshev_center: Vec<f64>,
    pub free_coordinates: Vec<String>,
    pub identifiability: IdentifiabilityReport,
}

fn coordinate_names(topology: &FeederTopology, idx: &[usize]) -> Vec<String> {
    let headers = io::candidate_headers(topology);
    idx.iter().map(|&j| headers[j].clone()).collect()
}

/// Result of `identify` as written to disk.
#[derive(Debug)]
pub struct IdentifyOutcome {
    pub dir: PathBuf,
    pub report: Report,
    pub identification: Identification,
    pub evaluation: Option<Evaluation>,
}

impl IdentifyOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.derailed {
            EXIT_DERAILED
        } else {
            EXIT_OK
        }
    }
}

/// Full pipeline without writing anything.
pub fn identify_in_memory(cfg: &RunConfig) -> Result<(Problem, Identification, Option<Evaluation>), RunError> {
    cfg.validate()?;
    let sources = load_sources(cfg)?;
    let problem = problem_from(cfg, &sources)?;
    let ident = identify(&problem, &cfg.params())?;
    let evaluation = match &problem.truth {
        Some(truth) => Some(evaluate(&ident, &problem.topology, truth)?),
        None => None,
    };
    Ok((problem, ident, evaluation))
}

pub fn build_report(
    cfg: &RunConfig,
    topology: &FeederTopology,
    ident: &Identification,
    evaluation: Option<&Evaluation>,
) -> Result<Report, RunError> {
    let ranges = range_report(ident.reported())
        .map_err(|e| PipelineError { step: Step::Metrics, kind: FailureKind::Other, message: e.to_string() })?;
    Ok(Report {
        config_hash: cfg.hash(),
        status: if ident.derailed { "derailed" } else { "ok" },
        delta_star: ident.delta_star,
        slack: ident.slack,
        max_measured_drop: ident.max_drop,
        derailed: ident.derailed,
        chebyshev_radius: ident.radius,
        free_coordinates: coordinate_names(topology, &ident.free),
        sampler: ident.sampler,
        refinement: ident.refine_summary,
        m: cfg.m,
        m_prime: cfg.m_prime,
        reported_stage: if ident.thinned.is_some() { "thinned" } else { "refined" },
        thinned_rows: ident.thinned.as_ref().map(|(_, idx)| idx.clone()),
        ranges: edge_summaries(topology, &ranges),
        accuracy: evaluation.map(|ev| accuracy(topology, ev)),
    })
}

/// Runs the pipeline and writes report, candidates and diagnostics.
pub fn run_identify(cfg: &RunConfig) -> Result<IdentifyOutcome, RunError> {
    let dir = run_dir(cfg)?;
    let result = identify_in_memory(cfg);
    let (problem, ident, evaluation) = match result {
        Ok(v) => v,
        Err(e) => {
            record_failure(&dir, cfg, &e)?;
            return Err(e);
        }
    };
    let topology = &problem.topology;
    let hash = cfg.hash();
    let report = build_report(cfg, topology, &ident, evaluation.as_ref())?;
    io::write_candidates(&dir.join("candidates_sampled.csv"), topology, &ident.sampled, &hash)?;
    io::write_candidates(&dir.join("candidates_refined.csv"), topology, &ident.refined, &hash)?;
    if let Some((z, _)) = &ident.thinned {
        io::write_candidates(&dir.join("candidates_thinned.csv"), topology, z, &hash)?;
    }
    let headers = io::candidate_headers(topology);
    io::write_halfspaces(&dir.join("halfspaces.csv"), &ident.polytope, &headers, &hash)?;
    let diagnostics = Diagnostics {
        config_hash: hash.clone(),
        snapshots: problem.data.snapshots(),
        edges: topology.n_edges(),
        leaves: topology.leaves().len(),
        delta_star: ident.delta_star,
        delta_certificate: ident.delta_certificate,
        slack: ident.slack,
        max_measured_drop: ident.max_drop,
        derailed: ident.derailed,
        polytope_rows: ident.polytope.n_rows(),
        chebyshev_radius: ident.radius,
        chebyshev_center: ident.center.clone(),
        free_coordinates: report.free_coordinates.clone(),
        identifiability: ident.identifiability.clone(),
    };
    io::write_json(&dir.join("diagnostics.json"), &diagnostics)?;
    io::write_json(&dir.join("report.json"), &report)?;
    Ok(IdentifyOutcome { dir, report, identification: ident, evaluation })
}

/// Stops after the Chebyshev center and writes `diagnostics.json`.
pub fn run_diagnose(cfg: &RunConfig) -> Result<(PathBuf, Diagnostics), RunError> {
    cfg.validate()?;
    let dir = run_dir(cfg)?;
    let attempt = || -> Result<Diagnostics, RunError> {
        let sources = load_sources(cfg)?;
        let problem = problem_from(cfg, &sources)?;
        let prep = prepare(&problem, &cfg.params())?;
        Ok(Diagnostics {
            config_hash: cfg.hash(),
            snapshots: problem.data.snapshots(),
            edges: problem.topology.n_edges(),
            leaves: problem.topology.leaves().len(),
            delta_star: prep.delta_star,
            delta_certificate: prep.delta_certificate,
            slack: prep.slack,
            max_measured_drop: prep.max_drop,
            derailed: prep.derailed,
            polytope_rows: prep.polytope.n_rows(),
            chebyshev_radius: prep.radius,
            chebyshev_center: prep.center,
            free_coordinates: coordinate_names(&problem.topology, &prep.free),
            identifiability: prep.identifiability,
        })
    };
    match attempt() {
        Ok(d) => {
            io::write_json(&dir.join("diagnostics.json"), &d)?;
            Ok((dir, d))
        }
        Err(e) => {
            record_failure(&dir, cfg, &e)?;
            Err(e)
        }
    }
}

/// Writes the feeder, full meter data, library and ground truth of a config.
pub fn run_simulate(cfg: &RunConfig) -> Result<PathBuf, RunError> {
    cfg.validate()?;
    let dir = run_dir(cfg)?;
    let sources = load_sources(cfg)?;
    io::write_feeder(&dir.join("feeder.json"), &sources.topology)?;
    io::write_meter_csv(&dir.join("meter.csv"), &sources.data)?;
    io::write_json(&dir.join("library.json"), &sources.library_file)?;
    if let Some(z) = &sources.truth {
        io::write_truth(&dir.join("truth.json"), &sources.topology, z)?;
    }
    Ok(dir)
}
