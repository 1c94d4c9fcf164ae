//! The identification chain from meter data to a refined candidate range.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use zrange_core::lp::Certificate;
use zrange_core::metrics::{mape_star, range_report, Containment, MapePair, RangeReport};
use zrange_core::network::{aggregate_flows, collapse_chains};
use zrange_core::polytope::{
    apply_library_bounds, assemble_with_slack, auto_select_free, chebyshev_center, diagnose_identifiability,
    effective_slack, solve_delta_lp, split_directions, IdentifiabilityReport, PolytopeError,
};
use zrange_core::refine::{refine_row, RefineError, RowLog, RowOutcome};
use zrange_core::sample::{interleave_chains, lift_to_full, remove_redundant, round_polytope, sample_chain};
use zrange_core::sample::{RoundingOptions, SampleError, WalkOptions};
use zrange_core::thin::{check_neighborhood, graph_from_nearest, nearest_rows, select_rows, ThinError};
use zrange_core::{CableLibrary, CandidateMatrix, FeederTopology, HalfSpaceSystem, MeterDataset, RefinementConfig, Stage};

/// Ratio of the modeling error to the largest measured squared-voltage drop
/// above which a run is flagged as derailed.
pub const DERAIL_RATIO: f64 = 0.1;

/// Slack on pinned rows when restricting to the free coordinates.
const SPLIT_TOL: f64 = 1e-9;

/// Everything the pipeline consumes.
#[derive(Debug, Clone)]
pub struct Problem {
    pub topology: FeederTopology,
    pub data: MeterDataset,
    pub library: CableLibrary,
    /// Branch lengths used for the library prior; may carry noise.
    pub lengths: Vec<f64>,
    pub truth: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub m: usize,
    pub kappa: f64,
    pub refinement: RefinementConfig,
    pub m_prime: Option<usize>,
    pub neighbors: usize,
    pub free: Option<Vec<usize>>,
    pub seed: u64,
    pub walk: WalkOptions,
    pub rounding: RoundingOptions,
}

/// Pipeline step a failure is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Data,
    ModelingError,
    Polytope,
    Center,
    Sampling,
    Refinement,
    Thinning,
    Metrics,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Step::Data => "data",
            Step::ModelingError => "modeling-error LP",
            Step::Polytope => "polytope",
            Step::Center => "Chebyshev center",
            Step::Sampling => "sampling",
            Step::Refinement => "refinement",
            Step::Thinning => "thinning",
            Step::Metrics => "metrics",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    InfeasibleData,
    SamplerDegeneracy,
    Other,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{step} step failed: {message}")]
pub struct PipelineError {
    pub step: Step,
    pub kind: FailureKind,
    pub message: String,
}

impl PipelineError {
    fn new(step: Step, kind: FailureKind, message: impl Into<String>) -> Self {
        Self { step, kind, message: message.into() }
    }

    fn other(step: Step, e: impl fmt::Display) -> Self {
        Self::new(step, FailureKind::Other, e.to_string())
    }

    fn polytope(step: Step, e: PolytopeError) -> Self {
        match e {
            PolytopeError::Infeasible | PolytopeError::InfeasibleFixedPoint { .. } => {
                Self::new(step, FailureKind::InfeasibleData, format!("{e}; the bounded feasible set is empty"))
            }
            other => Self::other(step, other),
        }
    }

    fn sample(e: SampleError) -> Self {
        let kind = match e {
            SampleError::Infeasible => FailureKind::InfeasibleData,
            SampleError::Unbounded | SampleError::NumericalDegeneracy(_) | SampleError::StartInfeasible => {
                FailureKind::SamplerDegeneracy
            }
            _ => FailureKind::Other,
        };
        Self::new(Step::Sampling, kind, e.to_string())
    }

    fn refine(e: RefineError) -> Self {
        Self::other(Step::Refinement, e)
    }

    fn thin(e: ThinError) -> Self {
        Self::other(Step::Thinning, e)
    }
}

/// Counts of per-row refinement outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RefineSummary {
    pub converged: usize,
    pub max_iterations: usize,
    pub stalled: usize,
}

impl RefineSummary {
    fn of(logs: &[RowLog]) -> Self {
        let mut s = Self::default();
        for log in logs {
            match log.outcome {
                RowOutcome::Converged => s.converged += 1,
                RowOutcome::MaxIterations => s.max_iterations += 1,
                RowOutcome::Stalled => s.stalled += 1,
            }
        }
        s
    }
}

/// Sampler geometry after preprocessing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerInfo {
    pub free_dim: usize,
    pub walk_dim: usize,
    pub rows_before_reduction: usize,
    pub rows_after_reduction: usize,
    pub rounds: usize,
    pub pilot_condition: f64,
}

#[derive(Debug, Clone)]
pub struct Identification {
    pub delta_star: f64,
    pub delta_certificate: Certificate,
    pub slack: f64,
    pub max_drop: f64,
    pub derailed: bool,
    pub identifiability: IdentifiabilityReport,
    /// Bounded feasible set in full coordinates.
    pub polytope: HalfSpaceSystem,
    pub center: Vec<f64>,
    pub radius: f64,
    pub free: Vec<usize>,
    pub sampler: SamplerInfo,
    pub sampled: CandidateMatrix,
    pub refined: CandidateMatrix,
    pub refine_summary: RefineSummary,
    pub thinned: Option<(CandidateMatrix, Vec<usize>)>,
}

impl Identification {
    /// Matrix the range is reported on: thinned when thinning ran, refined otherwise.
    pub fn reported(&self) -> &CandidateMatrix {
        self.thinned.as_ref().map_or(&self.refined, |(z, _)| z)
    }
}

/// Largest `v0^2 - v_leaf^2` over snapshots and leaves.
pub fn max_measured_drop(topology: &FeederTopology, data: &MeterDataset) -> f64 {
    let mut best = 0.0f64;
    for &leaf in topology.leaves() {
        for t in 0..data.snapshots() {
            if let Some(v) = data.v2_at(t, leaf) {
                best = best.max((data.root_v2(t) - v).abs());
            }
        }
    }
    best
}

/// Modeling-error LP only, for diagnostics and sweeps.
pub fn modeling_error(problem: &Problem) -> Result<f64, PipelineError> {
    problem.data.check_against(&problem.topology).map_err(|e| PipelineError::other(Step::Data, e))?;
    let flows = aggregate_flows(&problem.topology, &problem.data).map_err(|e| PipelineError::other(Step::Data, e))?;
    let sol = solve_delta_lp(&problem.topology, &problem.data, &flows)
        .map_err(|e| PipelineError::polytope(Step::ModelingError, e))?;
    Ok(sol.delta_star)
}

/// Output of the steps that do not involve sampling.
#[derive(Debug, Clone)]
pub struct Preparation {
    pub delta_star: f64,
    pub delta_certificate: Certificate,
    pub slack: f64,
    pub max_drop: f64,
    pub derailed: bool,
    pub identifiability: IdentifiabilityReport,
    pub polytope: HalfSpaceSystem,
    pub center: Vec<f64>,
    pub radius: f64,
    pub free: Vec<usize>,
}

/// Modeling error, bounded polytope, diagnostics and Chebyshev center.
pub fn prepare(problem: &Problem, params: &Params) -> Result<Preparation, PipelineError> {
    if !(params.kappa > 1.0) {
        return Err(PipelineError::other(Step::Polytope, format!("kappa must exceed 1, got {}", params.kappa)));
    }
    let (topology, data) = (&problem.topology, &problem.data);
    data.check_against(topology).map_err(|e| PipelineError::other(Step::Data, e))?;
    if problem.lengths.len() != topology.n_edges() {
        return Err(PipelineError::other(Step::Data, "branch length count does not match the feeder"));
    }
    let flows = aggregate_flows(topology, data).map_err(|e| PipelineError::other(Step::Data, e))?;
    let delta = solve_delta_lp(topology, data, &flows).map_err(|e| PipelineError::polytope(Step::ModelingError, e))?;
    let max_drop = max_measured_drop(topology, data);
    let derailed = delta.delta_star > DERAIL_RATIO * max_drop;

    let slack = effective_slack(delta.delta_star, params.kappa);
    let voltage = assemble_with_slack(topology, data, &flows, slack).map_err(|e| PipelineError::polytope(Step::Polytope, e))?;
    let identifiability = diagnose_identifiability(&voltage);
    let polytope = apply_library_bounds(&voltage, &problem.lengths, problem.library.bounds())
        .map_err(|e| PipelineError::polytope(Step::Polytope, e))?;

    let (center, radius) = chebyshev_center(&polytope).map_err(|e| PipelineError::polytope(Step::Center, e))?;
    if !(radius > 0.0) {
        return Err(PipelineError::new(
            Step::Center,
            FailureKind::InfeasibleData,
            format!("bounded feasible set has empty interior (modeling error {:.3e})", delta.delta_star),
        ));
    }
    let free = auto_select_free(topology, params.free.as_deref());
    Ok(Preparation {
        delta_star: delta.delta_star,
        delta_certificate: delta.certificate,
        slack,
        max_drop,
        derailed,
        identifiability,
        polytope,
        center,
        radius,
        free,
    })
}

/// Runs every step up to refinement and optional thinning.
pub fn identify(problem: &Problem, params: &Params) -> Result<Identification, PipelineError> {
    if params.m == 0 {
        return Err(PipelineError::other(Step::Sampling, "at least one sample is required"));
    }
    let prep = prepare(problem, params)?;
    let split = split_directions(&prep.polytope, &prep.center, &prep.free, SPLIT_TOL)
        .map_err(|e| PipelineError::polytope(Step::Sampling, e))?;

    let (sampled, sampler) = if split.free.is_empty() {
        let mut b = CandidateMatrix::new(prep.center.len(), Stage::Sampled);
        for _ in 0..params.m {
            b.push_row(&prep.center);
        }
        let info = SamplerInfo {
            free_dim: 0,
            walk_dim: 0,
            rows_before_reduction: 0,
            rows_after_reduction: 0,
            rounds: 0,
            pilot_condition: 1.0,
        };
        (b, info)
    } else {
        let reduced = remove_redundant(&split.reduced).map_err(PipelineError::sample)?;
        let rp = round_polytope(&reduced, params.seed, &params.rounding).map_err(PipelineError::sample)?;
        params.walk.validate().map_err(PipelineError::sample)?;
        let chains = (0..params.walk.chains)
            .into_par_iter()
            .map(|c| sample_chain(&rp, params.walk.chain_len(params.m, c), params.seed, c, &params.walk))
            .collect::<Result<Vec<_>, _>>()
            .map_err(PipelineError::sample)?;
        let free_rows = interleave_chains(&chains, rp.free_dim(), params.m);
        let b = lift_to_full(&free_rows, &split).map_err(PipelineError::sample)?;
        let info = SamplerInfo {
            free_dim: rp.free_dim(),
            walk_dim: rp.walk_dim(),
            rows_before_reduction: split.reduced.n_rows(),
            rows_after_reduction: reduced.n_rows(),
            rounds: rp.rounds,
            pilot_condition: rp.pilot_condition,
        };
        (b, info)
    };

    let (refined, logs) = refine_parallel(&sampled, &prep.polytope, problem, &params.refinement)?;
    let refine_summary = RefineSummary::of(&logs);

    let thinned = match params.m_prime {
        Some(count) => Some(thin_parallel(&refined, params.neighbors, count)?),
        None => None,
    };

    Ok(Identification {
        delta_star: prep.delta_star,
        delta_certificate: prep.delta_certificate,
        slack: prep.slack,
        max_drop: prep.max_drop,
        derailed: prep.derailed,
        identifiability: prep.identifiability,
        polytope: prep.polytope,
        center: prep.center,
        radius: prep.radius,
        free: split.free,
        sampler,
        sampled,
        refined,
        refine_summary,
        thinned,
    })
}

fn refine_parallel(
    sampled: &CandidateMatrix,
    polytope: &HalfSpaceSystem,
    problem: &Problem,
    cfg: &RefinementConfig,
) -> Result<(CandidateMatrix, Vec<RowLog>), PipelineError> {
    cfg.validate().map_err(PipelineError::refine)?;
    let system = (cfg.rho > 0.0).then_some(polytope);
    let mut out = sampled.clone().with_stage(Stage::Refined);
    let n = out.n_cols();
    let logs = out
        .as_mut_slice()
        .par_chunks_mut(n)
        .map(|row| refine_row(row, system, &problem.library, &problem.lengths, cfg))
        .collect::<Result<Vec<_>, _>>()
        .map_err(PipelineError::refine)?;
    Ok((out, logs))
}

fn thin_parallel(refined: &CandidateMatrix, neighbors: usize, count: usize) -> Result<(CandidateMatrix, Vec<usize>), PipelineError> {
    let k = neighbors.min(refined.n_rows().saturating_sub(1));
    check_neighborhood(refined, k).map_err(PipelineError::thin)?;
    let rows = (0..refined.n_rows()).into_par_iter().map(|i| nearest_rows(refined, i, k)).collect();
    let graph = graph_from_nearest(rows).map_err(PipelineError::thin)?;
    select_rows(refined, &graph, count).map_err(PipelineError::thin)
}

/// Accuracy of an identification against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub sampled: MapePair,
    pub refined: MapePair,
    pub thinned: Option<MapePair>,
    /// Refined candidates with every chain merged into one branch.
    pub collapsed_refined: MapePair,
    pub containment: Containment,
    /// Fraction of branches whose true `r` and `x` lie inside the reported range.
    pub contained_fraction: f64,
}

/// Relative tolerance on range containment.
pub const CONTAINMENT_TOL: f64 = 1e-9;

pub fn evaluate(ident: &Identification, topology: &FeederTopology, truth: &[f64]) -> Result<Evaluation, PipelineError> {
    let metric = |c: &CandidateMatrix| mape_star(c, truth).map_err(|e| PipelineError::other(Step::Metrics, e));
    let sampled = metric(&ident.sampled)?;
    let refined = metric(&ident.refined)?;
    let thinned = ident.thinned.as_ref().map(|(z, _)| metric(z)).transpose()?;

    let collapsed_truth = collapse_chains(topology, truth).map_err(|e| PipelineError::other(Step::Metrics, e))?;
    let mut collapsed = CandidateMatrix::new(collapsed_truth.z.len(), Stage::Refined);
    for row in ident.refined.rows() {
        let c = collapse_chains(topology, row).map_err(|e| PipelineError::other(Step::Metrics, e))?;
        collapsed.push_row(&c.z);
    }
    let collapsed_refined =
        mape_star(&collapsed, &collapsed_truth.z).map_err(|e| PipelineError::other(Step::Metrics, e))?;

    let ranges = range_report(ident.reported()).map_err(|e| PipelineError::other(Step::Metrics, e))?;
    let containment = relative_containment(&ranges, truth)?;
    let inside = containment.out_of_range.iter().filter(|&&d| d == 0.0).count();
    let contained_fraction = inside as f64 / containment.out_of_range.len().max(1) as f64;
    Ok(Evaluation { sampled, refined, thinned, collapsed_refined, containment, contained_fraction })
}

/// Containment with out-of-range distances below the relative tolerance zeroed.
fn relative_containment(ranges: &RangeReport, truth: &[f64]) -> Result<Containment, PipelineError> {
    let raw = ranges.containment(truth, 0.0).map_err(|e| PipelineError::other(Step::Metrics, e))?;
    let ne = ranges.edges.len();
    let out_of_range: Vec<f64> = raw
        .out_of_range
        .iter()
        .enumerate()
        .map(|(e, &d)| {
            let scale = truth[e].abs().max(truth[ne + e].abs());
            if d <= CONTAINMENT_TOL * scale {
                0.0
            } else {
                d
            }
        })
        .collect();
    let contained = out_of_range.iter().all(|&d| d == 0.0);
    Ok(Containment { out_of_range, contained })
}
