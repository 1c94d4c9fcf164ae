//! Noise sweeps: one isolated pipeline run per `(level, seed)` cell.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use zrange_core::linalg::{median, quantile};

use crate::config::{ConfigError, NoiseFamily, RunConfig};
use crate::io;
use crate::pipeline::FailureKind;
use crate::run::{identify_in_memory, run_dir, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Derailed,
    InfeasibleData,
    SamplerDegeneracy,
    Failed,
}

impl CellStatus {
    pub fn produced_range(self) -> bool {
        matches!(self, CellStatus::Ok | CellStatus::Derailed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub level: f64,
    pub seed_offset: u64,
    pub config_hash: String,
    pub status: CellStatus,
    pub delta_star: Option<f64>,
    /// Refined-stage MAPE in percent.
    pub mape_r: Option<f64>,
    pub mape_x: Option<f64>,
    pub sampled_mape_r: Option<f64>,
    pub sampled_mape_x: Option<f64>,
    pub message: Option<String>,
}

/// Median and interquartile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Band {
    fn of(values: &[f64]) -> Option<Self> {
        (!values.is_empty()).then(|| Self { median: median(values), q25: quantile(values, 0.25), q75: quantile(values, 0.75) })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub level: f64,
    pub cells: usize,
    pub ok: usize,
    pub derailed: usize,
    pub failed: usize,
    /// Over cells that produced a range.
    pub mape_r: Option<Band>,
    pub mape_x: Option<Band>,
    pub delta_star: Option<Band>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub family: NoiseFamily,
    pub rho: f64,
    pub levels: Vec<LevelSummary>,
    pub cells: Vec<Cell>,
}

fn run_cell(base: &RunConfig, family: NoiseFamily, level: f64, offset: u64) -> Cell {
    let cfg = base.sweep_cell(family, level, offset);
    let mut cell = Cell {
        level,
        seed_offset: offset,
        config_hash: cfg.hash(),
        status: CellStatus::Failed,
        delta_star: None,
        mape_r: None,
        mape_x: None,
        sampled_mape_r: None,
        sampled_mape_x: None,
        message: None,
    };
    match identify_in_memory(&cfg) {
        Ok((_, ident, ev)) => {
            cell.status = if ident.derailed { CellStatus::Derailed } else { CellStatus::Ok };
            cell.delta_star = Some(ident.delta_star);
            if let Some(ev) = ev {
                cell.mape_r = Some(ev.refined.r.value);
                cell.mape_x = Some(ev.refined.x.value);
                cell.sampled_mape_r = Some(ev.sampled.r.value);
                cell.sampled_mape_x = Some(ev.sampled.x.value);
            }
        }
        Err(e) => {
            cell.status = match &e {
                RunError::Pipeline(p) => match p.kind {
                    FailureKind::InfeasibleData => CellStatus::InfeasibleData,
                    FailureKind::SamplerDegeneracy => CellStatus::SamplerDegeneracy,
                    FailureKind::Other => CellStatus::Failed,
                },
                _ => CellStatus::Failed,
            };
            cell.message = Some(e.to_string());
        }
    }
    cell
}

/// Runs every cell of the configured sweep; failures are recorded, not fatal.
pub fn sweep(cfg: &RunConfig) -> Result<SweepReport, ConfigError> {
    cfg.validate()?;
    let spec = cfg.sweep.as_ref().ok_or_else(|| ConfigError::Invalid("config has no sweep section".into()))?;
    let jobs: Vec<(f64, u64)> =
        spec.levels.iter().flat_map(|&l| (0..spec.seeds as u64).map(move |s| (l, s))).collect();
    let cells: Vec<Cell> = jobs.par_iter().map(|&(l, s)| run_cell(cfg, spec.family, l, s)).collect();

    let levels = spec
        .levels
        .iter()
        .map(|&level| {
            let here: Vec<&Cell> = cells.iter().filter(|c| c.level == level).collect();
            let ranged: Vec<&&Cell> = here.iter().filter(|c| c.status.produced_range()).collect();
            let collect = |f: fn(&Cell) -> Option<f64>| ranged.iter().filter_map(|c| f(c)).collect::<Vec<_>>();
            LevelSummary {
                level,
                cells: here.len(),
                ok: here.iter().filter(|c| c.status == CellStatus::Ok).count(),
                derailed: here.iter().filter(|c| c.status == CellStatus::Derailed).count(),
                failed: here.iter().filter(|c| !c.status.produced_range()).count(),
                mape_r: Band::of(&collect(|c| c.mape_r)),
                mape_x: Band::of(&collect(|c| c.mape_x)),
                delta_star: Band::of(&collect(|c| c.delta_star)),
            }
        })
        .collect();
    Ok(SweepReport { config_hash: cfg.hash(), family: spec.family, rho: cfg.effective_rho(), levels, cells })
}

/// Runs the sweep and writes `sweep.json` into the run directory.
pub fn run_sweep(cfg: &RunConfig) -> Result<(PathBuf, SweepReport), RunError> {
    let dir = run_dir(cfg)?;
    let report = sweep(cfg)?;
    io::write_json(&dir.join("sweep.json"), &report)?;
    Ok((dir, report))
}
