//! Run configuration, its hash, and resolution into a pipeline problem.

use std::path::{Path, PathBuf};

use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zrange_core::polytope::LibraryEnvelope;
use zrange_core::sample::{RoundingOptions, WalkOptions};
use zrange_core::simulate::{
    make_dataset, noisy_dataset, noisy_lengths, FlowModel, GroundTruthAssignment, InjectionModel, NoiseSpec,
};
use zrange_core::synthetic::{random_feeder, FeederSpec, REPLICA_CABLES_OHM_PER_KM};
use zrange_core::thin::DEFAULT_NEIGHBORS;
use zrange_core::{rng_for, CableLibrary, FeederTopology, MeterDataset, RefinementConfig};

use crate::io::{self, IoError, LibraryFile};
use crate::pipeline::{Params, Problem};

/// Penalty weight used when length noise is declared and none is given.
pub const LENGTH_NOISE_RHO: f64 = 0.05;

const SUBSET_STREAM: u64 = 0x5e1ec7;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse configuration {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("synthesis failed: {0}")]
    Synthesis(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeederSource {
    File { path: PathBuf },
    Random(FeederSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSpec {
    pub injection: InjectionModel,
    pub snapshots: usize,
    pub model: FlowModel,
    pub root_v: f64,
    pub seed: u64,
    /// Seed of the random cable assignment that serves as ground truth.
    pub cable_seed: u64,
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        Self {
            injection: InjectionModel::IndependentUniform { p_min: 0.0, p_max: 0.05, q_min: -0.005, q_max: 0.02 },
            snapshots: 1440,
            model: FlowModel::Ac,
            root_v: 1.0,
            seed: 0,
            cable_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    File { path: PathBuf },
    Synthesize(SynthesisSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LibrarySource {
    File { path: PathBuf },
    /// Built-in five-type LV catalogue.
    Replica { v_base: f64, s_base: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Length,
    Injection,
    Voltage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: NoiseFamily,
    pub levels: Vec<f64>,
    /// Number of data collections per level.
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub feeder: FeederSource,
    pub data: DataSource,
    pub library: LibrarySource,
    /// Ground-truth file; synthesized data carries its own truth.
    pub truth: Option<PathBuf>,
    pub noise: NoiseSpec,
    pub m: usize,
    pub kappa: f64,
    pub lambda: f64,
    /// `None` selects 0 or, under length noise, [`LENGTH_NOISE_RHO`].
    pub rho: Option<f64>,
    /// `None` skips thinning.
    pub m_prime: Option<usize>,
    pub neighbors: usize,
    pub envelope: LibraryEnvelope,
    /// Explicit free coordinates; `None` frees the degree-2 chains.
    pub free: Option<Vec<usize>>,
    pub seed: u64,
    pub snapshot_subset: Option<usize>,
    pub subset_seed: u64,
    pub max_iters: usize,
    pub patience: usize,
    pub walk: WalkOptions,
    pub rounding: RoundingOptions,
    pub sweep: Option<SweepSpec>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let refinement = RefinementConfig::default();
        Self {
            feeder: FeederSource::Random(FeederSpec::default()),
            data: DataSource::Synthesize(SynthesisSpec::default()),
            library: LibrarySource::Replica { v_base: 400.0, s_base: 100e3 },
            truth: None,
            noise: NoiseSpec::default(),
            m: 30_000,
            kappa: 1.05,
            lambda: 0.01,
            rho: None,
            m_prime: None,
            neighbors: DEFAULT_NEIGHBORS,
            envelope: LibraryEnvelope::default(),
            free: None,
            seed: 0,
            snapshot_subset: Some(10),
            subset_seed: 0,
            max_iters: refinement.max_iters,
            patience: refinement.patience,
            walk: WalkOptions::default(),
            rounding: RoundingOptions::default(),
            sweep: None,
            output_dir: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    /// Reads a JSON config; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let FeederSource::File { path } = &mut self.feeder {
            fix(path);
        }
        if let DataSource::File { path } = &mut self.data {
            fix(path);
        }
        if let LibrarySource::File { path } = &mut self.library {
            fix(path);
        }
        if let Some(p) = &mut self.truth {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.kappa > 1.0 && self.kappa.is_finite()) {
            return Err(invalid(format!("kappa must be greater than 1, got {}", self.kappa)));
        }
        if self.m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda must be positive"));
        }
        if let Some(rho) = self.rho {
            if !(rho >= 0.0 && rho.is_finite()) {
                return Err(invalid("rho must be non-negative"));
            }
        }
        if let Some(mp) = self.m_prime {
            if mp == 0 || mp > self.m {
                return Err(invalid("m_prime must lie in 1..=m"));
            }
            if self.neighbors == 0 {
                return Err(invalid("neighbors must be positive"));
            }
        }
        if self.snapshot_subset == Some(0) {
            return Err(invalid("snapshot_subset must be positive"));
        }
        self.noise.validate().map_err(|e| invalid(e.to_string()))?;
        if let Some(s) = &self.sweep {
            if s.levels.is_empty() || s.seeds == 0 {
                return Err(invalid("sweep needs at least one level and one seed"));
            }
            if s.levels.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
                return Err(invalid("sweep levels must be finite and non-negative"));
            }
        }
        let paths = [
            match &self.feeder {
                FeederSource::File { path } => Some(path),
                FeederSource::Random(_) => None,
            },
            match &self.data {
                DataSource::File { path } => Some(path),
                DataSource::Synthesize(_) => None,
            },
            match &self.library {
                LibrarySource::File { path } => Some(path),
                LibrarySource::Replica { .. } => None,
            },
            self.truth.as_ref(),
        ];
        for p in paths.into_iter().flatten() {
            if !p.is_file() {
                return Err(invalid(format!("path {} does not resolve to a file", p.display())));
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form, with
    /// the output directory left out.
    pub fn hash(&self) -> String {
        let mut keyed = self.clone();
        keyed.output_dir = PathBuf::new();
        let canonical = serde_json::to_vec(&keyed).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Whether any form of length noise is declared.
    pub fn declares_length_noise(&self) -> bool {
        self.noise.length_sigma > 0.0 || self.sweep.as_ref().is_some_and(|s| s.family == NoiseFamily::Length)
    }

    pub fn effective_rho(&self) -> f64 {
        self.rho.unwrap_or(if self.declares_length_noise() { LENGTH_NOISE_RHO } else { 0.0 })
    }

    pub fn params(&self) -> Params {
        Params {
            m: self.m,
            kappa: self.kappa,
            refinement: RefinementConfig {
                lambda: self.lambda,
                rho: self.effective_rho(),
                max_iters: self.max_iters,
                stop_tol: None,
                patience: self.patience,
            },
            m_prime: self.m_prime,
            neighbors: self.neighbors,
            free: self.free.clone(),
            seed: self.seed,
            walk: self.walk,
            rounding: self.rounding,
        }
    }

    /// Same config with one noise family set to `level` and the data collection shifted by `offset`.
    pub fn sweep_cell(&self, family: NoiseFamily, level: f64, offset: u64) -> Self {
        let mut cell = self.clone();
        match family {
            NoiseFamily::Length => cell.noise.length_sigma = level,
            NoiseFamily::Injection => cell.noise.injection_halfwidth = level,
            NoiseFamily::Voltage => cell.noise.voltage_sigma = level,
        }
        cell.noise.seed = self.noise.seed.wrapping_add(offset);
        cell.subset_seed = self.subset_seed.wrapping_add(offset);
        cell.rho = Some(self.effective_rho());
        cell.sweep = None;
        cell
    }
}

/// Clean inputs before any noise or subsetting.
#[derive(Debug, Clone)]
pub struct Sources {
    pub topology: FeederTopology,
    pub data: MeterDataset,
    pub library: CableLibrary,
    pub truth: Option<Vec<f64>>,
    pub library_file: LibraryFile,
}

pub fn load_library(source: &LibrarySource) -> Result<LibraryFile, ConfigError> {
    match source {
        LibrarySource::File { path } => Ok(io::read_library(path)?),
        LibrarySource::Replica { v_base, s_base } => Ok(LibraryFile {
            v_base: *v_base,
            s_base: *s_base,
            types_ohm_per_km: REPLICA_CABLES_OHM_PER_KM.to_vec(),
        }),
    }
}

/// Loads or synthesizes the feeder, data, library and truth.
pub fn load_sources(cfg: &RunConfig) -> Result<Sources, ConfigError> {
    let topology = match &cfg.feeder {
        FeederSource::File { path } => io::read_feeder(path)?,
        FeederSource::Random(spec) => random_feeder(spec).map_err(|e| ConfigError::Synthesis(e.to_string()))?,
    };
    let library_file = load_library(&cfg.library)?;
    let library = library_file.build(topology.n_edges(), &cfg.envelope)?;
    let (data, mut truth) = match &cfg.data {
        DataSource::File { path } => (io::read_meter_csv(path, topology.n_nodes())?, None),
        DataSource::Synthesize(spec) => {
            let gt = GroundTruthAssignment::random(&topology, &library, spec.cable_seed)
                .map_err(|e| ConfigError::Synthesis(e.to_string()))?;
            let data = make_dataset(&topology, &gt.z, &spec.injection, spec.snapshots, spec.model, spec.root_v, spec.seed)
                .map_err(|e| ConfigError::Synthesis(e.to_string()))?;
            (data, Some(gt.z))
        }
    };
    if let Some(path) = &cfg.truth {
        truth = Some(io::read_truth(path, &topology)?);
    }
    Ok(Sources { topology, data, library, truth, library_file })
}

/// Snapshot rows kept by the subset selection, ascending.
pub fn subset_rows(total: usize, subset: Option<usize>, seed: u64) -> Result<Vec<usize>, ConfigError> {
    match subset {
        None => Ok((0..total).collect()),
        Some(k) if k > total => Err(invalid(format!("snapshot subset {k} exceeds the {total} available snapshots"))),
        Some(k) => {
            let mut rng = rng_for(seed, SUBSET_STREAM);
            let mut rows = sample_indices(&mut rng, total, k).into_vec();
            rows.sort_unstable();
            Ok(rows)
        }
    }
}

/// Applies subsetting and noise to clean sources.
pub fn problem_from(cfg: &RunConfig, sources: &Sources) -> Result<Problem, ConfigError> {
    let rows = subset_rows(sources.data.snapshots(), cfg.snapshot_subset, cfg.subset_seed)?;
    let data = sources.data.select_snapshots(&rows);
    let data = noisy_dataset(&data, &cfg.noise).map_err(|e| invalid(e.to_string()))?;
    let lengths = noisy_lengths(&sources.topology.lengths(), &cfg.noise).map_err(|e| invalid(e.to_string()))?;
    Ok(Problem {
        topology: sources.topology.clone(),
        data,
        library: sources.library.clone(),
        lengths,
        truth: sources.truth.clone(),
    })
}
