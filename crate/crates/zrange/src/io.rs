//! File formats: feeder and library JSON, meter CSV, ground truth, candidates.
//!
//! Meter CSV has one row per `(t, node)` with columns `t,node,p,q,v`; `p` and
//! `q` are per-unit injections (positive for consumption) and `v` is the
//! per-unit voltage magnitude, left empty where the node is unmetered.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use zrange_core::polytope::LibraryEnvelope;
use zrange_core::{CableLibrary, CandidateMatrix, FeederTopology, HalfSpaceSystem, MeterDataset};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Content { path: PathBuf, message: String },
}

fn content(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Content { path: path.into(), message: message.into() }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.into(), source })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json { path: path.into(), source })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| IoError::File { path: path.into(), source })
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path).map(BufWriter::new).map_err(|source| IoError::File { path: path.into(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    /// Meters.
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederFile {
    pub edges: Vec<EdgeRecord>,
}

pub fn read_feeder(path: &Path) -> Result<FeederTopology, IoError> {
    let file: FeederFile = read_json(path)?;
    let raw: Vec<(usize, usize, f64)> = file.edges.iter().map(|e| (e.from, e.to, e.length)).collect();
    zrange_core::network::validate_topology(&raw).map_err(|e| content(path, e.to_string()))
}

pub fn write_feeder(path: &Path, topology: &FeederTopology) -> Result<(), IoError> {
    let edges = topology.edges().iter().map(|e| EdgeRecord { from: e.parent, to: e.child, length: e.length }).collect();
    write_json(path, &FeederFile { edges })
}

/// Cable catalogue in ohm per km with the per-unit base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryFile {
    /// Volts.
    pub v_base: f64,
    /// Volt-amperes.
    pub s_base: f64,
    pub types_ohm_per_km: Vec<(f64, f64)>,
}

impl LibraryFile {
    pub fn z_base(&self) -> f64 {
        self.v_base * self.v_base / self.s_base
    }

    pub fn build(&self, n_edges: usize, envelope: &LibraryEnvelope) -> Result<CableLibrary, IoError> {
        CableLibrary::from_ohm_per_km(&self.types_ohm_per_km, n_edges, self.z_base(), envelope)
            .map_err(|e| content(Path::new("library"), e.to_string()))
    }
}

pub fn read_library(path: &Path) -> Result<LibraryFile, IoError> {
    let lib: LibraryFile = read_json(path)?;
    if lib.types_ohm_per_km.is_empty() || !(lib.v_base > 0.0 && lib.s_base > 0.0) {
        return Err(content(path, "library needs at least one type and positive bases"));
    }
    Ok(lib)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub from: usize,
    pub to: usize,
    /// Per-unit.
    pub r: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub edges: Vec<TruthRecord>,
}

pub fn read_truth(path: &Path, topology: &FeederTopology) -> Result<Vec<f64>, IoError> {
    let file: TruthFile = read_json(path)?;
    let ne = topology.n_edges();
    let mut z = vec![f64::NAN; 2 * ne];
    for rec in &file.edges {
        let e = topology
            .edge_between(rec.from, rec.to)
            .ok_or_else(|| content(path, format!("edge ({}, {}) is not in the feeder", rec.from, rec.to)))?;
        z[e] = rec.r;
        z[ne + e] = rec.x;
    }
    if z.iter().any(|v| v.is_nan()) {
        return Err(content(path, "truth does not cover every edge"));
    }
    Ok(z)
}

pub fn write_truth(path: &Path, topology: &FeederTopology, z: &[f64]) -> Result<(), IoError> {
    let ne = topology.n_edges();
    let edges = topology
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| TruthRecord { from: edge.parent, to: edge.child, r: z[e], x: z[ne + e] })
        .collect();
    write_json(path, &TruthFile { edges })
}

#[derive(Debug, Serialize, Deserialize)]
struct MeterRow {
    t: usize,
    node: usize,
    p: f64,
    q: f64,
    v: Option<f64>,
}

pub fn write_meter_csv(path: &Path, data: &MeterDataset) -> Result<(), IoError> {
    let csv_err = |source| IoError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_writer(create(path)?);
    for t in 0..data.snapshots() {
        for node in 0..data.n_nodes() {
            let v = data.v2_at(t, node).map(f64::sqrt);
            w.serialize(MeterRow { t, node, p: data.p[(t, node)], q: data.q[(t, node)], v }).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|source| IoError::File { path: path.into(), source })
}

/// Reads meter CSV for a feeder with `n_nodes` nodes.
///
/// Snapshots must be numbered `0..T`, every node must appear in every
/// snapshot, and the set of metered nodes must not change over time.
pub fn read_meter_csv(path: &Path, n_nodes: usize) -> Result<MeterDataset, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|source| IoError::Csv { path: path.into(), source })?;
    let mut rows: Vec<MeterRow> = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.map_err(|source| IoError::Csv { path: path.into(), source })?);
    }
    let t_count = rows.iter().map(|r| r.t + 1).max().unwrap_or(0);
    if t_count == 0 || rows.len() != t_count * n_nodes {
        return Err(content(path, format!("expected {n_nodes} rows per snapshot")));
    }
    let mut p = DMatrix::from_element(t_count, n_nodes, f64::NAN);
    let mut q = DMatrix::zeros(t_count, n_nodes);
    let mut v: Vec<Vec<Option<f64>>> = vec![vec![None; n_nodes]; t_count];
    for row in &rows {
        if row.node >= n_nodes {
            return Err(content(path, format!("node {} outside the feeder", row.node)));
        }
        if !p[(row.t, row.node)].is_nan() {
            return Err(content(path, format!("duplicate row for t={}, node={}", row.t, row.node)));
        }
        p[(row.t, row.node)] = row.p;
        q[(row.t, row.node)] = row.q;
        v[row.t][row.node] = row.v;
    }
    let metered: Vec<usize> = (0..n_nodes).filter(|&n| v[0][n].is_some()).collect();
    if v.iter().any(|snap| (0..n_nodes).any(|n| snap[n].is_some() != metered.contains(&n))) {
        return Err(content(path, "metered nodes change between snapshots"));
    }
    let v2 = DMatrix::from_fn(t_count, metered.len(), |t, c| {
        let mag = v[t][metered[c]].expect("metered node has a value");
        mag * mag
    });
    MeterDataset::new(p, q, v2, metered).map_err(|e| content(path, e.to_string()))
}

/// Column headers `r_<from>_<to>` then `x_<from>_<to>` in edge order.
pub fn candidate_headers(topology: &FeederTopology) -> Vec<String> {
    let edges = topology.edges();
    let r = edges.iter().map(|e| format!("r_{}_{}", e.parent, e.child));
    let x = edges.iter().map(|e| format!("x_{}_{}", e.parent, e.child));
    r.chain(x).collect()
}

/// Candidate CSV preceded by a `# config <hash> stage <stage>` line.
pub fn write_candidates(
    path: &Path,
    topology: &FeederTopology,
    candidates: &CandidateMatrix,
    config_hash: &str,
) -> Result<(), IoError> {
    let stage = serde_json::to_value(candidates.stage).expect("stage serializes");
    let mut out = create(path)?;
    writeln!(out, "# config {config_hash} stage {}", stage.as_str().unwrap_or("unknown"))
        .map_err(|source| IoError::File { path: path.into(), source })?;
    let csv_err = |source| IoError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(candidate_headers(topology)).map_err(csv_err)?;
    for row in candidates.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|source| IoError::File { path: path.into(), source })
}

pub fn read_candidates(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let csv_err = |source| IoError::Csv { path: path.into(), source };
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(csv_err)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| content(path, e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// `A z <= b` as CSV: one row per half-space with its tag, coefficients and bound.
pub fn write_halfspaces(path: &Path, system: &HalfSpaceSystem, headers: &[String], config_hash: &str) -> Result<(), IoError> {
    let mut out = create(path)?;
    writeln!(out, "# config {config_hash}").map_err(|source| IoError::File { path: path.into(), source })?;
    let csv_err = |source| IoError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["tag".to_string()];
    header.extend(headers.iter().cloned());
    header.push("b".into());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..system.n_rows() {
        let mut rec = vec![format!("{:?}", system.tags[i])];
        rec.extend(system.a.row(i).iter().map(|v| v.to_string()));
        rec.push(system.b[i].to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| IoError::File { path: path.into(), source })
}
