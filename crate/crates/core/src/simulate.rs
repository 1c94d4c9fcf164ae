//! Ground-truth generation: exact AC power flow on radial feeders, the
//! LinDistFlow forward model, synthetic meter datasets and noise injection.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::network::{aggregate_injections, FeederTopology, MeterDataset, NetworkError};
use crate::refine::CableLibrary;
use crate::{rng_for, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("power flow did not converge after {iterations} iterations{}", snapshot.map(|t| alloc::format!(" (snapshot {t})")).unwrap_or_default())]
    NonConvergence { iterations: usize, snapshot: Option<usize> },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), SimulateError> {
    if expected == found {
        Ok(())
    } else {
        Err(SimulateError::DimensionMismatch { what, expected, found })
    }
}

/// Per-edge cable choice and the impedance vector it implies.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruthAssignment {
    /// Library index per edge.
    pub cable: Vec<usize>,
    /// `[r, x]` in per-unit.
    pub z: Vec<f64>,
}

impl GroundTruthAssignment {
    pub fn from_choice(topology: &FeederTopology, library: &CableLibrary, cable: Vec<usize>) -> Result<Self, SimulateError> {
        let n = topology.n_edges();
        check_len("cable choice", n, cable.len())?;
        check_len("library edges", n, library.n_edges())?;
        let mut z = vec![0.0; 2 * n];
        for (e, &k) in cable.iter().enumerate() {
            let c = *library
                .candidates(e)
                .get(k)
                .ok_or(SimulateError::InvalidParameter("cable index outside the edge library"))?;
            let len = topology.edge(e).length;
            z[e] = len * c.re;
            z[n + e] = len * c.im;
        }
        Ok(Self { cable, z })
    }

    /// Uniformly random cable per edge.
    pub fn random(topology: &FeederTopology, library: &CableLibrary, seed: u64) -> Result<Self, SimulateError> {
        let mut rng = rng_for(seed, 0);
        let cable = (0..topology.n_edges()).map(|e| rng.random_range(0..library.candidates(e).len())).collect();
        Self::from_choice(topology, library, cable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFlowOptions {
    /// Convergence threshold on the largest nodal voltage update (per-unit).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 100 }
    }
}

/// Backward/forward sweep with constant-power loads; returns nodal complex voltages.
///
/// `p` and `q` are nodal consumption in per-unit; the root is a slack at
/// `root_v` with zero angle.
pub fn ac_power_flow(
    topology: &FeederTopology,
    z: &[f64],
    p: &[f64],
    q: &[f64],
    root_v: f64,
    opts: &PowerFlowOptions,
) -> Result<Vec<Complex<f64>>, SimulateError> {
    let (n, ne) = (topology.n_nodes(), topology.n_edges());
    check_len("impedance vector", 2 * ne, z.len())?;
    check_len("P injections", n, p.len())?;
    check_len("Q injections", n, q.len())?;

    let mut v = vec![Complex::new(root_v, 0.0); n];
    let mut branch = vec![Complex::new(0.0, 0.0); ne];
    for iteration in 1..=opts.max_iterations {
        for e in (0..ne).rev() {
            let child = topology.edge(e).child;
            let load = Complex::new(p[child], q[child]);
            let mut current = (load / v[child]).conj();
            for &c in topology.child_edges(child) {
                current += branch[c];
            }
            branch[e] = current;
        }
        let mut max_update = 0.0f64;
        for (e, edge) in topology.edges().iter().enumerate() {
            let zb = Complex::new(z[e], z[ne + e]);
            let next = v[edge.parent] - zb * branch[e];
            let d = next - v[edge.child];
            max_update = max_update.max(libm::hypot(d.re, d.im));
            v[edge.child] = next;
        }
        let collapsed = v.iter().any(|x| !(x.re.is_finite() && x.im.is_finite()) || libm::hypot(x.re, x.im) < 1e-3);
        if collapsed {
            return Err(SimulateError::NonConvergence { iterations: iteration, snapshot: None });
        }
        if max_update < opts.tolerance {
            return Ok(v);
        }
    }
    Err(SimulateError::NonConvergence { iterations: opts.max_iterations, snapshot: None })
}

/// Largest mismatch between computed and specified nodal complex power.
pub fn power_balance_residual(topology: &FeederTopology, z: &[f64], p: &[f64], q: &[f64], v: &[Complex<f64>]) -> f64 {
    let ne = topology.n_edges();
    let currents: Vec<Complex<f64>> = topology
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| (v[edge.parent] - v[edge.child]) / Complex::new(z[e], z[ne + e]))
        .collect();
    let mut worst = 0.0f64;
    for node in 1..topology.n_nodes() {
        let mut into = currents[topology.parent_edge(node).expect("non-root node")];
        for &c in topology.child_edges(node) {
            into -= currents[c];
        }
        let s = v[node] * into.conj();
        worst = worst.max(libm::hypot(s.re - p[node], s.im - q[node]));
    }
    worst
}

/// LinDistFlow squared voltages `T x N`, telescoped from the root.
///
/// `root_v2[t]` is the slack squared voltage; with all ones this is the
/// textbook flat-start form.
pub fn lindistflow_forward(
    topology: &FeederTopology,
    z: &[f64],
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    root_v2: &[f64],
) -> Result<DMatrix<f64>, SimulateError> {
    let ne = topology.n_edges();
    check_len("impedance vector", 2 * ne, z.len())?;
    check_len("root voltages", p.nrows(), root_v2.len())?;
    let flows = aggregate_injections(topology, p, q)?;
    let t_count = p.nrows();
    let mut v2 = DMatrix::zeros(t_count, topology.n_nodes());
    for t in 0..t_count {
        v2[(t, 0)] = root_v2[t];
        // Preorder guarantees the parent is filled before the child.
        for (e, edge) in topology.edges().iter().enumerate() {
            let drop = 2.0 * (z[e] * flows.p[(t, e)] + z[ne + e] * flows.q[(t, e)]);
            v2[(t, edge.child)] = v2[(t, edge.parent)] - drop;
        }
    }
    Ok(v2)
}

/// How leaf injections are drawn for each snapshot.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum InjectionModel {
    /// `P ~ U[p_min, p_max]`, `Q = P tan(acos pf)`.
    FixedPowerFactor { power_factor: f64, p_min: f64, p_max: f64 },
    /// Independent `P ~ U[p_min, p_max]` and `Q ~ U[q_min, q_max]`.
    IndependentUniform { p_min: f64, p_max: f64, q_min: f64, q_max: f64 },
    /// Replays rows of recorded per-leaf profiles (cycled if `T` exceeds them).
    Profile { p: Vec<Vec<f64>>, q: Vec<Vec<f64>> },
}

impl InjectionModel {
    /// Nodal `(P, Q)` for snapshot `t`; inner nodes stay unloaded.
    pub fn sample(&self, t: usize, topology: &FeederTopology, rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>), SimulateError> {
        let n = topology.n_nodes();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        match self {
            Self::FixedPowerFactor { power_factor, p_min, p_max } => {
                if !(*power_factor > 0.0 && *power_factor <= 1.0) || p_min > p_max {
                    return Err(SimulateError::InvalidParameter("power factor must lie in (0, 1] and p_min <= p_max"));
                }
                let tan_phi = libm::tan(libm::acos(*power_factor));
                for &leaf in topology.leaves() {
                    p[leaf] = p_min + (p_max - p_min) * rng.random::<f64>();
                    q[leaf] = p[leaf] * tan_phi;
                }
            }
            Self::IndependentUniform { p_min, p_max, q_min, q_max } => {
                if p_min > p_max || q_min > q_max {
                    return Err(SimulateError::InvalidParameter("uniform ranges must be ordered"));
                }
                for &leaf in topology.leaves() {
                    p[leaf] = p_min + (p_max - p_min) * rng.random::<f64>();
                    q[leaf] = q_min + (q_max - q_min) * rng.random::<f64>();
                }
            }
            Self::Profile { p: pp, q: qq } => {
                if pp.is_empty() || pp.len() != qq.len() {
                    return Err(SimulateError::InvalidParameter("profile P and Q must be nonempty with equal rows"));
                }
                let row = t % pp.len();
                let leaves = topology.leaves();
                check_len("profile columns", leaves.len(), pp[row].len())?;
                check_len("profile columns", leaves.len(), qq[row].len())?;
                for (k, &leaf) in leaves.iter().enumerate() {
                    p[leaf] = pp[row][k];
                    q[leaf] = qq[row][k];
                }
            }
        }
        Ok((p, q))
    }
}

/// Physics used to produce the voltages of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FlowModel {
    Ac,
    LinDistFlow,
}

/// Injections and squared voltages at every node for one snapshot.
pub fn simulate_snapshot(
    topology: &FeederTopology,
    z: &[f64],
    injection: &InjectionModel,
    model: FlowModel,
    root_v: f64,
    seed: u64,
    t: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), SimulateError> {
    let mut rng = rng_for(seed, t as u64);
    let (p, q) = injection.sample(t, topology, &mut rng)?;
    let v2 = match model {
        FlowModel::Ac => ac_power_flow(topology, z, &p, &q, root_v, &PowerFlowOptions::default())
            .map_err(|e| match e {
                SimulateError::NonConvergence { iterations, .. } => {
                    SimulateError::NonConvergence { iterations, snapshot: Some(t) }
                }
                other => other,
            })?
            .iter()
            .map(|v| v.re * v.re + v.im * v.im)
            .collect(),
        FlowModel::LinDistFlow => {
            let pm = DMatrix::from_row_slice(1, p.len(), &p);
            let qm = DMatrix::from_row_slice(1, q.len(), &q);
            let v2 = lindistflow_forward(topology, z, &pm, &qm, &[root_v * root_v])?;
            v2.row(0).iter().copied().collect()
        }
    };
    Ok((p, q, v2))
}

/// Assembles a dataset from per-snapshot results, keeping voltages at the root and leaves only.
pub fn assemble_dataset(
    topology: &FeederTopology,
    snapshots: &[(Vec<f64>, Vec<f64>, Vec<f64>)],
) -> Result<MeterDataset, SimulateError> {
    let n = topology.n_nodes();
    let mut voltage_nodes = vec![0];
    voltage_nodes.extend_from_slice(topology.leaves());
    let t_count = snapshots.len();
    let p = DMatrix::from_fn(t_count, n, |t, j| snapshots[t].0[j]);
    let q = DMatrix::from_fn(t_count, n, |t, j| snapshots[t].1[j]);
    let v2 = DMatrix::from_fn(t_count, voltage_nodes.len(), |t, c| snapshots[t].2[voltage_nodes[c]]);
    Ok(MeterDataset::new(p, q, v2, voltage_nodes)?)
}

/// `T` snapshots of smart-meter data from the given ground truth.
pub fn make_dataset(
    topology: &FeederTopology,
    z_true: &[f64],
    injection: &InjectionModel,
    snapshots: usize,
    model: FlowModel,
    root_v: f64,
    seed: u64,
) -> Result<MeterDataset, SimulateError> {
    if snapshots == 0 {
        return Err(SimulateError::InvalidParameter("at least one snapshot is required"));
    }
    let rows = (0..snapshots)
        .map(|t| simulate_snapshot(topology, z_true, injection, model, root_v, seed, t))
        .collect::<Result<Vec<_>, _>>()?;
    assemble_dataset(topology, &rows)
}

/// Noise families applied to identification inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NoiseSpec {
    /// Relative gaussian standard deviation on branch lengths.
    pub length_sigma: f64,
    /// Relative uniform half-width on P and Q (drawn independently).
    pub injection_halfwidth: f64,
    /// Relative gaussian standard deviation on voltage magnitudes.
    pub voltage_sigma: f64,
    pub seed: u64,
}

const LENGTH_STREAM: u64 = 0x1e47;
const INJECTION_STREAM: u64 = 0x1a7e;
const VOLTAGE_STREAM: u64 = 0x7017;

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), SimulateError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.length_sigma) && ok(self.injection_halfwidth) && ok(self.voltage_sigma) {
            Ok(())
        } else {
            Err(SimulateError::InvalidParameter("noise levels must be finite and non-negative"))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.length_sigma == 0.0 && self.injection_halfwidth == 0.0 && self.voltage_sigma == 0.0
    }
}

/// `l' = l (1 + N(0, sigma^2))`, clipped to stay positive.
pub fn noisy_lengths(lengths: &[f64], spec: &NoiseSpec) -> Result<Vec<f64>, SimulateError> {
    spec.validate()?;
    if spec.length_sigma == 0.0 {
        return Ok(lengths.to_vec());
    }
    let mut rng = rng_for(spec.seed, LENGTH_STREAM);
    Ok(lengths
        .iter()
        .map(|&l| {
            let eps: f64 = StandardNormal.sample(&mut rng);
            (l * (1.0 + spec.length_sigma * eps)).max(1e-3 * l)
        })
        .collect())
}

/// Multiplicative injection and voltage noise on a copy of `data`.
///
/// Voltage noise acts on the magnitude before squaring.
pub fn noisy_dataset(data: &MeterDataset, spec: &NoiseSpec) -> Result<MeterDataset, SimulateError> {
    spec.validate()?;
    let mut out = data.clone();
    if spec.injection_halfwidth > 0.0 {
        let mut rng = rng_for(spec.seed, INJECTION_STREAM);
        let h = spec.injection_halfwidth;
        for t in 0..out.snapshots() {
            for j in 0..out.n_nodes() {
                out.p[(t, j)] *= 1.0 + h * (2.0 * rng.random::<f64>() - 1.0);
                out.q[(t, j)] *= 1.0 + h * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
    }
    if spec.voltage_sigma > 0.0 {
        let mut rng = rng_for(spec.seed, VOLTAGE_STREAM);
        for t in 0..out.snapshots() {
            for c in 0..out.v2.ncols() {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let v = libm::sqrt(out.v2[(t, c)]) * (1.0 + spec.voltage_sigma * eps);
                out.v2[(t, c)] = (v * v).max(f64::MIN_POSITIVE);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate_topology;
    use crate::synthetic::{random_feeder, FeederSpec};

    #[test]
    fn no_load_is_flat() {
        let t = validate_topology(&[(0, 1, 10.0), (1, 2, 10.0), (1, 3, 5.0)]).unwrap();
        let z = [0.01, 0.02, 0.03, 0.005, 0.006, 0.007];
        let v = ac_power_flow(&t, &z, &[0.0; 4], &[0.0; 4], 1.02, &PowerFlowOptions::default()).unwrap();
        for x in v {
            assert!((libm::hypot(x.re, x.im) - 1.02).abs() < 1e-14);
        }
    }

    #[test]
    fn two_bus_matches_closed_form() {
        // |V|^4 + (2(rP + xQ) - V0^2)|V|^2 + |z|^2 |S|^2 = 0, larger root.
        let t = validate_topology(&[(0, 1, 1.0)]).unwrap();
        for &(r, x, p, q) in &[(0.01, 0.0, 0.1, 0.0), (0.02, 0.01, 0.3, 0.1), (0.05, 0.04, 0.5, -0.2)] {
            let v = ac_power_flow(&t, &[r, x], &[0.0, p], &[0.0, q], 1.0, &PowerFlowOptions::default()).unwrap();
            let b = 2.0 * (r * p + x * q) - 1.0;
            let c = (r * r + x * x) * (p * p + q * q);
            let u = (-b + libm::sqrt(b * b - 4.0 * c)) / 2.0;
            let got = v[1].re * v[1].re + v[1].im * v[1].im;
            assert!((got - u).abs() < 1e-10, "r={r} got {got} want {u}");
        }
    }

    #[test]
    fn ac_power_balance_on_random_feeder() {
        let t = random_feeder(&FeederSpec { n_nodes: 10, chain_edges: vec![], seed: 3, ..FeederSpec::default() }).unwrap();
        let ne = t.n_edges();
        let mut rng = rng_for(11, 0);
        let z: Vec<f64> = (0..2 * ne).map(|_| 0.002 + 0.01 * rng.random::<f64>()).collect();
        let (p, q) = InjectionModel::IndependentUniform { p_min: 0.0, p_max: 0.1, q_min: -0.03, q_max: 0.05 }
            .sample(0, &t, &mut rng)
            .unwrap();
        let v = ac_power_flow(&t, &z, &p, &q, 1.0, &PowerFlowOptions::default()).unwrap();
        assert!(power_balance_residual(&t, &z, &p, &q, &v) < 1e-8);
    }

    #[test]
    fn infeasible_loading_does_not_converge() {
        let t = validate_topology(&[(0, 1, 1.0)]).unwrap();
        let r = ac_power_flow(&t, &[0.5, 0.5], &[0.0, 5.0], &[0.0, 5.0], 1.0, &PowerFlowOptions::default());
        assert!(matches!(r, Err(SimulateError::NonConvergence { .. })));
    }

    #[test]
    fn lindistflow_direct_substitution() {
        let t = validate_topology(&[(0, 1, 1.0)]).unwrap();
        let zero = lindistflow_forward(&t, &[0.0, 0.0], &DMatrix::from_row_slice(1, 2, &[0.0, 1.0]), &DMatrix::zeros(1, 2), &[1.0]).unwrap();
        assert_eq!(zero[(0, 1)], 1.0);
        let v2 = lindistflow_forward(
            &t,
            &[0.01, 0.005],
            &DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            &DMatrix::from_row_slice(1, 2, &[0.0, 0.5]),
            &[1.0],
        )
        .unwrap();
        assert!((v2[(0, 1)] - 0.975).abs() < 1e-15);
    }

    #[test]
    fn lindistflow_matches_per_leaf_telescoping() {
        let t = random_feeder(&FeederSpec { n_nodes: 25, chain_edges: vec![3], seed: 5, ..FeederSpec::default() }).unwrap();
        let ne = t.n_edges();
        let mut rng = rng_for(2, 0);
        let z: Vec<f64> = (0..2 * ne).map(|_| 0.01 * rng.random::<f64>()).collect();
        let model = InjectionModel::IndependentUniform { p_min: 0.0, p_max: 0.1, q_min: -0.02, q_max: 0.04 };
        let (p, q) = model.sample(0, &t, &mut rng).unwrap();
        let pm = DMatrix::from_row_slice(1, p.len(), &p);
        let qm = DMatrix::from_row_slice(1, q.len(), &q);
        let v2 = lindistflow_forward(&t, &z, &pm, &qm, &[1.0]).unwrap();
        // Naive: for every node, walk up the path and sum drops using brute-force subtree sums.
        for node in 0..t.n_nodes() {
            let mut expected = 1.0;
            for e in t.path_edges(node) {
                let below = subtree(&t, t.edge(e).child);
                let pb: f64 = below.iter().map(|&k| p[k]).sum();
                let qb: f64 = below.iter().map(|&k| q[k]).sum();
                expected -= 2.0 * (z[e] * pb + z[ne + e] * qb);
            }
            assert!((v2[(0, node)] - expected).abs() < 1e-14);
        }
    }

    fn subtree(t: &FeederTopology, root: usize) -> Vec<usize> {
        let mut out = vec![root];
        let mut i = 0;
        while i < out.len() {
            for &e in t.child_edges(out[i]) {
                out.push(t.edge(e).child);
            }
            i += 1;
        }
        out
    }

    #[test]
    fn fixed_power_factor_dataset() {
        let t = validate_topology(&[(0, 1, 30.0), (1, 2, 20.0), (1, 3, 25.0)]).unwrap();
        let z = [0.01, 0.012, 0.009, 0.002, 0.002, 0.002];
        let model = InjectionModel::FixedPowerFactor { power_factor: 0.95, p_min: 0.01, p_max: 0.05 };
        let d = make_dataset(&t, &z, &model, 5, FlowModel::Ac, 1.0, 9).unwrap();
        let tan_phi = libm::tan(libm::acos(0.95));
        for tt in 0..5 {
            for &leaf in t.leaves() {
                assert!((d.q[(tt, leaf)] - d.p[(tt, leaf)] * tan_phi).abs() < 1e-15);
            }
        }
        assert_eq!(d.voltage_nodes, vec![0, 2, 3]);
        assert!(matches!(make_dataset(&t, &z, &model, 0, FlowModel::Ac, 1.0, 9), Err(SimulateError::InvalidParameter(_))));
    }

    #[test]
    fn zero_load_dataset_is_flat() {
        let t = validate_topology(&[(0, 1, 30.0), (1, 2, 20.0)]).unwrap();
        let model = InjectionModel::IndependentUniform { p_min: 0.0, p_max: 0.0, q_min: 0.0, q_max: 0.0 };
        let d = make_dataset(&t, &[0.01, 0.01, 0.001, 0.001], &model, 1, FlowModel::Ac, 1.0, 0).unwrap();
        assert!(d.v2.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn noise_is_deterministic_and_identity_when_zero() {
        let t = validate_topology(&[(0, 1, 30.0), (1, 2, 20.0), (1, 3, 25.0)]).unwrap();
        let model = InjectionModel::IndependentUniform { p_min: 0.01, p_max: 0.05, q_min: 0.0, q_max: 0.02 };
        let d = make_dataset(&t, &[0.01, 0.012, 0.009, 0.002, 0.002, 0.002], &model, 4, FlowModel::Ac, 1.0, 1).unwrap();
        let zero = NoiseSpec::default();
        assert_eq!(noisy_dataset(&d, &zero).unwrap(), d);
        assert_eq!(noisy_lengths(&[1.0, 2.0], &zero).unwrap(), vec![1.0, 2.0]);

        let spec = NoiseSpec { length_sigma: 0.05, injection_halfwidth: 0.1, voltage_sigma: 0.005, seed: 4 };
        assert_eq!(noisy_dataset(&d, &spec).unwrap(), noisy_dataset(&d, &spec).unwrap());
        assert_eq!(noisy_lengths(&[1.0, 2.0], &spec).unwrap(), noisy_lengths(&[1.0, 2.0], &spec).unwrap());
        assert_ne!(noisy_dataset(&d, &spec).unwrap(), d);

        let bad = NoiseSpec { voltage_sigma: -1.0, ..zero };
        assert!(noisy_dataset(&d, &bad).is_err());
    }

    #[test]
    fn length_noise_has_requested_spread() {
        let spec = NoiseSpec { length_sigma: 0.05, seed: 17, ..NoiseSpec::default() };
        let out = noisy_lengths(&vec![1.0; 10_000], &spec).unwrap();
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        let var = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (out.len() - 1) as f64;
        let sd = libm::sqrt(var);
        assert!((sd - 0.05).abs() < 0.005, "sd {sd}");
        assert!(out.iter().all(|&v| v > 0.0));
    }
}
