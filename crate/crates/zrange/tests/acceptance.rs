//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs single-threaded unless `ZRANGE_WORKERS` is set.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use zrange::config::{
    load_sources, problem_from, DataSource, FeederSource, NoiseFamily, RunConfig, SweepSpec, SynthesisSpec,
};
use zrange::pipeline::{evaluate, identify, modeling_error, prepare, FailureKind};
use zrange::run::{identify_in_memory, run_identify, RunError};
use zrange_core::linalg::median;
use zrange_core::network::{degree2_chains, degree2_nodes};
use zrange_core::polytope::{HalfSpaceSystem, LibraryEnvelope, RowTag};
use zrange_core::refine::{library_distance, library_gradient, penalty, penalty_gradient};
use zrange_core::sample::{round_polytope, sample_walk, RoundingOptions, WalkOptions};
use zrange_core::simulate::{FlowModel, InjectionModel};
use zrange_core::synthetic::FeederSpec;
use zrange_core::thin::{facility_location_select, knn_graph};
use zrange_core::{rng_for, CableLibrary, CandidateMatrix, Stage};

const C1_DELTA_MAX: f64 = 1e-10;
const C1_CENTER_REL: f64 = 1e-6;
const C1_TIME: Duration = Duration::from_secs(10);

const C2_SLACK_FACTOR: f64 = 2.0;
const C2_MIN_SPAN: f64 = 0.10;
const C2_M: usize = 4000;
/// Loose library box for the chain check.
const C2_ENVELOPE: LibraryEnvelope =
    LibraryEnvelope { upper_factor: 2.0, lower_factor: 0.5, m_hi: 0.5, b_hi: 0.2, m_lo: 0.0, b_lo: 0.0 };

const C3_RATIO_TOL: f64 = 1e-6;
const C3_PF: f64 = 0.95;

const C4_CONTAINED: f64 = 0.90;
const C4_MAPE_MAX: f64 = 5.0;
const C4_TIME: Duration = Duration::from_secs(300);

const C5_M: usize = 100_000;
const C5_MEAN_TOL: f64 = 0.01;
const C5_VAR_REL: f64 = 0.05;
const C5_CENTROID_REL: f64 = 0.01;
const C5_KS_MAX: f64 = 0.01;
const C5_BINS: usize = 20;
/// Upper 1% point of chi-square with 19 degrees of freedom.
const C5_CHI2_CRIT: f64 = 36.191;
const C5_TIME: Duration = Duration::from_secs(30);

const C6_INSTANCES: usize = 50;
const C6_MAX_M: usize = 12;
const C6_TIME: Duration = Duration::from_secs(10);

const C7_POINTS: usize = 100;
const C7_H: f64 = 1e-6;
const C7_TOL: f64 = 1e-5;
const C7_MARGIN: f64 = 1e-3;

const C8_LENGTH_LEVELS: [f64; 3] = [0.0, 0.02, 0.05];
const C8_VOLTAGE_SIGMA: f64 = 0.005;
const C8_SEEDS: u64 = 10;
const C8_DELTA_GROWTH: f64 = 10.0;
const C8_M: usize = 5000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn feeder_config(n_nodes: usize, chains: Vec<usize>, seed: u64) -> RunConfig {
    RunConfig {
        feeder: FeederSource::Random(FeederSpec { n_nodes, chain_edges: chains, seed, ..FeederSpec::default() }),
        ..RunConfig::default()
    }
}

fn synthesis(cfg: &mut RunConfig) -> &mut SynthesisSpec {
    match &mut cfg.data {
        DataSource::Synthesize(s) => s,
        DataSource::File { .. } => unreachable!("acceptance configs are synthetic"),
    }
}

fn criterion_1() -> Result<Outcome, String> {
    let mut cfg = feeder_config(12, Vec::new(), 1);
    let s = synthesis(&mut cfg);
    s.model = FlowModel::LinDistFlow;
    s.snapshots = 10;
    cfg.snapshot_subset = None;
    let start = Instant::now();
    let sources = load_sources(&cfg).map_err(|e| e.to_string())?;
    if !degree2_nodes(&sources.topology).is_empty() {
        return Err("feeder has degree-2 nodes".into());
    }
    let problem = problem_from(&cfg, &sources).map_err(|e| e.to_string())?;
    let prep = prepare(&problem, &cfg.params()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let truth = sources.truth.as_ref().ok_or("no truth")?;
    let worst = prep.center.iter().zip(truth).map(|(c, t)| (c - t).abs() / t.abs()).fold(0.0, f64::max);
    Ok(outcome(
        prep.delta_star < C1_DELTA_MAX && worst <= C1_CENTER_REL && elapsed < C1_TIME,
        format!("delta*={:.2e} center rel err={worst:.2e} time={elapsed:.2?}", prep.delta_star),
    ))
}

/// Largest `|u|` and `|v|` over the polygon `|c_r u + c_x v| <= w`, by vertex enumeration.
fn polygon_extent(coeffs: &[(f64, f64)], w: f64) -> Option<(f64, f64)> {
    let lines: Vec<(f64, f64, f64)> = coeffs.iter().flat_map(|&(a, b)| [(a, b, w), (-a, -b, w)]).collect();
    let inside = |u: f64, v: f64| lines.iter().all(|&(a, b, c)| a * u + b * v <= c * (1.0 + 1e-9) + 1e-15);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a1, b1, c1) = lines[i];
            let (a2, b2, c2) = lines[j];
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-12 * (a1.hypot(b1) * a2.hypot(b2)) {
                continue;
            }
            let u = (c1 * b2 - c2 * b1) / det;
            let v = (a1 * c2 - a2 * c1) / det;
            if inside(u, v) {
                let (bu, bv) = best.unwrap_or((0.0, 0.0));
                best = Some((bu.max(u.abs()), bv.max(v.abs())));
            }
        }
    }
    best
}

fn criterion_2() -> Result<Outcome, String> {
    let mut cfg = feeder_config(16, vec![3], 0);
    cfg.m = C2_M;
    cfg.envelope = C2_ENVELOPE;
    let (problem, ident, _) = identify_in_memory(&cfg).map_err(|e| e.to_string())?;
    let chain = degree2_chains(&problem.topology).into_iter().next().ok_or("no chain")?;
    let ne = problem.topology.n_edges();
    let truth = problem.truth.as_ref().ok_or("no truth")?;
    let sys = &ident.polytope;
    let mut coeffs = Vec::new();
    for i in 0..sys.n_rows() {
        if !matches!(sys.tags[i], RowTag::Data { positive: true, .. }) {
            continue;
        }
        let (cr, cx) = (sys.a[(i, chain[0])], sys.a[(i, ne + chain[0])]);
        for &e in &chain[1..] {
            if (sys.a[(i, e)] - cr).abs() > 1e-12 * cr.abs().max(1.0) || (sys.a[(i, ne + e)] - cx).abs() > 1e-12 * cx.abs().max(1.0) {
                return Err("chain edges have different row coefficients".into());
            }
        }
        coeffs.push((cr, cx));
    }
    let (tol_r, tol_x) =
        polygon_extent(&coeffs, C2_SLACK_FACTOR * ident.slack).ok_or("unbounded chain-sum polygon")?;
    let sum = |z: &[f64], off: usize| chain.iter().map(|&e| z[off + e]).sum::<f64>();
    let (true_r, true_x) = (sum(truth, 0), sum(truth, ne));
    let mut worst: f64 = 0.0;
    for row in ident.sampled.rows() {
        worst = worst.max((sum(row, 0) - true_r).abs() / tol_r).max((sum(row, ne) - true_x).abs() / tol_x);
    }
    let span = |col: usize| {
        let c = ident.sampled.column(col);
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max) - c.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let min_span = chain.iter().map(|&e| (span(e) / true_r).min(span(ne + e) / true_x)).fold(f64::INFINITY, f64::min);
    Ok(outcome(
        worst <= 1.0 && min_span > C2_MIN_SPAN,
        format!("worst sum deviation {worst:.2} of tolerance, narrowest edge span {:.0}% of sum", 100.0 * min_span),
    ))
}

fn criterion_3() -> Result<Outcome, String> {
    let rank_for = |injection: InjectionModel| -> Result<(usize, Option<f64>), String> {
        let mut cfg = feeder_config(12, Vec::new(), 1);
        synthesis(&mut cfg).injection = injection;
        let sources = load_sources(&cfg).map_err(|e| e.to_string())?;
        let problem = problem_from(&cfg, &sources).map_err(|e| e.to_string())?;
        let prep = prepare(&problem, &cfg.params()).map_err(|e| e.to_string())?;
        Ok((prep.identifiability.numerical_rank, prep.identifiability.constant_ratio))
    };
    let (rank_pf, ratio) = rank_for(InjectionModel::FixedPowerFactor { power_factor: C3_PF, p_min: 0.005, p_max: 0.05 })?;
    let (rank_mixed, _) = rank_for(SynthesisSpec::default().injection)?;
    let expected = (1.0 - C3_PF * C3_PF).sqrt() / C3_PF;
    let ratio_ok = ratio.is_some_and(|t| (t - expected).abs() <= C3_RATIO_TOL);
    Ok(outcome(
        ratio_ok && 2 * rank_pf == rank_mixed,
        format!("ratio {ratio:?} vs {expected:.6}, rank {rank_pf} vs mixed {rank_mixed}"),
    ))
}

fn criterion_4() -> Result<Outcome, String> {
    let cfg = feeder_config(30, vec![2, 2, 3], 0);
    let start = Instant::now();
    let (_, _, ev) = identify_in_memory(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let ev = ev.ok_or("no evaluation")?;
    let (s, r) = (&ev.sampled, &ev.refined);
    let pass = ev.contained_fraction >= C4_CONTAINED
        && r.r.value <= C4_MAPE_MAX
        && r.x.value <= C4_MAPE_MAX
        && r.r.value < s.r.value
        && r.x.value < s.x.value
        && elapsed < C4_TIME;
    Ok(outcome(
        pass,
        format!(
            "contained {:.0}%, MAPE* r {:.2}% x {:.2}% (sampled r {:.2}% x {:.2}%) time={elapsed:.2?}",
            100.0 * ev.contained_fraction,
            r.r.value,
            r.x.value,
            s.r.value,
            s.x.value
        ),
    ))
}

fn box_system(lower: &[f64], upper: &[f64]) -> HalfSpaceSystem {
    let n = lower.len();
    let a = DMatrix::from_fn(2 * n, n, |i, j| if i / 2 != j { 0.0 } else if i % 2 == 0 { -1.0 } else { 1.0 });
    let b = DVector::from_fn(2 * n, |i, _| if i % 2 == 0 { -lower[i / 2] } else { upper[i / 2] });
    HalfSpaceSystem::new(a, b).expect("consistent box")
}

fn walk(system: &HalfSpaceSystem, seed: u64) -> Result<CandidateMatrix, String> {
    let rp = round_polytope(system, seed, &RoundingOptions::default()).map_err(|e| e.to_string())?;
    sample_walk(&rp, C5_M, seed, &WalkOptions::default()).map_err(|e| e.to_string())
}

fn mean_var(c: &[f64]) -> (f64, f64) {
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    (mean, c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

fn chi_square_uniform(c: &[f64], lo: f64, hi: f64) -> f64 {
    let mut counts = [0usize; C5_BINS];
    for &v in c {
        let k = (((v - lo) / (hi - lo)) * C5_BINS as f64) as usize;
        counts[k.min(C5_BINS - 1)] += 1;
    }
    let expected = c.len() as f64 / C5_BINS as f64;
    counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum()
}

fn ks_uniform(c: &[f64], lo: f64, hi: f64) -> f64 {
    let mut v = c.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn criterion_5() -> Result<Outcome, String> {
    let start = Instant::now();
    let mut fails = Vec::new();
    let mut chi_max: f64 = 0.0;

    let square = walk(&box_system(&[0.0, 0.0], &[1.0, 1.0]), 11)?;
    for j in 0..2 {
        let col = square.column(j);
        let (m, v) = mean_var(&col);
        if (m - 0.5).abs() > C5_MEAN_TOL || (v * 12.0 - 1.0).abs() > C5_VAR_REL {
            fails.push(format!("square coord {j}: mean {m:.4} var {v:.5}"));
        }
        chi_max = chi_max.max(chi_square_uniform(&col, 0.0, 1.0));
    }

    let tri = HalfSpaceSystem::new(
        DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]),
        DVector::from_row_slice(&[0.0, 0.0, 1.0]),
    )
    .map_err(|e| e.to_string())?;
    let tri = walk(&tri, 12)?;
    for j in 0..2 {
        let (m, _) = mean_var(&tri.column(j));
        if (m * 3.0 - 1.0).abs() > C5_CENTROID_REL {
            fails.push(format!("triangle centroid coord {j}: {m:.4}"));
        }
    }

    let (lo, hi) = ([-3.0, 0.0, 10.0], [1e3, 1e-3, 10.5]);
    let aniso = walk(&box_system(&lo, &hi), 13)?;
    for j in 0..3 {
        let col = aniso.column(j);
        let (m, v) = mean_var(&col);
        let w = hi[j] - lo[j];
        let mean_err = ((m - lo[j]) / w - 0.5).abs();
        if mean_err > C5_MEAN_TOL || (v * 12.0 / (w * w) - 1.0).abs() > C5_VAR_REL {
            fails.push(format!("anisotropic coord {j}: mean {m:.4} var {v:.4e}"));
        }
        chi_max = chi_max.max(chi_square_uniform(&col, lo[j], hi[j]));
    }
    if chi_max > C5_CHI2_CRIT {
        fails.push(format!("chi-square {chi_max:.1}"));
    }

    let (a, b) = (2.0, 5.0);
    let seg = walk(&box_system(&[a], &[b]), 14)?;
    let ks = ks_uniform(&seg.column(0), a, b);
    if ks >= C5_KS_MAX {
        fails.push(format!("segment KS {ks:.4}"));
    }

    let elapsed = start.elapsed();
    if elapsed >= C5_TIME {
        fails.push("too slow".into());
    }
    Ok(outcome(
        fails.is_empty(),
        format!("max chi-square {chi_max:.1}, segment KS {ks:.4}, time={elapsed:.2?} {}", fails.join("; ")),
    ))
}

/// Facility-location value computed from raw distances.
fn oracle_value(points: &[Vec<f64>], k: usize, subset: &[usize]) -> f64 {
    let m = points.len();
    let dist = |i: usize, j: usize| points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let d_max = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| dist(i, j)).fold(0.0, f64::max);
    (0..m)
        .map(|i| {
            let mut others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist(i, a).total_cmp(&dist(i, b)).then(a.cmp(&b)));
            let mut best = if subset.contains(&i) { d_max } else { 0.0 };
            for &j in others.iter().take(k) {
                if subset.contains(&j) {
                    best = f64::max(best, d_max - dist(i, j));
                }
            }
            best
        })
        .sum()
}

fn criterion_6() -> Result<Outcome, String> {
    let start = Instant::now();
    let mut rng = rng_for(6, 0);
    let bound = 1.0 - (-1.0f64).exp();
    let mut worst = f64::INFINITY;
    for _ in 0..C6_INSTANCES {
        let m = rng.random_range(3..=C6_MAX_M);
        let dim = rng.random_range(1..=4);
        let k = rng.random_range(1..m);
        let count = rng.random_range(1..=m.min(5));
        let points: Vec<Vec<f64>> = (0..m).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let mut mat = CandidateMatrix::new(dim, Stage::Refined);
        for p in &points {
            mat.push_row(p);
        }
        let graph = knn_graph(&mat, k).map_err(|e| e.to_string())?;
        let greedy = facility_location_select(&graph, count).map_err(|e| e.to_string())?;
        let greedy_value = oracle_value(&points, k, &greedy);
        let mut optimum: f64 = 0.0;
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize == count {
                let subset: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
                optimum = optimum.max(oracle_value(&points, k, &subset));
            }
        }
        worst = worst.min(greedy_value / optimum);
    }
    let elapsed = start.elapsed();
    Ok(outcome(
        worst >= bound && elapsed < C6_TIME,
        format!("worst greedy/optimum {worst:.4} (bound {bound:.4}) time={elapsed:.2?}"),
    ))
}

fn central_difference(f: &dyn Fn(&[f64]) -> f64, z: &[f64]) -> Vec<f64> {
    (0..z.len())
        .map(|j| {
            let (mut up, mut down) = (z.to_vec(), z.to_vec());
            up[j] += C7_H;
            down[j] -= C7_H;
            (f(&up) - f(&down)) / (2.0 * C7_H)
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_7() -> Result<Outcome, String> {
    let types = [(0.3, 0.1), (0.8, 0.4), (1.5, 0.2), (0.5, 0.9)];
    let ne = 3;
    let envelope = LibraryEnvelope { upper_factor: 1.5, lower_factor: 0.5, m_hi: 1.0, b_hi: 1.0, m_lo: 0.0, b_lo: 0.0 };
    let lib = CableLibrary::from_ohm_per_km(&types, ne, 1e-3, &envelope).map_err(|e| e.to_string())?;
    let mut rng = rng_for(7, 0);
    let mut worst_q: f64 = 0.0;
    let mut accepted = 0;
    while accepted < C7_POINTS {
        let lengths: Vec<f64> = (0..ne).map(|_| rng.random_range(0.5..2.0)).collect();
        let z: Vec<f64> = (0..2 * ne).map(|_| rng.random_range(0.0..2.5)).collect();
        let clear = (0..ne).all(|e| {
            let mut d: Vec<f64> =
                types.iter().map(|&(r, x)| (z[e] - r * lengths[e]).hypot(z[ne + e] - x * lengths[e])).collect();
            d.sort_by(f64::total_cmp);
            d[0] > C7_MARGIN && d[1] - d[0] > C7_MARGIN
        });
        if !clear {
            continue;
        }
        accepted += 1;
        let g = library_gradient(&z, &lib, &lengths).map_err(|e| e.to_string())?;
        let fd = central_difference(&|p| library_distance(p, &lib, &lengths).expect("dims"), &z);
        worst_q = worst_q.max(max_abs_diff(&g, &fd));
    }

    let mut worst_p: f64 = 0.0;
    accepted = 0;
    while accepted < C7_POINTS {
        let (rows, n) = (rng.random_range(1..12), rng.random_range(1..7));
        let a = DMatrix::from_fn(rows, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0));
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rho = rng.random_range(0.01..10.0);
        let sys = HalfSpaceSystem::new(a, b).map_err(|e| e.to_string())?;
        let resid = &sys.a * DVector::from_column_slice(&z) - &sys.b;
        if resid.iter().any(|r| r.abs() < C7_MARGIN) {
            continue;
        }
        accepted += 1;
        let g = penalty_gradient(&sys, &z, rho);
        let fd = central_difference(&|p| penalty(&sys, p, rho), &z);
        worst_p = worst_p.max(max_abs_diff(&g, &fd));
    }
    Ok(outcome(
        worst_q <= C7_TOL && worst_p <= C7_TOL,
        format!("max FD error: library distance {worst_q:.2e}, penalty {worst_p:.2e}"),
    ))
}

fn criterion_8() -> Result<Outcome, String> {
    let mut base = feeder_config(30, vec![2, 2, 3], 0);
    base.m = C8_M;
    base.sweep = Some(SweepSpec { family: NoiseFamily::Length, levels: C8_LENGTH_LEVELS.to_vec(), seeds: C8_SEEDS as usize });
    let sources = load_sources(&base).map_err(|e| e.to_string())?;

    let mut medians = Vec::new();
    let mut failed = 0;
    for &level in &C8_LENGTH_LEVELS {
        let (mut r, mut x) = (Vec::new(), Vec::new());
        for offset in 0..C8_SEEDS {
            let cell = base.sweep_cell(NoiseFamily::Length, level, offset);
            let problem = problem_from(&cell, &sources).map_err(|e| e.to_string())?;
            match identify(&problem, &cell.params()) {
                Ok(ident) => {
                    let truth = problem.truth.as_ref().ok_or("no truth")?;
                    let ev = evaluate(&ident, &problem.topology, truth).map_err(|e| e.to_string())?;
                    r.push(ev.refined.r.value);
                    x.push(ev.refined.x.value);
                }
                Err(_) => failed += 1,
            }
        }
        medians.push((median(&r), median(&x)));
    }
    let monotone = medians.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1);

    base.sweep = None;
    let mut voltage_ok = 0;
    for offset in 0..C8_SEEDS {
        let clean = base.sweep_cell(NoiseFamily::Voltage, 0.0, offset);
        let noisy = base.sweep_cell(NoiseFamily::Voltage, C8_VOLTAGE_SIGMA, offset);
        let d0 = modeling_error(&problem_from(&clean, &sources).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let noisy_problem = problem_from(&noisy, &sources).map_err(|e| e.to_string())?;
        let d1 = modeling_error(&noisy_problem).map_err(|e| e.to_string())?;
        let infeasible = matches!(prepare(&noisy_problem, &noisy.params()), Err(e) if e.kind == FailureKind::InfeasibleData);
        if infeasible || d1 > C8_DELTA_GROWTH * d0 {
            voltage_ok += 1;
        }
    }
    let fmt: Vec<String> = medians.iter().map(|(r, x)| format!("{r:.2}/{x:.2}")).collect();
    Ok(outcome(
        monotone && voltage_ok == C8_SEEDS,
        format!(
            "median MAPE* r/x by length sigma [{}] ({failed} cells without a range), voltage noise flagged {voltage_ok}/{C8_SEEDS}",
            fmt.join(", ")
        ),
    ))
}

fn run_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|entry| {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.file_name().is_some_and(|n| n == "config.json") {
                return Ok(None);
            }
            let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
            Ok(Some((path.file_name().unwrap_or_default().to_string_lossy().into_owned(), bytes)))
        })
        .filter_map(Result::transpose)
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn criterion_9() -> Result<Outcome, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = feeder_config(30, vec![2, 2, 3], 0);
    cfg.m = 3000;
    cfg.m_prime = Some(20);
    cfg.output_dir = tmp.path().join("first");
    let first = run_identify(&cfg).map_err(|e: RunError| e.to_string())?;
    cfg.output_dir = tmp.path().join("second");
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().map_err(|e| e.to_string())?;
    let second = pool.install(|| run_identify(&cfg)).map_err(|e| e.to_string())?;
    let (a, b) = (run_files(&first.dir)?, run_files(&second.dir)?);
    let names: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    Ok(outcome(
        a.len() == b.len() && differing.is_empty() && names.len() >= 6,
        format!("{} artifacts compared: {}; differing: {differing:?}", names.len(), names.join(", ")),
    ))
}

fn main() -> ExitCode {
    let workers = std::env::var("ZRANGE_WORKERS").ok().and_then(|v| v.parse().ok()).unwrap_or(1);
    rayon::ThreadPoolBuilder::new().num_threads(workers).build_global().expect("global pool");

    type Check = fn() -> Result<Outcome, String>;
    let criteria: [(usize, Check); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failures = 0;
    for (n, check) in criteria {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!("criterion {n}: {} [{:.1?}] {detail}", if pass { "PASS" } else { "FAIL" }, start.elapsed());
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
