//! Joint node and coding scheme selection.
//!
//! Every node is replaced by a deterministic proxy of its expected time:
//!
//! ```text
//! B_(i,j) = c D + 1/γ + 2τ/(1-p) + τ_i/(1-p_i)      (worker, incl. edge download)
//! A_i     = τ_i/(1-p_i)                             (edge upload)
//! T̂(s_e, s_w) = min_{(n-s_e)-th} ( A_i + min_{(m_i-s_w)-th} B_(i,j) )
//! ```
//!
//! [`solve`] sweeps all tolerances and keeps the argmin; [`brute_force_solve`]
//! enumerates every node selection and certifies the result. The expected gap
//! between `T̂` and the true expected runtime is bounded via order-statistic
//! moments ([`order_stat_gap_bound`], [`theorem3_bound`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::allocate;
use crate::combinatorics::{binomial, Combinations};
use crate::rng::Streams;
use crate::runtime::{IterationSample, RawDraws, RuntimeError, SystemProfile};
use crate::stats::{chunked, Moments};
use crate::topology::{Tolerance, Topology};

/// Largest number of node selections [`brute_force_solve`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// Negative radicands down to this are treated as rounding noise.
const RADICAND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JncssError {
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("no tolerance in the domain yields a usable scheme ({skipped} candidates skipped)")]
    NoFeasibleTolerance { skipped: usize },
    #[error("brute force would enumerate {candidates} selections (limit {limit})")]
    TooLarge { candidates: u128, limit: u128 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

/// Proxy costs for one load `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyCosts {
    pub load: usize,
    /// `B_(i,j)`.
    pub worker: Vec<Vec<f64>>,
    /// `A_i`.
    pub edge: Vec<f64>,
}

impl ProxyCosts {
    /// `A_i + B_(i,j)`, computed once so every consumer sees identical bits.
    fn combined(&self) -> Vec<Vec<f64>> {
        self.worker.iter().zip(&self.edge).map(|(ws, a)| ws.iter().map(|b| a + b).collect()).collect()
    }
}

pub fn proxy_costs(topology: &Topology, profiles: &SystemProfile, load: usize) -> Result<ProxyCosts, JncssError> {
    profiles.validate(topology)?;
    let edge: Vec<f64> = profiles.edges.iter().map(|e| e.mean_link()).collect();
    let worker = profiles
        .workers
        .iter()
        .zip(&profiles.edges)
        .map(|(ws, e)| ws.iter().map(|w| w.mean_total(e, load)).collect())
        .collect();
    Ok(ProxyCosts { load, worker, edge })
}

/// A tolerance together with the nodes that take part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub tolerance: Tolerance,
    pub load: usize,
    /// `e_i`.
    pub edges: Vec<bool>,
    /// `w_(i,j)`; all false for unselected edges.
    pub workers: Vec<Vec<bool>>,
    /// `T̂_tol` (ms).
    pub objective: f64,
}

impl Selection {
    /// Checks `Σe = n - s_e` and `Σ_j w_(i,j) = e_i (m_i - s_w)`.
    pub fn is_valid(&self, topology: &Topology) -> bool {
        let n = topology.edges();
        self.edges.len() == n
            && self.edges.iter().filter(|&&e| e).count() == n - self.tolerance.edge
            && (0..n).all(|i| {
                let m = topology.workers(i);
                let chosen = self.workers[i].iter().filter(|&&w| w).count();
                self.workers[i].len() == m && chosen == usize::from(self.edges[i]) * (m - self.tolerance.worker)
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCandidate {
    pub tolerance: Tolerance,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateValue {
    pub tolerance: Tolerance,
    pub load: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JncssReport {
    pub selection: Selection,
    pub candidates: Vec<CandidateValue>,
    pub skipped: Vec<SkippedCandidate>,
    /// Element comparisons performed by the order-statistic selections.
    pub evaluations: u64,
}

/// Load `D = K(s_e+1)(s_w+1)/Σm`, or why the tolerance cannot be used.
/// Load `D` for `t`, or why no code exists for it (infeasible coverage,
/// non-integer `n_i` or `D`, or `n_i > K`).
fn candidate_load(topology: &Topology, k: usize, t: Tolerance) -> Result<usize, String> {
    allocate(topology, t, k).map(|plan| plan.load).map_err(|e| e.to_string())
}

/// Indices of the `r` smallest values by repeated minimum extraction, ties
/// toward the lower index. Returned in extraction order, so the last entry
/// is the `r`-th smallest.
fn select_smallest(values: &[f64], r: usize, counter: &mut u64) -> Vec<usize> {
    let mut taken = vec![false; values.len()];
    let mut out = Vec::with_capacity(r);
    for _ in 0..r {
        let mut best: Option<usize> = None;
        for (idx, &v) in values.iter().enumerate() {
            if taken[idx] {
                continue;
            }
            *counter += 1;
            if best.is_none_or(|b| v < values[b]) {
                best = Some(idx);
            }
        }
        let b = best.expect("r <= len");
        taken[b] = true;
        out.push(b);
    }
    out
}

struct Evaluated {
    objective: f64,
    edges: Vec<usize>,
    workers: Vec<Vec<usize>>,
}

fn evaluate(costs: &[Vec<f64>], t: Tolerance, counter: &mut u64) -> Evaluated {
    let mut per_edge = Vec::with_capacity(costs.len());
    let mut workers = Vec::with_capacity(costs.len());
    for row in costs {
        let chosen = select_smallest(row, row.len() - t.worker, counter);
        per_edge.push(row[*chosen.last().expect("quorum >= 1")]);
        workers.push(chosen);
    }
    let edges = select_smallest(&per_edge, costs.len() - t.edge, counter);
    Evaluated { objective: per_edge[*edges.last().expect("quorum >= 1")], edges, workers }
}

fn to_selection(
    topology: &Topology,
    t: Tolerance,
    load: usize,
    objective: f64,
    edges: &[usize],
    workers: &[Vec<usize>],
) -> Selection {
    let n = topology.edges();
    let mut e = vec![false; n];
    let mut w: Vec<Vec<bool>> = (0..n).map(|i| vec![false; topology.workers(i)]).collect();
    for &i in edges {
        e[i] = true;
        for &j in &workers[i] {
            w[i][j] = true;
        }
    }
    Selection { tolerance: t, load, edges: e, workers: w, objective }
}

/// Sweeps `(s_e, s_w) ∈ [0,n) × [0,m_min)` and returns the minimizer of `T̂`,
/// ties toward the smaller tolerance.
pub fn solve(topology: &Topology, profiles: &SystemProfile, k: usize) -> Result<JncssReport, JncssError> {
    profiles.validate(topology)?;
    let mut evaluations = 0u64;
    let mut candidates = Vec::new();
    let mut skipped = Vec::new();
    let mut best: Option<Selection> = None;
    for t in Tolerance::domain(topology) {
        let load = match candidate_load(topology, k, t) {
            Ok(d) => d,
            Err(reason) => {
                skipped.push(SkippedCandidate { tolerance: t, reason });
                continue;
            }
        };
        let costs = proxy_costs(topology, profiles, load)?.combined();
        let ev = evaluate(&costs, t, &mut evaluations);
        candidates.push(CandidateValue { tolerance: t, load, objective: ev.objective });
        if best.as_ref().is_none_or(|b| ev.objective < b.objective) {
            best = Some(to_selection(topology, t, load, ev.objective, &ev.edges, &ev.workers));
        }
    }
    let selection = best.ok_or(JncssError::NoFeasibleTolerance { skipped: skipped.len() })?;
    Ok(JncssReport { selection, candidates, skipped, evaluations })
}

/// Number of node selections [`brute_force_solve`] would visit.
pub fn brute_force_size(topology: &Topology, k: usize) -> u128 {
    let mut total: u128 = 0;
    for t in Tolerance::domain(topology) {
        if candidate_load(topology, k, t).is_err() {
            continue;
        }
        for f in Combinations::new(topology.edges(), topology.edges() - t.edge) {
            let per: u128 = f
                .iter()
                .map(|&i| binomial(topology.workers(i), topology.workers(i) - t.worker))
                .fold(1u128, |a, b| a.saturating_mul(b));
            total = total.saturating_add(per);
        }
    }
    total
}

/// Enumerates every tolerance, edge subset and per-edge worker subset; the
/// cost of a selection is the largest `A_i + B_(i,j)` among chosen nodes.
pub fn brute_force_solve(topology: &Topology, profiles: &SystemProfile, k: usize) -> Result<Selection, JncssError> {
    profiles.validate(topology)?;
    let size = brute_force_size(topology, k);
    if size > BRUTE_FORCE_LIMIT {
        return Err(JncssError::TooLarge { candidates: size, limit: BRUTE_FORCE_LIMIT });
    }
    let mut best: Option<Selection> = None;
    let mut skipped = 0;
    for t in Tolerance::domain(topology) {
        let Ok(load) = candidate_load(topology, k, t) else {
            skipped += 1;
            continue;
        };
        let costs = proxy_costs(topology, profiles, load)?.combined();
        let subsets: Vec<Vec<Vec<usize>>> = (0..topology.edges())
            .map(|i| Combinations::new(topology.workers(i), topology.workers(i) - t.worker).collect())
            .collect();
        for f in Combinations::new(topology.edges(), topology.edges() - t.edge) {
            let mut digits = vec![0usize; f.len()];
            'subsets: loop {
                let mut cost = f64::NEG_INFINITY;
                for (slot, &i) in f.iter().enumerate() {
                    for &j in &subsets[i][digits[slot]] {
                        cost = cost.max(costs[i][j]);
                    }
                }
                if best.as_ref().is_none_or(|b| cost < b.objective) {
                    let mut workers = vec![Vec::new(); topology.edges()];
                    for (slot, &i) in f.iter().enumerate() {
                        workers[i] = subsets[i][digits[slot]].clone();
                    }
                    best = Some(to_selection(topology, t, load, cost, &f, &workers));
                }
                // mixed-radix increment, last edge fastest
                let mut pos = f.len();
                loop {
                    if pos == 0 {
                        break 'subsets;
                    }
                    pos -= 1;
                    digits[pos] += 1;
                    if digits[pos] < subsets[f[pos]].len() {
                        break;
                    }
                    digits[pos] = 0;
                }
            }
        }
    }
    best.ok_or(JncssError::NoFeasibleTolerance { skipped })
}

/// `f(n, r) = sqrt((r-1)/(n(n-r+1))) + sqrt((n-r)/(n r))`.
pub fn order_stat_coefficient(n: usize, r: usize) -> Result<f64, JncssError> {
    if r == 0 || r > n {
        return Err(JncssError::Domain(format!("order r = {r} outside [1, {n}]")));
    }
    let (n, r) = (n as f64, r as f64);
    Ok(((r - 1.0) / (n * (n - r + 1.0))).sqrt() + ((n - r) / (n * r)).sqrt())
}

/// Bound on `|E[X_(r)] - u_r|` where `u_r` is the `r`-th smallest mean:
/// `f(n,r) · sqrt(Σ[σ_i² + (u_i - ū)²] - n σ̄²)` with `σ̄² = Σσ_i²/n²`
/// (independent variables).
pub fn order_stat_gap_bound(r: usize, means: &[f64], variances: &[f64]) -> Result<f64, JncssError> {
    let n = means.len();
    if variances.len() != n {
        return Err(JncssError::Domain(format!("{n} means but {} variances", variances.len())));
    }
    let f = order_stat_coefficient(n, r)?;
    if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(JncssError::Domain(format!("variance {v} must be finite and >= 0")));
    }
    Ok(f * dispersion(means, variances)?)
}

/// `sqrt(Σ[σ_i² + (u_i - ū)²] - n σ̄²)`, the Δ quantity.
fn dispersion(means: &[f64], variances: &[f64]) -> Result<f64, JncssError> {
    let n = means.len() as f64;
    let u_bar = means.iter().sum::<f64>() / n;
    let var_sum: f64 = variances.iter().sum();
    let spread: f64 = means.iter().map(|u| (u - u_bar).powi(2)).sum();
    let sigma_bar2 = var_sum / (n * n);
    let radicand = var_sum + spread - n * sigma_bar2;
    if radicand < -RADICAND_SLACK {
        return Err(JncssError::Numerical(format!("negative radicand {radicand:e}")));
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Monte-Carlo moments of per-edge and per-worker times for a fixed
/// tolerance and load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapBoundInputs {
    pub trials: u64,
    pub seed: u64,
    pub tolerance: Tolerance,
    pub load: usize,
    /// Moments of `T^i_tol`.
    pub edge_means: Vec<f64>,
    pub edge_variances: Vec<f64>,
    /// Moments of `T^(i,j)_tol`.
    pub worker_means: Vec<Vec<f64>>,
    pub worker_variances: Vec<Vec<f64>>,
    /// Moments of `T_tol` itself.
    pub runtime_mean: f64,
    pub runtime_std_error: f64,
}

#[derive(Clone)]
struct GapAcc {
    total: Moments,
    edges: Vec<Moments>,
    workers: Vec<Vec<Moments>>,
}

impl GapAcc {
    fn new(topology: &Topology) -> Self {
        Self {
            total: Moments::default(),
            edges: vec![Moments::default(); topology.edges()],
            workers: topology.workers_per_edge().iter().map(|&m| vec![Moments::default(); m]).collect(),
        }
    }

    fn push(&mut self, s: &IterationSample) {
        self.total.push(s.total);
        for (acc, &x) in self.edges.iter_mut().zip(&s.edge_totals) {
            acc.push(x);
        }
        for (accs, xs) in self.workers.iter_mut().zip(&s.worker_totals) {
            for (acc, &x) in accs.iter_mut().zip(xs) {
                acc.push(x);
            }
        }
    }

    fn merge(&mut self, o: GapAcc) {
        self.total.merge(&o.total);
        for (a, b) in self.edges.iter_mut().zip(&o.edges) {
            a.merge(b);
        }
        for (aa, bb) in self.workers.iter_mut().zip(&o.workers) {
            for (a, b) in aa.iter_mut().zip(bb) {
                a.merge(b);
            }
        }
    }
}

/// Simulates `trials` iterations and records the moments the bound needs.
pub fn estimate_gap_inputs(
    topology: &Topology,
    profiles: &SystemProfile,
    tolerance: Tolerance,
    load: usize,
    trials: u64,
    seed: u64,
) -> Result<GapBoundInputs, JncssError> {
    profiles.validate(topology)?;
    tolerance.check(topology).map_err(|e| JncssError::Domain(e.to_string()))?;
    if trials < 2 {
        return Err(JncssError::Domain("at least two trials are needed for variances".into()));
    }
    let streams = Streams::new(seed);
    let uploads = |d: &RawDraws| d.edge_upload_times(profiles);
    let acc = chunked(
        trials,
        || GapAcc::new(topology),
        |acc, t| {
            let draws = RawDraws::sample(topology, profiles, &streams, t);
            acc.push(&IterationSample::from_totals(draws.worker_totals(profiles, load), &uploads(&draws), tolerance));
        },
        GapAcc::merge,
    );
    Ok(GapBoundInputs {
        trials,
        seed,
        tolerance,
        load,
        edge_means: acc.edges.iter().map(|m| m.mean).collect(),
        edge_variances: acc.edges.iter().map(Moments::variance).collect(),
        worker_means: acc.workers.iter().map(|ms| ms.iter().map(|m| m.mean).collect()).collect(),
        worker_variances: acc.workers.iter().map(|ms| ms.iter().map(Moments::variance).collect()).collect(),
        runtime_mean: acc.total.mean,
        runtime_std_error: acc.total.std_error(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapBound {
    pub bound: f64,
    pub delta_e: f64,
    pub delta_w: Vec<f64>,
    /// `f(n, n-ŝ_e) Δ_e`.
    pub edge_term: f64,
    /// `max_i f(m_i, m_i-ŝ_w) Δ_w^i`.
    pub worker_term: f64,
}

/// `f(n, n-ŝ_e) Δ_e + max_i f(m_i, m_i-ŝ_w) Δ_w^i`.
pub fn theorem3_bound(selection: &Selection, inputs: &GapBoundInputs) -> Result<GapBound, JncssError> {
    let t = selection.tolerance;
    if inputs.tolerance != t || inputs.load != selection.load {
        return Err(JncssError::Domain(format!(
            "moments were estimated for {} with D = {}, selection uses {} with D = {}",
            inputs.tolerance, inputs.load, t, selection.load
        )));
    }
    gap_bound_from_moments(
        t,
        &inputs.edge_means,
        &inputs.edge_variances,
        &inputs.worker_means,
        &inputs.worker_variances,
    )
}

/// The same bound from explicit per-node means and variances.
pub fn gap_bound_from_moments(
    t: Tolerance,
    edge_means: &[f64],
    edge_variances: &[f64],
    worker_means: &[Vec<f64>],
    worker_variances: &[Vec<f64>],
) -> Result<GapBound, JncssError> {
    let n = edge_means.len();
    if edge_variances.len() != n || worker_means.len() != n || worker_variances.len() != n {
        return Err(JncssError::Domain(format!("moment vectors must all cover the {n} edges")));
    }
    if t.edge >= n {
        return Err(JncssError::Domain(format!("s_e = {} must be below n = {n}", t.edge)));
    }
    let delta_e = dispersion(edge_means, edge_variances)?;
    let edge_term = order_stat_coefficient(n, n - t.edge)? * delta_e;
    let mut delta_w = Vec::with_capacity(n);
    let mut worker_term = 0.0f64;
    for (means, vars) in worker_means.iter().zip(worker_variances) {
        let m = means.len();
        if vars.len() != m {
            return Err(JncssError::Domain(format!("{m} worker means but {} variances", vars.len())));
        }
        if t.worker >= m {
            return Err(JncssError::Domain(format!("s_w = {} must be below m_i = {m}", t.worker)));
        }
        let d = dispersion(means, vars)?;
        worker_term = worker_term.max(order_stat_coefficient(m, m - t.worker)? * d);
        delta_w.push(d);
    }
    Ok(GapBound { bound: edge_term + worker_term, delta_e, delta_w, edge_term, worker_term })
}
