//! Stochastic per-iteration runtime model.
//!
//! A worker's iteration time is
//!
//! ```text
//! T^(i,j) = N^d_i τ_i + N^d_(i,j) τ_(i,j) + c_(i,j) D + Exp(γ_(i,j)) + N^u_(i,j) τ_(i,j)
//! ```
//!
//! with transmission counts geometric on `{1, 2, ...}` (failure probability
//! `p`). Edge `i` finishes at `N^u_i τ_i` after its `(m_i - s_w)`-th fastest
//! worker, and the master after the `(n - s_e)`-th fastest edge.
//!
//! Randomness is drawn once per trial as [`RawDraws`], independent of the
//! load `D`, so different schemes and dataset sizes can be compared on common
//! random numbers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{kth_smallest, smallest_indices};
use crate::rng::Streams;
use crate::topology::{Tolerance, Topology};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("invalid profile for {node}: {reason}")]
    InvalidProfile { node: String, reason: String },
    #[error("profiles describe {got} but the topology has {expected}")]
    ShapeMismatch { expected: String, got: String },
    #[error("domain error: {0}")]
    Domain(String),
}

/// Worker `(i, j)`: compute time `c` per sub-dataset (ms), jitter rate `gamma`
/// (1/ms, `inf` for none), per-transmission delay `tau` (ms) and failure
/// probability `p` on the link to its edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerProfile {
    #[serde(rename = "c_ms")]
    pub c: f64,
    #[serde(rename = "gamma_per_ms")]
    pub gamma: f64,
    #[serde(rename = "tau_ms")]
    pub tau: f64,
    pub p: f64,
}

/// Edge `i`: per-transmission delay `tau` (ms) and failure probability `p`
/// on the link to the master.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeProfile {
    #[serde(rename = "tau_ms")]
    pub tau: f64,
    pub p: f64,
}

fn check_link(node: &str, tau: f64, p: f64) -> Result<(), RuntimeError> {
    let bad = |reason: String| Err(RuntimeError::InvalidProfile { node: node.to_string(), reason });
    if !(tau.is_finite() && tau >= 0.0) {
        return bad(format!("tau = {tau} must be finite and >= 0"));
    }
    if !(0.0..1.0).contains(&p) {
        return bad(format!("p = {p} must lie in [0, 1)"));
    }
    Ok(())
}

impl WorkerProfile {
    pub fn validate(&self, node: &str) -> Result<(), RuntimeError> {
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(RuntimeError::InvalidProfile {
                node: node.to_string(),
                reason: format!("c = {} must be finite and >= 0", self.c),
            });
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(RuntimeError::InvalidProfile {
                node: node.to_string(),
                reason: format!("gamma = {} must be > 0", self.gamma),
            });
        }
        check_link(node, self.tau, self.p)
    }

    /// Mean jitter `1/γ` (0 when `γ = inf`).
    pub fn mean_jitter(&self) -> f64 {
        1.0 / self.gamma
    }

    /// `E[T^(i,j)] = τ_i/(1-p_i) + 2τ/(1-p) + cD + 1/γ`.
    pub fn mean_total(&self, edge: &EdgeProfile, d: usize) -> f64 {
        edge.mean_link() + 2.0 * self.tau / (1.0 - self.p) + self.c * d as f64 + self.mean_jitter()
    }
}

impl EdgeProfile {
    pub fn validate(&self, node: &str) -> Result<(), RuntimeError> {
        check_link(node, self.tau, self.p)
    }

    /// `E[N τ] = τ/(1-p)`.
    pub fn mean_link(&self) -> f64 {
        self.tau / (1.0 - self.p)
    }
}

/// Runtime parameters for every node of a topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemProfile {
    pub edges: Vec<EdgeProfile>,
    pub workers: Vec<Vec<WorkerProfile>>,
}

impl SystemProfile {
    /// Every node gets the same parameters.
    pub fn homogeneous(topology: &Topology, edge: EdgeProfile, worker: WorkerProfile) -> Self {
        Self {
            edges: vec![edge; topology.edges()],
            workers: topology.workers_per_edge().iter().map(|&m| vec![worker; m]).collect(),
        }
    }

    pub fn validate(&self, topology: &Topology) -> Result<(), RuntimeError> {
        let shape: Vec<usize> = self.workers.iter().map(Vec::len).collect();
        if self.edges.len() != topology.edges() || shape != topology.workers_per_edge() {
            return Err(RuntimeError::ShapeMismatch {
                expected: format!("{} edges with {:?} workers", topology.edges(), topology.workers_per_edge()),
                got: format!("{} edges with {:?} workers", self.edges.len(), shape),
            });
        }
        for (i, e) in self.edges.iter().enumerate() {
            e.validate(&format!("edge {i}"))?;
            for (j, w) in self.workers[i].iter().enumerate() {
                w.validate(&format!("worker ({i}, {j})"))?;
            }
        }
        Ok(())
    }
}

/// Transmissions until the first success, `P(N = x) = p^(x-1)(1-p)`.
pub fn sample_transmissions(p: f64, rng: &mut impl Rng) -> u64 {
    if p == 0.0 {
        return 1;
    }
    // rand_distr counts failures before the first success
    1 + Geometric::new(1.0 - p).expect("p in (0, 1)").sample(rng)
}

/// Exponential jitter with rate `gamma`; zero when `gamma` is infinite.
pub fn sample_jitter(gamma: f64, rng: &mut impl Rng) -> f64 {
    if gamma.is_infinite() {
        return 0.0;
    }
    Exp::new(gamma).expect("gamma > 0").sample(rng)
}

/// One worker's iteration time, split into its components (ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerTime {
    pub edge_download: f64,
    pub download: f64,
    pub compute: f64,
    pub upload: f64,
    pub total: f64,
}

/// Draws a single worker's time including its own edge-download draw.
pub fn sample_worker_total(profile: &WorkerProfile, edge: &EdgeProfile, d: usize, rng: &mut impl Rng) -> WorkerTime {
    let edge_download = sample_transmissions(edge.p, rng) as f64 * edge.tau;
    let draw = WorkerDraw::sample(profile, edge, rng);
    draw.time(profile, edge_download, d)
}

/// Load-independent random quantities of one worker in one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerDraw {
    pub downloads: u64,
    pub jitter: f64,
    pub uploads: u64,
    /// Transmissions on the edge-master link when this worker's result is
    /// relayed individually (single-layer schemes).
    pub relay_uploads: u64,
}

impl WorkerDraw {
    fn sample(profile: &WorkerProfile, edge: &EdgeProfile, rng: &mut impl Rng) -> Self {
        let downloads = sample_transmissions(profile.p, rng);
        let jitter = sample_jitter(profile.gamma, rng);
        let uploads = sample_transmissions(profile.p, rng);
        let relay_uploads = sample_transmissions(edge.p, rng);
        Self { downloads, jitter, uploads, relay_uploads }
    }

    pub fn time(&self, profile: &WorkerProfile, edge_download: f64, d: usize) -> WorkerTime {
        let download = self.downloads as f64 * profile.tau;
        let compute = profile.c * d as f64 + self.jitter;
        let upload = self.uploads as f64 * profile.tau;
        WorkerTime { edge_download, download, compute, upload, total: edge_download + download + compute + upload }
    }
}

/// All random quantities of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDraws {
    pub edge_downloads: Vec<u64>,
    pub edge_uploads: Vec<u64>,
    pub workers: Vec<Vec<WorkerDraw>>,
}

impl RawDraws {
    /// Edge `i` reads stream `(trial, i)`; worker `(i, j)` reads stream
    /// `(trial, n + offset_i + j)`.
    pub fn sample(topology: &Topology, profiles: &SystemProfile, streams: &Streams, trial: u64) -> Self {
        let n = topology.edges();
        let mut edge_downloads = Vec::with_capacity(n);
        let mut edge_uploads = Vec::with_capacity(n);
        let mut workers = Vec::with_capacity(n);
        for i in 0..n {
            let edge = &profiles.edges[i];
            let mut rng: ChaCha8Rng = streams.stream(trial, i as u64);
            edge_downloads.push(sample_transmissions(edge.p, &mut rng));
            edge_uploads.push(sample_transmissions(edge.p, &mut rng));
            let offset = (n + topology.worker_offset(i)) as u64;
            workers.push(
                profiles.workers[i]
                    .iter()
                    .enumerate()
                    .map(|(j, w)| WorkerDraw::sample(w, edge, &mut streams.stream(trial, offset + j as u64)))
                    .collect(),
            );
        }
        Self { edge_downloads, edge_uploads, workers }
    }

    /// Per-worker totals `T^(i,j)` for load `d`.
    pub fn worker_totals(&self, profiles: &SystemProfile, d: usize) -> Vec<Vec<f64>> {
        self.workers
            .iter()
            .enumerate()
            .map(|(i, ws)| {
                let edge_download = self.edge_downloads[i] as f64 * profiles.edges[i].tau;
                ws.iter().zip(&profiles.workers[i]).map(|(w, p)| w.time(p, edge_download, d).total).collect()
            })
            .collect()
    }

    pub fn edge_upload_times(&self, profiles: &SystemProfile) -> Vec<f64> {
        self.edge_uploads.iter().zip(&profiles.edges).map(|(&u, e)| u as f64 * e.tau).collect()
    }
}

/// One simulated iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSample {
    pub worker_totals: Vec<Vec<f64>>,
    pub edge_totals: Vec<f64>,
    pub total: f64,
    /// `F`: edges whose results the master used.
    pub fastest_edges: Vec<usize>,
    /// `F_i` for every edge.
    pub fastest_workers: Vec<Vec<usize>>,
}

impl IterationSample {
    /// Nested order statistics: `T^i = up_i + min_{(m_i-s_w)-th} T^(i,j)`,
    /// `T = min_{(n-s_e)-th} T^i`.
    pub fn from_totals(worker_totals: Vec<Vec<f64>>, edge_uploads: &[f64], tolerance: Tolerance) -> Self {
        let mut edge_totals = Vec::with_capacity(worker_totals.len());
        let mut fastest_workers = Vec::with_capacity(worker_totals.len());
        for (ws, up) in worker_totals.iter().zip(edge_uploads) {
            let f = ws.len() - tolerance.worker;
            edge_totals.push(up + kth_smallest(ws, f));
            fastest_workers.push(smallest_indices(ws, f));
        }
        let f = edge_totals.len() - tolerance.edge;
        let total = kth_smallest(&edge_totals, f);
        let fastest_edges = smallest_indices(&edge_totals, f);
        Self { worker_totals, edge_totals, total, fastest_edges, fastest_workers }
    }
}

/// Samples one iteration of a hierarchical scheme with load `d`.
pub fn sample_iteration(
    topology: &Topology,
    profiles: &SystemProfile,
    tolerance: Tolerance,
    d: usize,
    streams: &Streams,
    trial: u64,
) -> IterationSample {
    let draws = RawDraws::sample(topology, profiles, streams, trial);
    IterationSample::from_totals(draws.worker_totals(profiles, d), &draws.edge_upload_times(profiles), tolerance)
}

/// Fully homogeneous system: worker link `(τ₁, p₁)`, edge link `(τ₂, p₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousParams {
    pub c: f64,
    pub gamma: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub p1: f64,
    pub p2: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

impl HomogeneousParams {
    pub fn topology(&self) -> Topology {
        Topology::uniform(self.n, self.m).expect("n, m >= 1")
    }

    pub fn profiles(&self) -> SystemProfile {
        SystemProfile::homogeneous(
            &self.topology(),
            EdgeProfile { tau: self.tau2, p: self.p2 },
            WorkerProfile { c: self.c, gamma: self.gamma, tau: self.tau1, p: self.p1 },
        )
    }

    fn load_term(&self, s_e: usize, s_w: usize) -> f64 {
        self.c * self.k as f64 * ((s_e + 1) * (s_w + 1)) as f64 / (self.n * self.m) as f64
    }
}

/// Computation-dominated approximation:
/// `cK(s_e+1)(s_w+1)/(nm) + 2τ₁ + 2τ₂ + ln((n-s_e)(m-s_w))/γ`.
pub fn case1_expected(params: &HomogeneousParams, s_e: usize, s_w: usize) -> f64 {
    let survivors = ((params.n - s_e) * (params.m - s_w)) as f64;
    params.load_term(s_e, s_w) + 2.0 * params.tau1 + 2.0 * params.tau2 + survivors.ln() / params.gamma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormOptimum {
    pub tolerance: Tolerance,
    pub value: f64,
    /// The candidates that were compared, in evaluation order.
    pub candidates: Vec<(Tolerance, f64)>,
}

fn argmin(candidates: Vec<(Tolerance, f64)>) -> ClosedFormOptimum {
    let mut best = candidates[0];
    for &(t, v) in &candidates[1..] {
        if v < best.1 || (v == best.1 && t < best.0) {
            best = (t, v);
        }
    }
    ClosedFormOptimum { tolerance: best.0, value: best.1, candidates }
}

/// The minimum of [`case1_expected`] lies at one of the four corners of the
/// tolerance domain; ties go to the lexicographically smaller tolerance.
pub fn case1_optimal(params: &HomogeneousParams) -> ClosedFormOptimum {
    let (e, w) = (params.n - 1, params.m - 1);
    let mut corners = vec![Tolerance::new(0, 0), Tolerance::new(0, w), Tolerance::new(e, 0), Tolerance::new(e, w)];
    corners.dedup();
    argmin(corners.into_iter().map(|t| (t, case1_expected(params, t.edge, t.worker))).collect())
}

/// Communication-dominated approximation with `s_w = 0`:
/// `cK(s_e+1)/(nm) + 2τ₁ + τ₂ - (2τ₂/ln p₂) ln(n-s_e)`.
pub fn case2_expected(params: &HomogeneousParams, s_e: usize) -> Result<f64, RuntimeError> {
    if !(params.p2 > 0.0 && params.p2 < 1.0) {
        return Err(RuntimeError::Domain(format!("p2 = {} must lie in (0, 1) for ln p2", params.p2)));
    }
    if s_e >= params.n {
        return Err(RuntimeError::Domain(format!("s_e = {s_e} must be below n = {}", params.n)));
    }
    let log_term = -(2.0 * params.tau2 / params.p2.ln()) * ((params.n - s_e) as f64).ln();
    Ok(params.load_term(s_e, 0) + 2.0 * params.tau1 + params.tau2 + log_term)
}

/// `s_e = 0` when `cK/m ≥ cK/(nm) - (2τ₂/ln p₂) ln n`, else `s_e = n-1`.
pub fn case2_optimal(params: &HomogeneousParams) -> Result<ClosedFormOptimum, RuntimeError> {
    let at_zero = case2_expected(params, 0)?;
    let at_max = case2_expected(params, params.n - 1)?;
    let cands = if params.n == 1 {
        vec![(Tolerance::NONE, at_zero)]
    } else {
        vec![(Tolerance::NONE, at_zero), (Tolerance::new(params.n - 1, 0), at_max)]
    };
    let ck = params.c * params.k as f64;
    let threshold = ck / (params.n * params.m) as f64 - (2.0 * params.tau2 / params.p2.ln()) * (params.n as f64).ln();
    let choose_zero = ck / params.m as f64 >= threshold;
    let (tolerance, value) = if choose_zero { cands[0] } else { cands[cands.len() - 1] };
    Ok(ClosedFormOptimum { tolerance, value, candidates: cands })
}
