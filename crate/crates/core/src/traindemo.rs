//! Coded gradient descent on synthetic least-squares regression.
//!
//! The loss is `||Xβ - y||² / (2N)` and sub-dataset `k` contributes
//! `g_k = X_kᵀ(X_k β - y_k)`, so the full gradient is exactly `Σ g_k` and any
//! exact-recovery scheme must reproduce centralized gradient descent.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::Gradient;
use crate::combinatorics::{binomial, unrank_combination};
use crate::linalg::{norm2, relative_error};
use crate::rng::derive_seed;
use crate::schemes::{Scheme, SchemeError, StragglerSet};
use crate::topology::{Tolerance, Topology};

/// Largest accepted condition number of `XᵀX`.
pub const MAX_CONDITION: f64 = 1e4;
const MAX_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("could not draw a well-conditioned design in {0} attempts")]
    IllConditioned(usize),
    #[error("iteration {iteration}: straggler pattern {pattern:?}: {source}")]
    Decode {
        iteration: usize,
        pattern: StragglerSet,
        #[source]
        source: SchemeError,
    },
}

/// Task description; the data are generated from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTask {
    /// Rows per sub-dataset, so `N = K · samples_per_subdataset`.
    pub samples_per_subdataset: usize,
    pub dimension: usize,
    pub k: usize,
    pub iterations: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    pub seed: u64,
}

fn default_noise() -> f64 {
    0.1
}

/// Generated regression data.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub learning_rate: f64,
    pub condition: f64,
    rows_per_part: usize,
    k: usize,
}

impl SyntheticTask {
    /// Draws `X` until `cond(XᵀX) ≤ 1e4`; the step size is `1/λ_max(XᵀX/N)`.
    pub fn generate(&self) -> Result<TaskData, TrainError> {
        if self.k == 0 || self.samples_per_subdataset == 0 || self.dimension == 0 {
            return Err(TrainError::InvalidTask("K, rows per sub-dataset and dimension must be positive".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(TrainError::InvalidTask(format!("noise {} must be finite and >= 0", self.noise)));
        }
        let n_rows = self.k * self.samples_per_subdataset;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..MAX_DRAWS {
            let x = DMatrix::from_fn(n_rows, self.dimension, |_, _| rng.sample::<f64, _>(StandardNormal));
            let gram = x.transpose() * &x;
            let eig = gram.clone().symmetric_eigen();
            let lmax = eig.eigenvalues.max();
            let lmin = eig.eigenvalues.min();
            if lmin <= 0.0 || lmax / lmin > MAX_CONDITION {
                continue;
            }
            let beta = DVector::from_fn(self.dimension, |_, _| rng.sample::<f64, _>(StandardNormal));
            let noise = DVector::from_fn(n_rows, |_, _| self.noise * rng.sample::<f64, _>(StandardNormal));
            let y = &x * beta + noise;
            return Ok(TaskData {
                x,
                y,
                learning_rate: n_rows as f64 / lmax,
                condition: lmax / lmin,
                rows_per_part: self.samples_per_subdataset,
                k: self.k,
            });
        }
        Err(TrainError::IllConditioned(MAX_DRAWS))
    }
}

impl TaskData {
    pub fn samples(&self) -> usize {
        self.x.nrows()
    }

    /// `g_k` for every sub-dataset.
    pub fn partial_gradients(&self, beta: &DVector<f64>) -> Vec<Gradient> {
        let residual = &self.x * beta - &self.y;
        (0..self.k)
            .map(|k| {
                let rows = k * self.rows_per_part..(k + 1) * self.rows_per_part;
                let xk = self.x.rows(rows.start, rows.len());
                let rk = residual.rows(rows.start, rows.len());
                (xk.transpose() * rk).iter().copied().collect()
            })
            .collect()
    }

    pub fn loss(&self, beta: &DVector<f64>) -> f64 {
        (&self.x * beta - &self.y).norm_squared() / (2.0 * self.samples() as f64)
    }
}

/// Which nodes straggle in each iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StragglerPolicy {
    None,
    /// `edges` random edges and `workers` random workers on every edge.
    Random {
        edges: usize,
        workers: usize,
        seed: u64,
    },
    /// Steps through every pattern the scheme tolerates, one per iteration.
    AdversarialCycle,
    Fixed {
        pattern: StragglerSet,
    },
}

/// Number of straggler patterns with exactly `t.edge` edges and `t.worker`
/// workers per edge.
pub fn pattern_count(topology: &Topology, t: Tolerance) -> u128 {
    let mut total = binomial(topology.edges(), t.edge);
    for &m in topology.workers_per_edge() {
        total = total.saturating_mul(binomial(m, t.worker));
    }
    total
}

/// The `rank`-th such pattern (mixed radix, edge subset most significant).
pub fn unrank_pattern(topology: &Topology, t: Tolerance, mut rank: u128) -> StragglerSet {
    let n = topology.edges();
    let mut workers = vec![Vec::new(); n];
    for i in (0..n).rev() {
        let radix = binomial(topology.workers(i), t.worker);
        workers[i] = unrank_combination(topology.workers(i), t.worker, rank % radix);
        rank /= radix;
    }
    StragglerSet { edges: unrank_combination(n, t.edge, rank), workers }
}

impl StragglerPolicy {
    fn pattern(&self, scheme: &Scheme, iteration: usize) -> StragglerSet {
        let topology = &scheme.topology;
        match self {
            StragglerPolicy::None => StragglerSet::none(topology),
            StragglerPolicy::Fixed { pattern } => pattern.clone(),
            StragglerPolicy::AdversarialCycle => {
                let count = pattern_count(topology, scheme.tolerance);
                unrank_pattern(topology, scheme.tolerance, iteration as u128 % count)
            }
            StragglerPolicy::Random { edges, workers, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(*seed, iteration as u64));
                let n = topology.edges();
                let mut e = rand::seq::index::sample(&mut rng, n, (*edges).min(n)).into_vec();
                e.sort_unstable();
                let w = topology
                    .workers_per_edge()
                    .iter()
                    .map(|&m| {
                        let mut v = rand::seq::index::sample(&mut rng, m, (*workers).min(m)).into_vec();
                        v.sort_unstable();
                        v
                    })
                    .collect();
                StragglerSet { edges: e, workers: w }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Loss before the update.
    pub loss: f64,
    /// `||decoded - Σ g_k|| / Σ ||g_k||`. The summand scale is used because
    /// `Σ g_k` itself vanishes as gradient descent converges.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    /// `β` after each iteration.
    pub parameters: Vec<Vec<f64>>,
    pub learning_rate: f64,
    pub condition: f64,
}

impl Trajectory {
    pub fn final_parameters(&self) -> &[f64] {
        self.parameters.last().map_or(&[], Vec::as_slice)
    }

    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    /// Largest relative parameter gap to `other` over all iterations.
    pub fn max_relative_gap(&self, other: &Trajectory) -> f64 {
        self.parameters.iter().zip(&other.parameters).map(|(a, b)| relative_error(a, b)).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss,residual\n");
        for r in &self.records {
            out.push_str(&format!("{},{:e},{:e}\n", r.iteration, r.loss, r.residual));
        }
        out
    }
}

fn descend(
    data: &TaskData,
    iterations: usize,
    mut aggregate: impl FnMut(usize, &[Gradient]) -> Result<Gradient, TrainError>,
) -> Result<Trajectory, TrainError> {
    let d = data.x.ncols();
    let mut beta = DVector::zeros(d);
    let step = data.learning_rate / data.samples() as f64;
    let mut records = Vec::with_capacity(iterations);
    let mut parameters = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let partials = data.partial_gradients(&beta);
        let truth: Gradient = (0..d).map(|t| partials.iter().map(|g| g[t]).sum()).collect();
        let decoded = aggregate(it, &partials)?;
        let scale: f64 = partials.iter().map(|g| norm2(g)).sum();
        let gap: Vec<f64> = decoded.iter().zip(&truth).map(|(a, b)| a - b).collect();
        let residual = if scale == 0.0 { norm2(&gap) } else { norm2(&gap) / scale };
        records.push(IterationRecord { iteration: it, loss: data.loss(&beta), residual });
        beta -= DVector::from_vec(decoded) * step;
        parameters.push(beta.iter().copied().collect());
    }
    Ok(Trajectory { records, parameters, learning_rate: data.learning_rate, condition: data.condition })
}

/// Plain gradient descent with the exact full gradient.
pub fn run_centralized(task: &SyntheticTask) -> Result<Trajectory, TrainError> {
    let data = task.generate()?;
    descend(&data, task.iterations, |_, partials| {
        let d = partials.first().map_or(0, Vec::len);
        Ok((0..d).map(|t| partials.iter().map(|g| g[t]).sum()).collect())
    })
}

/// Gradient descent where each step's gradient goes through `scheme` with
/// stragglers chosen by `policy`.
pub fn run_training(task: &SyntheticTask, scheme: &Scheme, policy: &StragglerPolicy) -> Result<Trajectory, TrainError> {
    if scheme.k != task.k {
        return Err(TrainError::InvalidTask(format!("scheme built for K = {} but task has K = {}", scheme.k, task.k)));
    }
    let data = task.generate()?;
    descend(&data, task.iterations, |it, partials| {
        let pattern = policy.pattern(scheme, it);
        scheme.aggregate(partials, &pattern).map_err(|source| TrainError::Decode { iteration: it, pattern, source })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{EdgeProfile, SystemProfile, WorkerProfile};
    use crate::schemes::{SchemeKind, SchemeSpec};

    fn task(k: usize) -> SyntheticTask {
        SyntheticTask { samples_per_subdataset: 4, dimension: 5, k, iterations: 50, noise: 0.1, seed: 9 }
    }

    fn scheme(kind: SchemeKind, t: Option<(usize, usize)>) -> Scheme {
        let topo = Topology::uniform(3, 3).unwrap();
        let prof = SystemProfile::homogeneous(
            &topo,
            EdgeProfile { tau: 1.0, p: 0.1 },
            WorkerProfile { c: 1.0, gamma: 1.0, tau: 1.0, p: 0.1 },
        );
        let spec = SchemeSpec { kind, tolerance: t.map(|(e, w)| Tolerance::new(e, w)) };
        Scheme::build(&spec, &topo, &prof, 9, 4).unwrap()
    }

    #[test]
    fn data_is_well_conditioned_and_loss_decreases() {
        let data = task(9).generate().unwrap();
        assert!(data.condition <= MAX_CONDITION);
        let tr = run_centralized(&task(9)).unwrap();
        assert!(tr.records.last().unwrap().loss < tr.records[0].loss);
        assert_eq!(tr.max_residual(), 0.0);
    }

    #[test]
    fn uncoded_without_stragglers_matches_centralized() {
        let central = run_centralized(&task(9)).unwrap();
        let tr = run_training(&task(9), &scheme(SchemeKind::Uncoded, None), &StragglerPolicy::None).unwrap();
        assert!(tr.max_relative_gap(&central) < 1e-12);
    }

    #[test]
    fn hgc_under_adversarial_cycle() {
        let central = run_centralized(&task(9)).unwrap();
        let tr =
            run_training(&task(9), &scheme(SchemeKind::Hgc, Some((1, 1))), &StragglerPolicy::AdversarialCycle).unwrap();
        assert!(tr.max_residual() <= 1e-9);
        assert!(tr.max_relative_gap(&central) <= 1e-7);
    }

    #[test]
    fn greedy_drops_terms() {
        let tr = run_training(
            &task(9),
            &scheme(SchemeKind::Greedy, Some((1, 1))),
            &StragglerPolicy::Random { edges: 1, workers: 1, seed: 3 },
        )
        .unwrap();
        assert!(tr.max_residual() > 0.01);
    }

    #[test]
    fn excess_stragglers_are_reported_with_iteration() {
        let err = run_training(
            &task(9),
            &scheme(SchemeKind::Hgc, Some((1, 1))),
            &StragglerPolicy::Random { edges: 2, workers: 0, seed: 1 },
        )
        .unwrap_err();
        assert!(matches!(err, TrainError::Decode { iteration: 0, .. }));
    }

    #[test]
    fn pattern_cycle_covers_everything() {
        let t = Topology::uniform(3, 3).unwrap();
        let tol = Tolerance::new(1, 1);
        assert_eq!(pattern_count(&t, tol), 81);
        let mut all: Vec<StragglerSet> = (0..81).map(|r| unrank_pattern(&t, tol, r)).collect();
        all.sort_by(|a, b| (&a.edges, &a.workers).cmp(&(&b.edges, &b.workers)));
        all.dedup();
        assert_eq!(all.len(), 81);
    }
}
