//! The compared strategies.
//!
//! | kind         | tolerance used            | edge waits for | master waits for     |
//! |--------------|---------------------------|----------------|----------------------|
//! | uncoded      | none                      | all workers    | all edges            |
//! | greedy       | user `(s_e, s_w)`, no code| `m_i - s_w`    | `n - s_e`            |
//! | cgc-w        | `(0, s_w)`                | `m_i - s_w`    | all edges            |
//! | cgc-e        | `(s_e, 0)`                | all workers    | `n - s_e`            |
//! | standard-gc  | flat `s` over all workers | (relays only)  | `Σm - s` workers     |
//! | hgc          | user `(s_e, s_w)`         | `m_i - s_w`    | `n - s_e`            |
//! | hgc-jncss    | chosen by JNCSS           | `m_i - ŝ_w`    | `n - ŝ_e`            |
//!
//! Greedy sums whatever arrives without rescaling, so it loses the terms held
//! only by stragglers. Standard GC codes directly between workers and master
//! with `s = max_{|S|=s_e} Σ_S m_i + s_w (n - s_e)` (`s_e m + s_w(n - s_e)` on
//! uniform trees); each worker's result is relayed through its edge link.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::{allocate, CodingError, CodingScheme, Gradient};
use crate::combinatorics::kth_smallest;
use crate::jncss::{self, JncssError};
use crate::rng::derive_seed;
use crate::runtime::{IterationSample, RawDraws, RuntimeError, SystemProfile};
use crate::topology::{Tolerance, Topology, TopologyError};
use crate::tradeoff::conventional_straggler_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Uncoded,
    Greedy,
    CgcW,
    CgcE,
    StandardGc,
    Hgc,
    HgcJncss,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::Uncoded,
        SchemeKind::Greedy,
        SchemeKind::CgcW,
        SchemeKind::CgcE,
        SchemeKind::StandardGc,
        SchemeKind::Hgc,
        SchemeKind::HgcJncss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Uncoded => "uncoded",
            SchemeKind::Greedy => "greedy",
            SchemeKind::CgcW => "cgc-w",
            SchemeKind::CgcE => "cgc-e",
            SchemeKind::StandardGc => "standard-gc",
            SchemeKind::Hgc => "hgc",
            SchemeKind::HgcJncss => "hgc-jncss",
        }
    }

    /// Everything except greedy recovers the exact full gradient.
    pub fn is_full_gradient(self) -> bool {
        self != SchemeKind::Greedy
    }

    /// Whether a user tolerance must be supplied.
    pub fn needs_tolerance(self) -> bool {
        !matches!(self, SchemeKind::Uncoded | SchemeKind::HgcJncss)
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = SchemeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| SchemeError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("unknown scheme kind '{0}'")]
    UnknownKind(String),
    #[error("scheme {0} needs a tolerance (s_e, s_w)")]
    MissingTolerance(SchemeKind),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Jncss(#[from] JncssError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("flat straggler count {s} must be below the {total} workers")]
    FlatToleranceTooLarge { s: usize, total: usize },
    #[error("straggler pattern exceeds what {kind} tolerates: {detail}")]
    ToleranceExceeded { kind: SchemeKind, detail: String },
}

/// Config-level description of a scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Tolerance>,
}

/// Which nodes straggle in one iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StragglerSet {
    /// Straggling edges (their workers are lost with them).
    pub edges: Vec<usize>,
    /// Straggling workers, per edge.
    pub workers: Vec<Vec<usize>>,
}

impl StragglerSet {
    pub fn none(topology: &Topology) -> Self {
        Self { edges: Vec::new(), workers: vec![Vec::new(); topology.edges()] }
    }

    fn edge_straggles(&self, i: usize) -> bool {
        self.edges.contains(&i)
    }

    fn worker_straggles(&self, i: usize, j: usize) -> bool {
        self.workers.get(i).is_some_and(|w| w.contains(&j))
    }
}

/// A built, immutable strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub topology: Topology,
    pub k: usize,
    /// Hierarchical wait rule; for standard GC the user tolerance it maps from.
    pub tolerance: Tolerance,
    /// Flat straggler count `s` (standard GC only).
    pub flat_stragglers: Option<usize>,
    /// Sub-datasets per worker.
    pub load: usize,
    /// Encoding matrices; absent for uncoded and greedy.
    pub code: Option<CodingScheme>,
    /// Data placement for the uncoded aggregations.
    pub worker_sets: Vec<Vec<Vec<usize>>>,
}

impl Scheme {
    pub fn build(
        spec: &SchemeSpec,
        topology: &Topology,
        profiles: &SystemProfile,
        k: usize,
        seed: u64,
    ) -> Result<Self, SchemeError> {
        let kind = spec.kind;
        let user = || spec.tolerance.ok_or(SchemeError::MissingTolerance(kind));
        let code_seed = derive_seed(seed, kind as u64);
        let hierarchical = |tolerance: Tolerance, with_code: bool| -> Result<Scheme, SchemeError> {
            let placement = if with_code { tolerance } else { Tolerance::NONE };
            let plan = allocate(topology, placement, k)?;
            let worker_sets = plan.worker_sets.clone();
            let load = plan.load;
            let code = if with_code { Some(CodingScheme::build(plan, code_seed)?) } else { None };
            Ok(Scheme {
                kind,
                topology: topology.clone(),
                k,
                tolerance,
                flat_stragglers: None,
                load,
                code,
                worker_sets,
            })
        };
        match kind {
            SchemeKind::Uncoded => hierarchical(Tolerance::NONE, false),
            SchemeKind::Greedy => {
                let t = user()?;
                t.check(topology)?;
                hierarchical(t, false)
            }
            SchemeKind::CgcW => hierarchical(Tolerance::new(0, user()?.worker), true),
            SchemeKind::CgcE => hierarchical(Tolerance::new(user()?.edge, 0), true),
            SchemeKind::Hgc => hierarchical(user()?, true),
            SchemeKind::HgcJncss => {
                let report = jncss::solve(topology, profiles, k)?;
                hierarchical(report.selection.tolerance, true)
            }
            SchemeKind::StandardGc => {
                let t = user()?;
                t.check(topology)?;
                let s = conventional_straggler_count(topology, t);
                let total = topology.total_workers();
                if s >= total {
                    return Err(SchemeError::FlatToleranceTooLarge { s, total });
                }
                let flat = Topology::new(vec![total])?;
                let plan = allocate(&flat, Tolerance::new(0, s), k)?;
                let load = plan.load;
                // regroup the flat placement by edge
                let worker_sets = (0..topology.edges())
                    .map(|i| {
                        let off = topology.worker_offset(i);
                        plan.worker_sets[0][off..off + topology.workers(i)].to_vec()
                    })
                    .collect();
                Ok(Scheme {
                    kind,
                    topology: topology.clone(),
                    k,
                    tolerance: t,
                    flat_stragglers: Some(s),
                    load,
                    code: Some(CodingScheme::build(plan, code_seed)?),
                    worker_sets,
                })
            }
        }
    }

    /// Results the master receives per iteration.
    pub fn master_comm_load(&self) -> usize {
        let n = self.topology.edges();
        match self.kind {
            SchemeKind::Uncoded | SchemeKind::CgcW => n,
            SchemeKind::Greedy | SchemeKind::CgcE | SchemeKind::Hgc | SchemeKind::HgcJncss => n - self.tolerance.edge,
            SchemeKind::StandardGc => self.topology.total_workers() - self.flat_stragglers.expect("standard GC has s"),
        }
    }

    /// Iteration time for one trial's draws (ms).
    pub fn iteration_time(&self, profiles: &SystemProfile, draws: &RawDraws) -> f64 {
        let totals = draws.worker_totals(profiles, self.load);
        match self.flat_stragglers {
            None => IterationSample::from_totals(totals, &draws.edge_upload_times(profiles), self.tolerance).total,
            Some(s) => {
                let mut paths = Vec::with_capacity(self.topology.total_workers());
                for (i, row) in totals.iter().enumerate() {
                    let tau = profiles.edges[i].tau;
                    for (j, t) in row.iter().enumerate() {
                        paths.push(t + draws.workers[i][j].relay_uploads as f64 * tau);
                    }
                }
                kth_smallest(&paths, paths.len() - s)
            }
        }
    }

    /// Aggregates `gradients[k] = g_k` at the master under the given stragglers.
    ///
    /// Coded schemes decode from the lowest-indexed non-stragglers and fail if
    /// the pattern exceeds their tolerance; uncoded waits for everyone.
    pub fn aggregate(&self, gradients: &[Gradient], stragglers: &StragglerSet) -> Result<Gradient, SchemeError> {
        let t = &self.topology;
        let dim = gradients.first().map_or(0, Vec::len);
        let worker_sum = |i: usize, j: usize| -> Gradient {
            let mut out = vec![0.0; dim];
            for &k in &self.worker_sets[i][j] {
                for (o, g) in out.iter_mut().zip(&gradients[k]) {
                    *o += g;
                }
            }
            out
        };
        let exceeded = |detail: String| SchemeError::ToleranceExceeded { kind: self.kind, detail };
        match self.kind {
            SchemeKind::Uncoded | SchemeKind::Greedy => {
                let mut out = vec![0.0; dim];
                for i in 0..t.edges() {
                    for j in 0..t.workers(i) {
                        let dropped = stragglers.edge_straggles(i) || stragglers.worker_straggles(i, j);
                        if self.kind == SchemeKind::Greedy && dropped {
                            continue;
                        }
                        for (o, v) in out.iter_mut().zip(worker_sum(i, j)) {
                            *o += v;
                        }
                    }
                }
                Ok(out)
            }
            SchemeKind::StandardGc => {
                let s = self.flat_stragglers.expect("standard GC has s");
                let alive: Vec<usize> = t
                    .worker_ids()
                    .enumerate()
                    .filter(|(_, (i, j))| !stragglers.edge_straggles(*i) && !stragglers.worker_straggles(*i, *j))
                    .map(|(flat, _)| flat)
                    .collect();
                let need = t.total_workers() - s;
                if alive.len() < need {
                    return Err(exceeded(format!(
                        "{} of {} workers lost, s = {s}",
                        t.total_workers() - alive.len(),
                        t.total_workers()
                    )));
                }
                let code = self.code.as_ref().expect("standard GC is coded");
                let mut workers = vec![Vec::new()];
                workers[0] = alive[..need].to_vec();
                Ok(code.run_pipeline(gradients, &[0], &workers)?)
            }
            _ => {
                let code = self.code.as_ref().expect("hierarchical scheme is coded");
                let tol = self.tolerance;
                let alive_edges: Vec<usize> = (0..t.edges()).filter(|&i| !stragglers.edge_straggles(i)).collect();
                let f_e = tol.edge_quorum(t);
                if alive_edges.len() < f_e {
                    return Err(exceeded(format!(
                        "{} edges straggle, s_e = {}",
                        t.edges() - alive_edges.len(),
                        tol.edge
                    )));
                }
                let edges = alive_edges[..f_e].to_vec();
                let mut workers = vec![Vec::new(); t.edges()];
                for &i in &edges {
                    let alive: Vec<usize> = (0..t.workers(i)).filter(|&j| !stragglers.worker_straggles(i, j)).collect();
                    let f_w = tol.worker_quorum(t, i);
                    if alive.len() < f_w {
                        return Err(exceeded(format!(
                            "edge {i} lost {} workers, s_w = {}",
                            t.workers(i) - alive.len(),
                            tol.worker
                        )));
                    }
                    workers[i] = alive[..f_w].to_vec();
                }
                Ok(code.run_pipeline(gradients, &edges, &workers)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{EdgeProfile, WorkerProfile};

    fn setup(n: usize, m: usize) -> (Topology, SystemProfile) {
        let t = Topology::uniform(n, m).unwrap();
        let p = SystemProfile::homogeneous(
            &t,
            EdgeProfile { tau: 5.0, p: 0.1 },
            WorkerProfile { c: 1.0, gamma: 0.5, tau: 2.0, p: 0.2 },
        );
        (t, p)
    }

    fn spec(kind: SchemeKind, t: Option<(usize, usize)>) -> SchemeSpec {
        SchemeSpec { kind, tolerance: t.map(|(e, w)| Tolerance::new(e, w)) }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!(matches!("mds".parse::<SchemeKind>(), Err(SchemeError::UnknownKind(_))));
    }

    #[test]
    fn uncoded_load_and_comm() {
        let (t, p) = setup(4, 10);
        let s = Scheme::build(&spec(SchemeKind::Uncoded, None), &t, &p, 40, 1).unwrap();
        assert_eq!(s.load, 1);
        assert_eq!(s.master_comm_load(), 4);
        assert!(s.code.is_none());
    }

    #[test]
    fn standard_gc_mapping() {
        let (t, p) = setup(4, 10);
        let s = Scheme::build(&spec(SchemeKind::StandardGc, Some((1, 2))), &t, &p, 40, 1).unwrap();
        assert_eq!(s.flat_stragglers, Some(16));
        assert_eq!(s.master_comm_load(), 24);
        assert_eq!(s.load, 17);
    }

    #[test]
    fn hgc_comm_loads() {
        let (t, p) = setup(4, 10);
        let h = Scheme::build(&spec(SchemeKind::Hgc, Some((0, 2))), &t, &p, 40, 1).unwrap();
        assert_eq!(h.master_comm_load(), 4);
        let e = Scheme::build(&spec(SchemeKind::CgcE, Some((1, 2))), &t, &p, 40, 1).unwrap();
        assert_eq!(e.tolerance, Tolerance::new(1, 0));
        assert_eq!(e.master_comm_load(), 3);
        let w = Scheme::build(&spec(SchemeKind::CgcW, Some((1, 2))), &t, &p, 40, 1).unwrap();
        assert_eq!(w.tolerance, Tolerance::new(0, 2));
        assert_eq!(w.master_comm_load(), 4);
    }

    #[test]
    fn missing_tolerance() {
        let (t, p) = setup(2, 2);
        assert_eq!(
            Scheme::build(&spec(SchemeKind::Hgc, None), &t, &p, 4, 0),
            Err(SchemeError::MissingTolerance(SchemeKind::Hgc))
        );
    }

    #[test]
    fn hgc_matches_coding_pipeline() {
        let (t, p) = setup(3, 3);
        let s = Scheme::build(&spec(SchemeKind::Hgc, Some((1, 1))), &t, &p, 9, 3).unwrap();
        assert_eq!(s.load, 4);
        let g: Vec<Gradient> = (0..9).map(|k| vec![k as f64, 1.0]).collect();
        let mut st = StragglerSet::none(&t);
        st.edges = vec![2];
        st.workers[0] = vec![1];
        let out = s.aggregate(&g, &st).unwrap();
        assert!((out[0] - 36.0).abs() < 1e-9 && (out[1] - 9.0).abs() < 1e-9);
        st.workers[1] = vec![0, 1];
        assert!(matches!(s.aggregate(&g, &st), Err(SchemeError::ToleranceExceeded { .. })));
    }

    #[test]
    fn greedy_loses_dropped_terms() {
        let (t, p) = setup(2, 3);
        let s = Scheme::build(&spec(SchemeKind::Greedy, Some((1, 1))), &t, &p, 6, 0).unwrap();
        let g: Vec<Gradient> = (0..6).map(|k| vec![1.0 + k as f64]).collect();
        let mut st = StragglerSet::none(&t);
        assert_eq!(s.aggregate(&g, &st).unwrap(), vec![21.0]);
        st.workers[0] = vec![0];
        assert_ne!(s.aggregate(&g, &st).unwrap(), vec![21.0]);
    }

    #[test]
    fn standard_gc_recovers_under_edge_loss() {
        let (t, p) = setup(3, 3);
        let s = Scheme::build(&spec(SchemeKind::StandardGc, Some((1, 1))), &t, &p, 9, 5).unwrap();
        assert_eq!(s.flat_stragglers, Some(5));
        let g: Vec<Gradient> = (0..9).map(|k| vec![k as f64 - 2.0]).collect();
        let mut st = StragglerSet::none(&t);
        st.edges = vec![0];
        st.workers[1] = vec![2];
        st.workers[2] = vec![0];
        let out = s.aggregate(&g, &st).unwrap();
        assert!((out[0] - 18.0).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_iteration_time() {
        let t = Topology::uniform(2, 2).unwrap();
        let p = SystemProfile::homogeneous(
            &t,
            EdgeProfile { tau: 3.0, p: 0.0 },
            WorkerProfile { c: 2.0, gamma: f64::INFINITY, tau: 1.0, p: 0.0 },
        );
        let s = Scheme::build(&spec(SchemeKind::Hgc, Some((1, 1))), &t, &p, 4, 0).unwrap();
        let draws = RawDraws::sample(&t, &p, &crate::rng::Streams::new(0), 0);
        // edge download 3 + 2·1 + 2·D(=4) + upload 3
        assert_eq!(s.iteration_time(&p, &draws), 3.0 + 2.0 + 8.0 + 3.0);
        let flat = Scheme::build(&spec(SchemeKind::StandardGc, Some((1, 1))), &t, &p, 4, 0).unwrap();
        assert_eq!(flat.flat_stragglers, Some(3));
        assert_eq!(flat.iteration_time(&p, &draws), 3.0 + 2.0 + 2.0 * 4.0 + 3.0);
    }
}
