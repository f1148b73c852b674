//! The single JSON document that drives every subcommand, plus built-in presets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jncss::{gap_bound_from_moments, GapBound, JncssError};
use crate::runtime::{EdgeProfile, SystemProfile, WorkerProfile};
use crate::schemes::{SchemeKind, SchemeSpec};
use crate::topology::{Tolerance, Topology};
use crate::traindemo::{StragglerPolicy, SyntheticTask};

/// Semantic validation failure; `path` is the dotted location of the field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

/// `count` edge nodes sharing one link profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeClass {
    #[serde(default)]
    pub name: String,
    pub count: usize,
    pub tau_ms: f64,
    pub p: f64,
}

/// `per_edge` workers under every edge sharing one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerClass {
    #[serde(default)]
    pub name: String,
    pub per_edge: usize,
    pub c_ms: f64,
    pub gamma_per_ms: f64,
    pub tau_ms: f64,
    pub p: f64,
}

/// How node profiles are assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileConfig {
    /// Edges take classes in order; on every edge, workers take classes in order.
    Classes {
        edge_classes: Vec<EdgeClass>,
        worker_classes: Vec<WorkerClass>,
    },
    Homogeneous {
        edge: EdgeProfile,
        worker: WorkerProfile,
    },
    Explicit {
        edges: Vec<EdgeProfile>,
        workers: Vec<Vec<WorkerProfile>>,
    },
}

impl ProfileConfig {
    pub fn resolve(&self, topology: &Topology) -> Result<SystemProfile, ConfigError> {
        let profiles = match self {
            ProfileConfig::Homogeneous { edge, worker } => SystemProfile::homogeneous(topology, *edge, *worker),
            ProfileConfig::Explicit { edges, workers } => {
                SystemProfile { edges: edges.clone(), workers: workers.clone() }
            }
            ProfileConfig::Classes { edge_classes, worker_classes } => {
                let n: usize = edge_classes.iter().map(|c| c.count).sum();
                if n != topology.edges() {
                    return Err(ConfigError::new(
                        "profiles.edge_classes",
                        format!("classes cover {n} edges but the topology has {}", topology.edges()),
                    ));
                }
                let per_edge: usize = worker_classes.iter().map(|c| c.per_edge).sum();
                if let Some(i) = (0..topology.edges()).find(|&i| topology.workers(i) != per_edge) {
                    return Err(ConfigError::new(
                        "profiles.worker_classes",
                        format!("classes cover {per_edge} workers per edge but edge {i} has {}", topology.workers(i)),
                    ));
                }
                let edges = edge_classes
                    .iter()
                    .flat_map(|c| std::iter::repeat_n(EdgeProfile { tau: c.tau_ms, p: c.p }, c.count))
                    .collect();
                let row: Vec<WorkerProfile> = worker_classes
                    .iter()
                    .flat_map(|c| {
                        std::iter::repeat_n(
                            WorkerProfile { c: c.c_ms, gamma: c.gamma_per_ms, tau: c.tau_ms, p: c.p },
                            c.per_edge,
                        )
                    })
                    .collect();
                SystemProfile { edges, workers: vec![row; topology.edges()] }
            }
        };
        profiles.validate(topology).map_err(|e| ConfigError::new("profiles", e))?;
        Ok(profiles)
    }
}

fn default_trials() -> u64 {
    10_000
}

/// Monte-Carlo sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Sub-dataset counts to sweep; empty means just the top-level `k`.
    #[serde(default)]
    pub k_values: Vec<usize>,
    /// Schemes to compare; empty means all seven, using the top-level tolerance.
    #[serde(default)]
    pub schemes: Vec<SchemeSpec>,
    #[serde(default = "default_trials")]
    pub trials: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { k_values: Vec::new(), schemes: Vec::new(), trials: default_trials() }
    }
}

fn default_rows() -> usize {
    4
}
fn default_dimension() -> usize {
    5
}
fn default_iterations() -> usize {
    200
}
fn default_noise() -> f64 {
    0.1
}
fn default_policy() -> StragglerPolicy {
    StragglerPolicy::AdversarialCycle
}

/// Training demo settings; `K` and the seed come from the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_rows")]
    pub samples_per_subdataset: usize,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Defaults to HGC at the top-level tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSpec>,
    #[serde(default = "default_policy")]
    pub policy: StragglerPolicy,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            samples_per_subdataset: default_rows(),
            dimension: default_dimension(),
            iterations: default_iterations(),
            noise: default_noise(),
            scheme: None,
            policy: default_policy(),
        }
    }
}

/// Per-node means (ms) and variances (ms²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSet {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Input to the order-statistic bound calculator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    /// Defaults to the top-level tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Tolerance>,
    pub edges: MomentSet,
    /// One entry per edge.
    pub workers: Vec<MomentSet>,
}

impl BoundsSection {
    pub fn evaluate(&self, fallback: Tolerance) -> Result<GapBound, JncssError> {
        let w_means: Vec<Vec<f64>> = self.workers.iter().map(|w| w.means.clone()).collect();
        let w_vars: Vec<Vec<f64>> = self.workers.iter().map(|w| w.variances.clone()).collect();
        gap_bound_from_moments(
            self.tolerance.unwrap_or(fallback),
            &self.edges.means,
            &self.edges.variances,
            &w_means,
            &w_vars,
        )
    }
}

/// The configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub topology: Topology,
    /// User tolerance `(s_e, s_w)` for the schemes that take one.
    #[serde(default)]
    pub tolerance: Tolerance,
    /// Number of sub-datasets `K`.
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    pub profiles: ProfileConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
}

/// Names accepted by [`Config::preset`].
pub const PRESETS: [&str; 3] = ["example-1", "paper-sec6", "paper-sec6-cifar"];

impl Config {
    pub fn preset(name: &str) -> Option<Config> {
        match name {
            "example-1" => Some(example_one()),
            "paper-sec6" => Some(sec6(10.0, 50.0)),
            "paper-sec6-cifar" => Some(sec6(100.0, 500.0)),
            _ => None,
        }
    }

    /// Checks everything serde cannot, reporting the offending field path.
    pub fn validate(&self) -> Result<SystemProfile, ConfigError> {
        if self.k == 0 {
            return Err(ConfigError::new("k", "must be at least 1"));
        }
        self.tolerance.check(&self.topology).map_err(|e| ConfigError::new("tolerance", e))?;
        let profiles = self.profiles.resolve(&self.topology)?;
        if let Some(i) = self.experiment.k_values.iter().position(|&k| k == 0) {
            return Err(ConfigError::new(format!("experiment.k_values[{i}]"), "must be at least 1"));
        }
        if self.experiment.trials == 0 {
            return Err(ConfigError::new("experiment.trials", "must be at least 1"));
        }
        for (i, s) in self.experiment.schemes.iter().enumerate() {
            if let Some(t) = s.tolerance {
                t.check(&self.topology)
                    .map_err(|e| ConfigError::new(format!("experiment.schemes[{i}].tolerance"), e))?;
            }
        }
        let tr = &self.training;
        if tr.samples_per_subdataset == 0 {
            return Err(ConfigError::new("training.samples_per_subdataset", "must be at least 1"));
        }
        if tr.dimension == 0 {
            return Err(ConfigError::new("training.dimension", "must be at least 1"));
        }
        if !(tr.noise.is_finite() && tr.noise >= 0.0) {
            return Err(ConfigError::new("training.noise", "must be finite and >= 0"));
        }
        if let Some(t) = tr.scheme.as_ref().and_then(|s| s.tolerance) {
            t.check(&self.topology).map_err(|e| ConfigError::new("training.scheme.tolerance", e))?;
        }
        Ok(profiles)
    }

    pub fn k_values(&self) -> Vec<usize> {
        if self.experiment.k_values.is_empty() {
            vec![self.k]
        } else {
            self.experiment.k_values.clone()
        }
    }

    /// Configured schemes, with the top-level tolerance filled in.
    pub fn schemes(&self) -> Vec<SchemeSpec> {
        let fill = |s: &SchemeSpec| SchemeSpec {
            kind: s.kind,
            tolerance: if s.kind.needs_tolerance() { Some(s.tolerance.unwrap_or(self.tolerance)) } else { None },
        };
        if self.experiment.schemes.is_empty() {
            SchemeKind::ALL.iter().map(|&kind| fill(&SchemeSpec { kind, tolerance: None })).collect()
        } else {
            self.experiment.schemes.iter().map(fill).collect()
        }
    }

    pub fn training_scheme(&self) -> SchemeSpec {
        let s = self.training.scheme.clone().unwrap_or(SchemeSpec { kind: SchemeKind::Hgc, tolerance: None });
        SchemeSpec {
            kind: s.kind,
            tolerance: if s.kind.needs_tolerance() { Some(s.tolerance.unwrap_or(self.tolerance)) } else { None },
        }
    }

    pub fn training_task(&self) -> SyntheticTask {
        SyntheticTask {
            samples_per_subdataset: self.training.samples_per_subdataset,
            dimension: self.training.dimension,
            k: self.k,
            iterations: self.training.iterations,
            noise: self.training.noise,
            seed: self.seed,
        }
    }
}

fn example_one() -> Config {
    Config {
        topology: Topology::uniform(3, 3).expect("static topology"),
        tolerance: Tolerance::new(1, 1),
        k: 9,
        seed: 1,
        profiles: ProfileConfig::Homogeneous {
            edge: EdgeProfile { tau: 10.0, p: 0.1 },
            worker: WorkerProfile { c: 10.0, gamma: 0.1, tau: 10.0, p: 0.1 },
        },
        experiment: ExperimentSection { k_values: vec![9, 18, 27], schemes: Vec::new(), trials: 10_000 },
        training: TrainingSection::default(),
        bounds: None,
    }
}

/// Four edges of three link classes, ten workers of four classes per edge.
fn sec6(c_fast: f64, c_slow: f64) -> Config {
    let edge = |name: &str, count, tau_ms, p| EdgeClass { name: name.into(), count, tau_ms, p };
    let worker = |name: &str, per_edge, c_ms, gamma_per_ms, tau_ms, p| WorkerClass {
        name: name.into(),
        per_edge,
        c_ms,
        gamma_per_ms,
        tau_ms,
        p,
    };
    Config {
        topology: Topology::uniform(4, 10).expect("static topology"),
        tolerance: Tolerance::new(1, 2),
        k: 40,
        seed: 2024,
        profiles: ProfileConfig::Classes {
            edge_classes: vec![edge("I", 1, 50.0, 0.1), edge("II", 2, 100.0, 0.1), edge("III", 1, 500.0, 0.2)],
            worker_classes: vec![
                worker("I", 5, c_fast, 0.1, 50.0, 0.1),
                worker("II", 2, c_fast, 0.1, 100.0, 0.5),
                worker("III", 2, c_slow, 0.01, 50.0, 0.1),
                worker("IV", 1, c_slow, 0.01, 100.0, 0.5),
            ],
        },
        experiment: ExperimentSection { k_values: vec![40, 80, 120, 160, 200], schemes: Vec::new(), trials: 10_000 },
        training: TrainingSection::default(),
        bounds: None,
    }
}
