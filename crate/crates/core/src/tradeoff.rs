//! Load/straggler trade-off bounds.
//!
//! All bounds are exact rationals `D/K`. The hierarchical bound is
//! `(s_e+1)(s_w+1) / Σm_i`; single-layer coding between workers and master
//! must budget for every worker behind a straggling edge, which costs more.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{Tolerance, Topology, TopologyError};

/// Minimum normalized per-worker load `D/K`.
///
/// `numerator`/`denominator` keep the unreduced form the formula produces
/// (e.g. `6/9`); `value` is the reduced rational used for comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadBound {
    pub numerator: u64,
    pub denominator: u64,
    pub value: Ratio<u64>,
}

impl LoadBound {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Self { numerator, denominator, value: Ratio::new(numerator, denominator) }
    }

    pub fn as_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Per-worker load for `k` sub-datasets, if it is an integer.
    pub fn load_for(&self, k: u64) -> Option<u64> {
        let scaled = self.value * Ratio::from_integer(k);
        scaled.is_integer().then(|| scaled.to_integer())
    }
}

impl PartialOrd for LoadBound {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LoadBound {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.value.cmp(&other.value)
    }
}

impl std::fmt::Display for LoadBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayerSpecError {
    #[error("layer spec needs at least one layer")]
    Empty,
    #[error("fan-out and tolerance lists differ in length ({fanouts} vs {tolerances})")]
    LengthMismatch { fanouts: usize, tolerances: usize },
    #[error("layer {layer}: tolerance {s} must be below fan-out {fanout}")]
    ToleranceTooLarge { layer: usize, s: usize, fanout: usize },
}

/// `L` layers; every node in layer `i-1` has `fanouts[i]` children and
/// tolerates `tolerances[i]` straggling children.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub fanouts: Vec<usize>,
    pub tolerances: Vec<usize>,
}

impl LayerSpec {
    pub fn new(fanouts: Vec<usize>, tolerances: Vec<usize>) -> Result<Self, LayerSpecError> {
        if fanouts.is_empty() {
            return Err(LayerSpecError::Empty);
        }
        if fanouts.len() != tolerances.len() {
            return Err(LayerSpecError::LengthMismatch { fanouts: fanouts.len(), tolerances: tolerances.len() });
        }
        for (layer, (&fanout, &s)) in fanouts.iter().zip(&tolerances).enumerate() {
            if s >= fanout {
                return Err(LayerSpecError::ToleranceTooLarge { layer, s, fanout });
            }
        }
        Ok(Self { fanouts, tolerances })
    }

    pub fn layers(&self) -> usize {
        self.fanouts.len()
    }

    /// Total workers in the last layer, `W = Π n_i`.
    pub fn total_workers(&self) -> u64 {
        self.fanouts.iter().map(|&n| n as u64).product()
    }
}

/// Hierarchical lower bound `(s_e+1)(s_w+1) / Σm_i`.
pub fn hgc_min_load(topology: &Topology, tolerance: Tolerance) -> Result<LoadBound, TopologyError> {
    tolerance.check(topology)?;
    let num = (tolerance.edge as u64 + 1) * (tolerance.worker as u64 + 1);
    Ok(LoadBound::new(num, topology.total_workers() as u64))
}

/// Worst-case straggler count a single-layer worker–master code must survive:
/// the `s_e` largest edges plus `s_w` workers behind every surviving edge.
pub fn conventional_straggler_count(topology: &Topology, tolerance: Tolerance) -> usize {
    let mut m = topology.workers_per_edge().to_vec();
    m.sort_unstable_by(|a, b| b.cmp(a));
    let largest: usize = m[..tolerance.edge].iter().sum();
    largest + (topology.edges() - tolerance.edge) * tolerance.worker
}

/// Single-layer bound `(s_max + 1) / Σm_i` with `s_max` from
/// [`conventional_straggler_count`].
pub fn conventional_min_load(topology: &Topology, tolerance: Tolerance) -> Result<LoadBound, TopologyError> {
    tolerance.check(topology)?;
    let s_max = conventional_straggler_count(topology, tolerance) as u64;
    Ok(LoadBound::new(s_max + 1, topology.total_workers() as u64))
}

/// True when the single-layer and hierarchical bounds coincide.
///
/// The gap between them is `Σ_{S_e} m_i - s_e(s_w+1) + s_w(n - s_e - 1)`, which
/// vanishes when both layers are tight (`n = s_e+1`, `m_min = s_w+1`), and also
/// when no layer actually has stragglers to separate (e.g. `s_e = s_w = 0`).
pub fn bounds_coincide(topology: &Topology, tolerance: Tolerance) -> bool {
    let s_max = conventional_straggler_count(topology, tolerance);
    s_max + 1 == (tolerance.edge + 1) * (tolerance.worker + 1)
}

/// `Π(s_i+1) / W` for an `L`-layer tree.
pub fn multilayer_min_load(layers: &LayerSpec) -> LoadBound {
    let num: u64 = layers.tolerances.iter().map(|&s| s as u64 + 1).product();
    LoadBound::new(num, layers.total_workers())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// Edges of the worst surviving set (the `n - s_e` smallest fan-outs).
    pub worst_surviving_edges: Vec<usize>,
    /// `Σ_{i∈F} m_i (s_e+1) / Σm_i` for that set.
    pub worst_coverage: Ratio<u64>,
    pub diagnostic: String,
}

/// Checks that every surviving edge set has enough workers:
/// `min_F Σ_{i∈F} m_i (s_e+1) / Σm_i ≥ 1`.
pub fn check_feasibility(topology: &Topology, tolerance: Tolerance) -> Feasibility {
    let n = topology.edges();
    let s_e = tolerance.edge.min(n.saturating_sub(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (topology.workers(i), i));
    let mut worst: Vec<usize> = order[..n - s_e].to_vec();
    worst.sort_unstable();
    let covered: u64 = worst.iter().map(|&i| topology.workers(i) as u64).sum();
    let coverage = Ratio::new(covered * (s_e as u64 + 1), topology.total_workers() as u64);
    let feasible = coverage >= Ratio::from_integer(1);
    let diagnostic = if feasible {
        format!("worst surviving edges {worst:?} cover {coverage} >= 1")
    } else {
        format!(
            "surviving edges {worst:?} hold only {covered} workers; coverage {coverage} < 1, \
             so s_e = {s_e} cannot be tolerated"
        )
    };
    Feasibility { feasible, worst_surviving_edges: worst, worst_coverage: coverage, diagnostic }
}
