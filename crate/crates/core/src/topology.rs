//! The master–edge–worker tree and straggler tolerance levels.
//!
//! All indices in this crate are 0-based: edge `i` is in `0..n`, worker `(i, j)`
//! has `j` in `0..m_i`, and sub-dataset `k` is in `0..K`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("topology needs at least one edge node")]
    NoEdges,
    #[error("edge {edge} has no workers")]
    EmptyEdge { edge: usize },
    #[error("edge straggler count {s_e} is outside [0, {n})")]
    EdgeToleranceOutOfRange { s_e: usize, n: usize },
    #[error("worker straggler count {s_w} is outside [0, {m_min}) (m_min = smallest edge fan-out)")]
    WorkerToleranceOutOfRange { s_w: usize, m_min: usize },
}

/// `n` edge nodes; edge `i` serves `m[i]` workers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TopologyRepr", into = "TopologyRepr")]
pub struct Topology {
    workers_per_edge: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TopologyRepr {
    workers_per_edge: Vec<usize>,
}

impl TryFrom<TopologyRepr> for Topology {
    type Error = TopologyError;
    fn try_from(r: TopologyRepr) -> Result<Self, Self::Error> {
        Topology::new(r.workers_per_edge)
    }
}

impl From<Topology> for TopologyRepr {
    fn from(t: Topology) -> Self {
        TopologyRepr { workers_per_edge: t.workers_per_edge }
    }
}

impl Topology {
    pub fn new(workers_per_edge: Vec<usize>) -> Result<Self, TopologyError> {
        if workers_per_edge.is_empty() {
            return Err(TopologyError::NoEdges);
        }
        if let Some(edge) = workers_per_edge.iter().position(|&m| m == 0) {
            return Err(TopologyError::EmptyEdge { edge });
        }
        Ok(Self { workers_per_edge })
    }

    /// `n` edges with `m` workers each.
    pub fn uniform(n: usize, m: usize) -> Result<Self, TopologyError> {
        Self::new(vec![m; n])
    }

    pub fn edges(&self) -> usize {
        self.workers_per_edge.len()
    }

    pub fn workers(&self, edge: usize) -> usize {
        self.workers_per_edge[edge]
    }

    pub fn workers_per_edge(&self) -> &[usize] {
        &self.workers_per_edge
    }

    pub fn total_workers(&self) -> usize {
        self.workers_per_edge.iter().sum()
    }

    pub fn min_workers(&self) -> usize {
        *self.workers_per_edge.iter().min().expect("non-empty topology")
    }

    pub fn max_workers(&self) -> usize {
        *self.workers_per_edge.iter().max().expect("non-empty topology")
    }

    pub fn is_uniform(&self) -> bool {
        self.min_workers() == self.max_workers()
    }

    /// Offset of edge `i`'s first worker in a flat worker numbering.
    pub fn worker_offset(&self, edge: usize) -> usize {
        self.workers_per_edge[..edge].iter().sum()
    }

    /// Iterate `(edge, worker)` pairs in flat order.
    pub fn worker_ids(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.workers_per_edge.iter().enumerate().flat_map(|(i, &m)| (0..m).map(move |j| (i, j)))
    }
}

/// Number of edge stragglers `s_e` and per-edge worker stragglers `s_w` to survive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Tolerance {
    pub edge: usize,
    pub worker: usize,
}

impl Tolerance {
    pub const NONE: Tolerance = Tolerance { edge: 0, worker: 0 };

    pub fn new(edge: usize, worker: usize) -> Self {
        Self { edge, worker }
    }

    /// Checks `s_e < n` and `s_w < m_min`.
    pub fn check(&self, topology: &Topology) -> Result<(), TopologyError> {
        let n = topology.edges();
        if self.edge >= n {
            return Err(TopologyError::EdgeToleranceOutOfRange { s_e: self.edge, n });
        }
        let m_min = topology.min_workers();
        if self.worker >= m_min {
            return Err(TopologyError::WorkerToleranceOutOfRange { s_w: self.worker, m_min });
        }
        Ok(())
    }

    /// Edges the master waits for, `f_e = n - s_e`.
    pub fn edge_quorum(&self, topology: &Topology) -> usize {
        topology.edges() - self.edge
    }

    /// Workers edge `i` waits for, `f_w^i = m_i - s_w`.
    pub fn worker_quorum(&self, topology: &Topology, edge: usize) -> usize {
        topology.workers(edge) - self.worker
    }

    /// Every tolerance in `[0, n) x [0, m_min)`, in lexicographic order.
    pub fn domain(topology: &Topology) -> impl Iterator<Item = Tolerance> {
        let n = topology.edges();
        let m = topology.min_workers();
        (0..n).flat_map(move |e| (0..m).map(move |w| Tolerance::new(e, w)))
    }
}

impl std::fmt::Display for Tolerance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(s_e={}, s_w={})", self.edge, self.worker)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_edges() {
        assert_eq!(Topology::new(vec![]), Err(TopologyError::NoEdges));
        assert_eq!(Topology::new(vec![2, 0]), Err(TopologyError::EmptyEdge { edge: 1 }));
    }

    #[test]
    fn tolerance_domain() {
        let t = Topology::new(vec![3, 2, 4]).unwrap();
        assert!(Tolerance::new(2, 1).check(&t).is_ok());
        assert!(matches!(Tolerance::new(3, 0).check(&t), Err(TopologyError::EdgeToleranceOutOfRange { .. })));
        assert!(matches!(Tolerance::new(0, 2).check(&t), Err(TopologyError::WorkerToleranceOutOfRange { .. })));
        assert_eq!(Tolerance::domain(&t).count(), 6);
    }

    #[test]
    fn deserialize_validates() {
        let bad: Result<Topology, _> = serde_json::from_str(r#"{"workers_per_edge":[1,0]}"#);
        assert!(bad.is_err());
        let good: Topology = serde_json::from_str(r#"{"workers_per_edge":[1,2]}"#).unwrap();
        assert_eq!(good.total_workers(), 3);
        assert_eq!(good.worker_offset(1), 1);
    }
}
