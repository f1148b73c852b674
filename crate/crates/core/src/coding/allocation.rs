use serde::{Deserialize, Serialize};

use super::CodingError;
use crate::topology::{Tolerance, Topology};
use crate::tradeoff::check_feasibility;

/// Which sub-datasets each edge and worker holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationPlan {
    pub topology: Topology,
    pub tolerance: Tolerance,
    /// Number of sub-datasets `K`.
    pub k: usize,
    /// `n_i = K(s_e+1) m_i / Σm`.
    pub edge_loads: Vec<usize>,
    /// `𝒟^i`, ascending.
    pub edge_sets: Vec<Vec<usize>>,
    /// Per-worker load `D = n_i (s_w+1) / m_i`, equal for all workers.
    pub load: usize,
    /// `𝒟^(i,j)`, ascending.
    pub worker_sets: Vec<Vec<Vec<usize>>>,
}

impl AllocationPlan {
    /// Position of sub-dataset `k` inside `𝒟^i`, if held.
    pub fn edge_position(&self, edge: usize, k: usize) -> Option<usize> {
        self.edge_sets[edge].binary_search(&k).ok()
    }

    pub fn edge_holds(&self, edge: usize, k: usize) -> bool {
        self.edge_position(edge, k).is_some()
    }

    pub fn worker_holds(&self, edge: usize, worker: usize, k: usize) -> bool {
        self.worker_sets[edge][worker].binary_search(&k).is_ok()
    }
}

fn divisibility_failure(topology: &Topology, tolerance: Tolerance, k: usize) -> Option<(usize, &'static str)> {
    let total = topology.total_workers();
    for (i, &m) in topology.workers_per_edge().iter().enumerate() {
        let scaled = k * (tolerance.edge + 1) * m;
        if !scaled.is_multiple_of(total) {
            return Some((i, "n_i = K(s_e+1)m_i/Σm"));
        }
        let n_i = scaled / total;
        if !(n_i * (tolerance.worker + 1)).is_multiple_of(m) {
            return Some((i, "D = n_i(s_w+1)/m_i"));
        }
    }
    None
}

/// Splits `K` sub-datasets over the tree.
///
/// Edge `i` takes the cyclic window of `n_i` indices starting right after
/// edge `i-1`'s window; worker `j` takes positions `jD .. jD+D` (mod `n_i`) of
/// its edge's ascending set.
pub fn allocate(topology: &Topology, tolerance: Tolerance, k: usize) -> Result<AllocationPlan, CodingError> {
    tolerance.check(topology)?;
    if k == 0 {
        return Err(CodingError::ZeroSubDatasets);
    }
    let feasibility = check_feasibility(topology, tolerance);
    if !feasibility.feasible {
        return Err(CodingError::InfeasibleTolerance(feasibility.diagnostic));
    }
    if let Some((edge, quantity)) = divisibility_failure(topology, tolerance, k) {
        // any multiple of Σm works, so the search is bounded
        let total = topology.total_workers();
        let suggested_k = (k..=k.div_ceil(total) * total)
            .find(|&kk| divisibility_failure(topology, tolerance, kk).is_none())
            .expect("a multiple of the worker count always divides");
        return Err(CodingError::Divisibility { edge, k, quantity, suggested_k });
    }

    let total = topology.total_workers();
    let edge_loads: Vec<usize> =
        topology.workers_per_edge().iter().map(|&m| k * (tolerance.edge + 1) * m / total).collect();
    if let Some((edge, &n_i)) = edge_loads.iter().enumerate().find(|(_, &n_i)| n_i > k) {
        return Err(CodingError::Degenerate { edge, n_i, k });
    }

    let mut edge_sets = Vec::with_capacity(topology.edges());
    let mut offset = 0;
    for &n_i in &edge_loads {
        let mut set: Vec<usize> = (0..n_i).map(|t| (offset + t) % k).collect();
        set.sort_unstable();
        edge_sets.push(set);
        offset += n_i;
    }

    let load = edge_loads[0] * (tolerance.worker + 1) / topology.workers(0);
    let worker_sets = edge_sets
        .iter()
        .zip(&edge_loads)
        .enumerate()
        .map(|(i, (set, &n_i))| {
            (0..topology.workers(i))
                .map(|j| {
                    let mut w: Vec<usize> = (0..load).map(|t| set[(j * load + t) % n_i]).collect();
                    w.sort_unstable();
                    w
                })
                .collect()
        })
        .collect();

    Ok(AllocationPlan { topology: topology.clone(), tolerance, k, edge_loads, edge_sets, load, worker_sets })
}
