//! Worker encoding, edge decoding and master decoding.

use std::collections::BTreeMap;

use super::{CodingError, CodingScheme, DecodeLayer, Gradient, DECODE_TOLERANCE};
use crate::linalg::solve_row_combination;

fn check_dims<'a>(vectors: impl Iterator<Item = &'a Gradient>) -> Result<usize, CodingError> {
    let mut dim = None;
    for v in vectors {
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => return Err(CodingError::DimensionMismatch { expected: d, got: v.len() }),
            _ => {}
        }
    }
    Ok(dim.unwrap_or(0))
}

/// Sorted, deduplicated quorum with range and size checks.
fn normalize_quorum(
    layer: DecodeLayer,
    set: &[usize],
    expected: usize,
    bound: usize,
    out_of_range: impl Fn(usize) -> CodingError,
) -> Result<Vec<usize>, CodingError> {
    let mut f = set.to_vec();
    f.sort_unstable();
    f.dedup();
    if let Some(&bad) = f.iter().find(|&&x| x >= bound) {
        return Err(out_of_range(bad));
    }
    if f.len() != expected || set.len() != expected {
        return Err(CodingError::QuorumSize { layer, expected, got: f.len() });
    }
    Ok(f)
}

fn combine(
    layer: DecodeLayer,
    coefficients: &[f64],
    quorum: &[usize],
    received: &BTreeMap<usize, Gradient>,
) -> Result<Gradient, CodingError> {
    for &node in quorum {
        if !received.contains_key(&node) {
            return Err(CodingError::MissingResult { layer, node });
        }
    }
    let dim = check_dims(quorum.iter().map(|q| &received[q]))?;
    let mut out = vec![0.0; dim];
    for (&c, node) in coefficients.iter().zip(quorum) {
        for (o, v) in out.iter_mut().zip(&received[node]) {
            *o += c * v;
        }
    }
    Ok(out)
}

impl CodingScheme {
    /// `G_ij = Σ_k D^i[j][k] · B[i][k] · g_k` over the worker's sub-datasets.
    ///
    /// `partials` must hold exactly the worker's sub-datasets.
    pub fn worker_encode(
        &self,
        edge: usize,
        worker: usize,
        partials: &BTreeMap<usize, Gradient>,
    ) -> Result<Gradient, CodingError> {
        let assigned = self.worker_set(edge, worker)?;
        let missing: Vec<usize> = assigned.iter().copied().filter(|k| !partials.contains_key(k)).collect();
        if !missing.is_empty() {
            return Err(CodingError::MissingPartial { missing });
        }
        let unexpected: Vec<usize> = partials.keys().copied().filter(|k| assigned.binary_search(k).is_err()).collect();
        if !unexpected.is_empty() {
            return Err(CodingError::UnexpectedPartial { unexpected });
        }
        let dim = check_dims(partials.values())?;
        let d = &self.expanded_worker_codes[edge];
        let mut out = vec![0.0; dim];
        for &k in assigned {
            let w = d.get(worker, k) * self.edge_code.get(edge, k);
            for (o, g) in out.iter_mut().zip(&partials[&k]) {
                *o += w * g;
            }
        }
        Ok(out)
    }

    /// Decoding vector `c` with `c · D̄^i[F_i] = 1`, aligned with the sorted `F_i`.
    pub fn edge_decoding_vector(&self, edge: usize, quorum: &[usize]) -> Result<(Vec<usize>, Vec<f64>), CodingError> {
        let n = self.plan.topology.edges();
        if edge >= n {
            return Err(CodingError::EdgeOutOfRange { edge });
        }
        let m = self.plan.topology.workers(edge);
        let expected = self.plan.tolerance.worker_quorum(&self.plan.topology, edge);
        let f = normalize_quorum(DecodeLayer::Edge, quorum, expected, m, |worker| CodingError::WorkerOutOfRange {
            edge,
            worker,
        })?;
        let dbar = &self.worker_codes[edge];
        let rows: Vec<&[f64]> = f.iter().map(|&j| dbar.row(j)).collect();
        let sol = solve_row_combination(&rows, &vec![1.0; dbar.cols]);
        if sol.residual > DECODE_TOLERANCE {
            return Err(CodingError::DecodeSingular {
                layer: DecodeLayer::Edge,
                residual: sol.residual,
                tolerance: DECODE_TOLERANCE,
            });
        }
        Ok((f, sol.coefficients))
    }

    /// `G_i = Σ_{j∈F_i} c_j G_ij`.
    pub fn edge_decode(
        &self,
        edge: usize,
        received: &BTreeMap<usize, Gradient>,
        quorum: &[usize],
    ) -> Result<Gradient, CodingError> {
        let (f, c) = self.edge_decoding_vector(edge, quorum)?;
        combine(DecodeLayer::Edge, &c, &f, received)
    }

    /// Decoding vector `a` with `a · B[F] = 1`, aligned with the sorted `F`.
    pub fn master_decoding_vector(&self, quorum: &[usize]) -> Result<(Vec<usize>, Vec<f64>), CodingError> {
        let n = self.plan.topology.edges();
        let expected = self.plan.tolerance.edge_quorum(&self.plan.topology);
        let f =
            normalize_quorum(DecodeLayer::Master, quorum, expected, n, |edge| CodingError::EdgeOutOfRange { edge })?;
        let rows: Vec<&[f64]> = f.iter().map(|&i| self.edge_code.row(i)).collect();
        let sol = solve_row_combination(&rows, &vec![1.0; self.plan.k]);
        if sol.residual > DECODE_TOLERANCE {
            return Err(CodingError::DecodeSingular {
                layer: DecodeLayer::Master,
                residual: sol.residual,
                tolerance: DECODE_TOLERANCE,
            });
        }
        Ok((f, sol.coefficients))
    }

    /// `g = Σ_{i∈F} a_i G_i`.
    pub fn master_decode(
        &self,
        received: &BTreeMap<usize, Gradient>,
        quorum: &[usize],
    ) -> Result<Gradient, CodingError> {
        let (f, a) = self.master_decoding_vector(quorum)?;
        combine(DecodeLayer::Master, &a, &f, received)
    }

    /// Runs encode → edge decode → master decode for one straggler pattern.
    ///
    /// `gradients[k]` is `g_k`; `edges` is `F` and `workers[i]` is `F_i` for
    /// each `i` in `F` (entries for other edges are ignored).
    pub fn run_pipeline(
        &self,
        gradients: &[Gradient],
        edges: &[usize],
        workers: &[Vec<usize>],
    ) -> Result<Gradient, CodingError> {
        if gradients.len() != self.plan.k {
            return Err(CodingError::DimensionMismatch { expected: self.plan.k, got: gradients.len() });
        }
        let mut edge_results = BTreeMap::new();
        for &i in edges {
            if i >= self.plan.topology.edges() {
                return Err(CodingError::EdgeOutOfRange { edge: i });
            }
            let quorum = workers.get(i).ok_or(CodingError::EdgeOutOfRange { edge: i })?;
            let mut received = BTreeMap::new();
            for &j in quorum {
                let set = self.worker_set(i, j)?;
                let partials: BTreeMap<usize, Gradient> = set.iter().map(|&k| (k, gradients[k].clone())).collect();
                received.insert(j, self.worker_encode(i, j, &partials)?);
            }
            edge_results.insert(i, self.edge_decode(i, &received, quorum)?);
        }
        self.master_decode(&edge_results, edges)
    }

    fn worker_set(&self, edge: usize, worker: usize) -> Result<&[usize], CodingError> {
        let sets = self.plan.worker_sets.get(edge).ok_or(CodingError::EdgeOutOfRange { edge })?;
        sets.get(worker).map(Vec::as_slice).ok_or(CodingError::WorkerOutOfRange { edge, worker })
    }
}
