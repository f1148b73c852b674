//! Seeded construction of the first- and second-layer encoding matrices.
//!
//! Both layers face the same problem: `r` rows (edges, or workers of one edge)
//! each hold a cyclic window of columns, every column is held by exactly
//! `s + 1` rows, and any `r - s` rows must span the all-ones vector.
//!
//! Each column is a random vector in the kernel of a shared random `s × r`
//! matrix, supported on its holders and normalised to sum to one; columns with
//! the same holders share a vector. This makes every `r - s` rows span the
//! all-ones vector almost surely, which is checked before the code is
//! accepted.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use super::{allocate, AllocationPlan, CodingError, DECODE_TOLERANCE};
use crate::combinatorics::{binomial, Combinations};
use crate::linalg::{null_space, solve_row_combination, DenseMatrix};
use crate::rng::derive_seed;

/// Reseeded attempts before construction gives up.
pub const CONSTRUCTION_ATTEMPTS: usize = 8;

/// Subset counts up to this are checked exhaustively at build time.
const EXHAUSTIVE_SPAN_LIMIT: u128 = 10_000;
/// Otherwise this many random subsets are checked.
const SAMPLED_SPANS: usize = 1_000;

/// Smallest coefficient magnitude accepted, relative to the row maximum.
const MIN_RELATIVE_COEFFICIENT: f64 = 1e-3;

/// A complete two-layer code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodingScheme {
    pub plan: AllocationPlan,
    pub seed: u64,
    /// `B`, `n × K`.
    pub edge_code: DenseMatrix,
    /// `D̄^i`, `m_i × n_i`, columns in the order of `𝒟^i`.
    pub worker_codes: Vec<DenseMatrix>,
    /// `D^i`, `m_i × K`: `D̄^i` scattered onto the columns of `𝒟^i`.
    pub expanded_worker_codes: Vec<DenseMatrix>,
}

impl CodingScheme {
    /// Builds a code for `plan` from `seed`; identical inputs give identical
    /// matrices.
    pub fn build(plan: AllocationPlan, seed: u64) -> Result<Self, CodingError> {
        let mut last_reason = String::new();
        for attempt in 0..CONSTRUCTION_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt as u64));
            match try_build(&plan, &mut rng) {
                Ok((edge_code, worker_codes)) => {
                    return Self::from_parts(plan, seed, edge_code, worker_codes);
                }
                Err(reason) => last_reason = reason,
            }
        }
        Err(CodingError::Construction { attempts: CONSTRUCTION_ATTEMPTS, reason: last_reason })
    }

    /// Assembles a scheme from explicit matrices, checking shapes and supports.
    /// Span conditions are not checked here; see
    /// [`verify_decodability`](super::verify_decodability).
    pub fn from_parts(
        plan: AllocationPlan,
        seed: u64,
        edge_code: DenseMatrix,
        worker_codes: Vec<DenseMatrix>,
    ) -> Result<Self, CodingError> {
        let n = plan.topology.edges();
        if edge_code.rows != n || edge_code.cols != plan.k || !edge_code.is_well_formed() {
            return Err(CodingError::InvalidScheme(format!("edge code must be a finite {n}x{} matrix", plan.k)));
        }
        for i in 0..n {
            for k in 0..plan.k {
                if (edge_code.get(i, k) != 0.0) != plan.edge_holds(i, k) {
                    return Err(CodingError::InvalidScheme(format!(
                        "edge code support differs from allocation at ({i}, {k})"
                    )));
                }
            }
        }
        if worker_codes.len() != n {
            return Err(CodingError::InvalidScheme(format!("expected {n} worker codes")));
        }
        let mut expanded = Vec::with_capacity(n);
        for (i, dbar) in worker_codes.iter().enumerate() {
            let m = plan.topology.workers(i);
            let n_i = plan.edge_loads[i];
            if dbar.rows != m || dbar.cols != n_i || !dbar.is_well_formed() {
                return Err(CodingError::InvalidScheme(format!("worker code {i} must be a finite {m}x{n_i} matrix")));
            }
            let mut full = DenseMatrix::zeros(m, plan.k);
            for j in 0..m {
                for (pos, &k) in plan.edge_sets[i].iter().enumerate() {
                    let v = dbar.get(j, pos);
                    if (v != 0.0) != plan.worker_holds(i, j, k) {
                        return Err(CodingError::InvalidScheme(format!(
                            "worker code {i} support differs from allocation at ({j}, {k})"
                        )));
                    }
                    full.set(j, k, v);
                }
            }
            expanded.push(full);
        }
        Ok(Self { plan, seed, edge_code, worker_codes, expanded_worker_codes: expanded })
    }

    /// Parses an exported scheme and re-validates it against a fresh allocation.
    pub fn from_json(text: &str) -> Result<Self, CodingError> {
        let raw: CodingScheme = serde_json::from_str(text).map_err(|e| CodingError::InvalidScheme(e.to_string()))?;
        let expected = allocate(&raw.plan.topology, raw.plan.tolerance, raw.plan.k)?;
        if expected != raw.plan {
            return Err(CodingError::InvalidScheme("allocation does not match topology, tolerance and K".into()));
        }
        let rebuilt = Self::from_parts(raw.plan, raw.seed, raw.edge_code, raw.worker_codes)?;
        if rebuilt.expanded_worker_codes != raw.expanded_worker_codes {
            return Err(CodingError::InvalidScheme("expanded worker codes disagree with D̄".into()));
        }
        Ok(rebuilt)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scheme serializes")
    }
}

fn try_build(plan: &AllocationPlan, rng: &mut ChaCha8Rng) -> Result<(DenseMatrix, Vec<DenseMatrix>), String> {
    let n = plan.topology.edges();
    let edge_holdings: Vec<Vec<usize>> = plan.edge_sets.clone();
    let b = cyclic_code(&edge_holdings, plan.k, plan.tolerance.edge, rng).map_err(|e| format!("first layer: {e}"))?;
    check_spans(&b, n - plan.tolerance.edge, rng).map_err(|e| format!("first layer: {e}"))?;

    let mut worker_codes = Vec::with_capacity(n);
    for i in 0..n {
        let holdings: Vec<Vec<usize>> = plan.worker_sets[i]
            .iter()
            .map(|set| set.iter().map(|&k| plan.edge_position(i, k).expect("worker set within edge set")).collect())
            .collect();
        let m = plan.topology.workers(i);
        let dbar = cyclic_code(&holdings, plan.edge_loads[i], plan.tolerance.worker, rng)
            .map_err(|e| format!("edge {i}: {e}"))?;
        check_spans(&dbar, m - plan.tolerance.worker, rng).map_err(|e| format!("edge {i}: {e}"))?;
        worker_codes.push(dbar);
    }
    Ok((b, worker_codes))
}

/// Random code on the given supports such that any `rows - stragglers` rows
/// span the all-ones vector (generically; verified separately).
///
/// Every column lies in `ker H` for a random `stragglers × rows` matrix `H`,
/// restricted to its holders and scaled to sum to one. For a surviving set `F`,
/// `a = 1 + Hᵀy` with `y` chosen to zero the straggler entries then satisfies
/// `aᵀ b = 1ᵀ b = 1` for every column `b`; that `y` exists whenever the
/// straggler columns of `H` are independent, which holds almost surely.
fn cyclic_code(
    holdings: &[Vec<usize>],
    cols: usize,
    stragglers: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DenseMatrix, String> {
    let rows = holdings.len();
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); cols];
    for (r, cols_held) in holdings.iter().enumerate() {
        for &c in cols_held {
            holders[c].push(r);
        }
    }
    let symmetric = Uniform::new(-1.0, 1.0).expect("valid range");
    let h = DMatrix::<f64>::from_fn(stragglers, rows, |_, _| rng.sample(symmetric));

    let mut out = DenseMatrix::zeros(rows, cols);
    // columns with the same holders share one vector
    let mut done = vec![false; cols];
    for c in 0..cols {
        if done[c] {
            continue;
        }
        let support = &holders[c];
        if support.len() <= stragglers {
            return Err(format!("column {c} has {} holders, needs {}", support.len(), stragglers + 1));
        }
        let basis = null_space(&h.select_columns(support.iter()));
        let mut found = None;
        for _ in 0..16 {
            let weights = nalgebra::DVector::from_fn(basis.ncols(), |_, _| rng.sample(symmetric));
            let v = &basis * weights;
            let (vmax, sum) = (v.amax(), v.sum());
            if vmax > 0.0
                && sum.abs() >= MIN_RELATIVE_COEFFICIENT * vmax
                && v.iter().all(|x| x.abs() >= MIN_RELATIVE_COEFFICIENT * vmax)
            {
                found = Some(v / sum);
                break;
            }
        }
        let v = found.ok_or_else(|| format!("column {c} coefficients vanish on part of its support"))?;
        for cc in c..cols {
            if holders[cc] == *support {
                done[cc] = true;
                for (pos, &r) in support.iter().enumerate() {
                    out.set(r, cc, v[pos]);
                }
            }
        }
    }
    Ok(out)
}

/// Checks that every `quorum`-subset of rows spans the all-ones vector.
fn check_spans(code: &DenseMatrix, quorum: usize, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let ones = vec![1.0; code.cols];
    let check = |subset: &[usize]| -> Result<(), String> {
        let rows: Vec<&[f64]> = subset.iter().map(|&r| code.row(r)).collect();
        let sol = solve_row_combination(&rows, &ones);
        if sol.residual > DECODE_TOLERANCE {
            Err(format!("rows {subset:?} do not span 1 (residual {:.2e})", sol.residual))
        } else {
            Ok(())
        }
    };
    if binomial(code.rows, quorum) <= EXHAUSTIVE_SPAN_LIMIT {
        Combinations::new(code.rows, quorum).try_for_each(|s| check(&s))
    } else {
        (0..SAMPLED_SPANS).try_for_each(|_| {
            let mut subset = rand::seq::index::sample(rng, code.rows, quorum).into_vec();
            subset.sort_unstable();
            check(&subset)
        })
    }
}
