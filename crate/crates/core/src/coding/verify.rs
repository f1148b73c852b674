//! Mechanical check of both span conditions over straggler patterns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CodingScheme, Gradient, RECOVERY_TOLERANCE};
use crate::combinatorics::{binomial, unrank_combination};
use crate::linalg::relative_error;
use crate::rng::{derive_seed, Streams};

/// Model dimension of the random gradients used per pattern.
const CHECK_DIMENSION: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum VerifyMode {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

/// Surviving edges `F` and, for every edge, its surviving workers `F_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StragglerPattern {
    pub edges: Vec<usize>,
    pub workers: Vec<Vec<usize>>,
}

impl StragglerPattern {
    /// Number of patterns: `C(n, n-s_e) · Π_i C(m_i, m_i-s_w)`.
    pub fn count(scheme: &CodingScheme) -> u128 {
        let t = &scheme.plan.topology;
        let tol = scheme.plan.tolerance;
        let mut total = binomial(t.edges(), tol.edge_quorum(t));
        for i in 0..t.edges() {
            total = total.saturating_mul(binomial(t.workers(i), tol.worker_quorum(t, i)));
        }
        total
    }

    /// The `rank`-th pattern in mixed-radix order (edge subset most significant).
    pub fn unrank(scheme: &CodingScheme, mut rank: u128) -> Self {
        let t = &scheme.plan.topology;
        let tol = scheme.plan.tolerance;
        let mut workers = vec![Vec::new(); t.edges()];
        for i in (0..t.edges()).rev() {
            let (m, f) = (t.workers(i), tol.worker_quorum(t, i));
            let radix = binomial(m, f);
            workers[i] = unrank_combination(m, f, rank % radix);
            rank /= radix;
        }
        let edges = unrank_combination(t.edges(), tol.edge_quorum(t), rank);
        Self { edges, workers }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternOutcome {
    pub rank: u128,
    pub pattern: StragglerPattern,
    pub passed: bool,
    pub relative_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mode: VerifyMode,
    pub total_patterns: u128,
    pub checked: usize,
    pub passed: usize,
    /// Largest relative recovery error among decodable patterns.
    pub worst_relative_error: f64,
    pub outcomes: Vec<PatternOutcome>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.checked
    }

    pub fn summary(&self) -> String {
        format!("{}/{} patterns pass", self.passed, self.checked)
    }
}

fn check_pattern(scheme: &CodingScheme, rank: u128, seed: u64, index: u64) -> PatternOutcome {
    let pattern = StragglerPattern::unrank(scheme, rank);
    let mut rng = Streams::new(seed).stream(index, 0);
    let gradients: Vec<Gradient> =
        (0..scheme.plan.k).map(|_| (0..CHECK_DIMENSION).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let truth: Gradient = (0..CHECK_DIMENSION).map(|t| gradients.iter().map(|g| g[t]).sum()).collect();
    match scheme.run_pipeline(&gradients, &pattern.edges, &pattern.workers) {
        Ok(decoded) => {
            let err = relative_error(&decoded, &truth);
            PatternOutcome { rank, pattern, passed: err <= RECOVERY_TOLERANCE, relative_error: Some(err), error: None }
        }
        Err(e) => PatternOutcome { rank, pattern, passed: false, relative_error: None, error: Some(e.to_string()) },
    }
}

/// Runs the full pipeline on random gradients for every pattern (or a
/// sample of them) and reports which decode to `Σ g_k`.
pub fn verify_decodability(scheme: &CodingScheme, mode: VerifyMode) -> VerificationReport {
    let total = StragglerPattern::count(scheme);
    let (ranks, seed): (Vec<u128>, u64) = match mode {
        VerifyMode::Exhaustive => ((0..total).collect(), derive_seed(scheme.seed, 0x7665_7269)),
        VerifyMode::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ranks = (0..count).map(|_| rng.random_range(0..total)).collect();
            (ranks, derive_seed(seed, 1))
        }
    };
    let outcomes: Vec<PatternOutcome> =
        ranks.par_iter().enumerate().map(|(idx, &rank)| check_pattern(scheme, rank, seed, idx as u64)).collect();
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let worst = outcomes.iter().filter_map(|o| o.relative_error).fold(0.0, f64::max);
    VerificationReport {
        mode,
        total_patterns: total,
        checked: outcomes.len(),
        passed,
        worst_relative_error: worst,
        outcomes,
    }
}
