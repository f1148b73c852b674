//! Two-layer hierarchical gradient coding.
//!
//! Sub-datasets are spread over edges in cyclic windows so every sub-dataset is
//! held by `s_e + 1` edges, and each edge spreads its share over its workers in
//! cyclic windows of length `D` so every held sub-dataset reaches `s_w + 1`
//! workers. A first-layer matrix `B` (edges × sub-datasets) lets the master
//! recover `Σ g_k` from any `n - s_e` edge results; per-edge matrices `D̄^i`
//! (workers × edge sub-datasets) let edge `i` recover its coded partial sum
//! `G_i = Σ_k B[i][k] g_k` from any `m_i - s_w` workers.
//!
//! ```text
//!   worker (i,j):  G_ij = Σ_k D^i[j][k] · B[i][k] · g_k
//!   edge i:        G_i  = Σ_{j∈F_i} c_j · G_ij        with c · D̄^i[F_i] = 1
//!   master:        g    = Σ_{i∈F}   a_i · G_i         with a · B[F]    = 1
//! ```

mod allocation;
mod construct;
mod pipeline;
mod verify;

use thiserror::Error;

pub use crate::linalg::DenseMatrix;
pub use crate::topology::{Tolerance, Topology, TopologyError};
pub use allocation::{allocate, AllocationPlan};
pub use construct::{CodingScheme, CONSTRUCTION_ATTEMPTS};
pub use verify::{verify_decodability, PatternOutcome, StragglerPattern, VerificationReport, VerifyMode};

/// A gradient (or partial gradient) of model dimension `d`.
pub type Gradient = Vec<f64>;

/// Residual bound for a decoding vector, `|| c · M - 1 ||_inf`.
pub const DECODE_TOLERANCE: f64 = 1e-8;

/// Relative error allowed between a decoded gradient and `Σ g_k`.
pub const RECOVERY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeLayer {
    Edge,
    Master,
}

impl std::fmt::Display for DecodeLayer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecodeLayer::Edge => write!(f, "edge"),
            DecodeLayer::Master => write!(f, "master"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodingError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("number of sub-datasets K must be positive")]
    ZeroSubDatasets,
    #[error(
        "K = {k} does not divide evenly at edge {edge} ({quantity} is not an integer); \
         the smallest K' >= K that works is {suggested_k}"
    )]
    Divisibility { edge: usize, k: usize, quantity: &'static str, suggested_k: usize },
    #[error("infeasible tolerance: {0}")]
    InfeasibleTolerance(String),
    #[error("edge {edge} would hold {n_i} sub-datasets but only K = {k} exist")]
    Degenerate { edge: usize, n_i: usize, k: usize },
    #[error("code construction failed after {attempts} attempts: {reason}")]
    Construction { attempts: usize, reason: String },
    #[error("edge {edge} index out of range")]
    EdgeOutOfRange { edge: usize },
    #[error("worker ({edge}, {worker}) index out of range")]
    WorkerOutOfRange { edge: usize, worker: usize },
    #[error("missing partial gradients for sub-datasets {missing:?}")]
    MissingPartial { missing: Vec<usize> },
    #[error("sub-datasets {unexpected:?} are not assigned to this worker")]
    UnexpectedPartial { unexpected: Vec<usize> },
    #[error("{layer} decode expects {expected} results, got a set of {got}")]
    QuorumSize { layer: DecodeLayer, expected: usize, got: usize },
    #[error("{layer} decode is missing the result of node {node}")]
    MissingResult { layer: DecodeLayer, node: usize },
    #[error("{layer} decode is singular: residual {residual:.3e} exceeds {tolerance:.1e}")]
    DecodeSingular { layer: DecodeLayer, residual: f64, tolerance: f64 },
    #[error("gradient dimensions disagree ({expected} vs {got})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
}
