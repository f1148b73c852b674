//! Hierarchical gradient coding for master–edge–worker distributed learning.
//!
//! * [`tradeoff`]: load/straggler bounds and feasibility.
//! * [`coding`]: two-layer allocation, code construction, encode/decode, verification.
//! * [`runtime`]: stochastic per-iteration runtime model and homogeneous closed forms.
//! * [`jncss`]: joint node and coding scheme selection, brute-force oracle, gap bounds.
//! * [`schemes`]: the compared strategies (uncoded, greedy, single-layer and hierarchical codes).
//! * [`sim`]: Monte-Carlo experiments and comparison tables.
//! * [`traindemo`]: coded gradient descent on synthetic regression data.
//!
//! Indices are 0-based throughout and times are in milliseconds.

pub mod coding;
pub mod combinatorics;
pub mod config;
pub mod jncss;
mod linalg;
pub mod rng;
pub mod runtime;
pub mod schemes;
pub mod sim;
pub mod stats;
pub mod topology;
pub mod tradeoff;
pub mod traindemo;

pub use linalg::{norm2, relative_error, DenseMatrix};
pub use topology::{Tolerance, Topology, TopologyError};
