//! Model-based clustering with mixtures of Gaussian covariance graph models.
//!
//! Each mixture component carries a sparse covariance whose zero pattern is
//! a learned bi-directed graph. Parameters and graphs are estimated jointly
//! by a penalized structural EM: E-step, closed-form updates of weights and
//! means, then a per-component structure search over graphs where every
//! candidate covariance is fitted by iterative conditional fitting.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod icf;
pub mod numerics;
pub mod penalty;
pub mod search;
pub mod seed;
pub mod sem;
pub mod simdata;

pub use error::{Error, Result};
pub use graph::Graph;
pub use icf::{IcfConfig, ScoredStructure};
pub use numerics::{SparseCovariance, SymMatrix};
pub use penalty::{Penalty, PenaltyKind, PenaltySpec};
