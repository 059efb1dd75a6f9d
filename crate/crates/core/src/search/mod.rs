//! Combinatorial search over covariance graphs for a single component.
//!
//! Candidate fits within a pass or generation are evaluated on the rayon
//! pool and reduced in input order, so results do not depend on the number
//! of worker threads. Ties on score go to the lexicographically smallest
//! bitstring.

pub mod ga;
pub mod stepwise;

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::Result;
use crate::graph::Graph;
use crate::icf::{score_structure_from, IcfConfig, ScoredStructure};
use crate::numerics::SymMatrix;
use crate::penalty::Penalty;

pub use ga::{ga_search, GaConfig};
pub use stepwise::{occam_filter, stepwise_search, StepwiseConfig};

/// The per-component S-step objective: scatter, effective sample size and penalty.
#[derive(Clone, Copy, Debug)]
pub struct StructureProblem<'a> {
    pub scatter: &'a SymMatrix,
    pub n: f64,
    pub penalty: &'a Penalty,
    pub icf: IcfConfig,
}

impl<'a> StructureProblem<'a> {
    pub fn new(scatter: &'a SymMatrix, n: f64, penalty: &'a Penalty, icf: IcfConfig) -> Self {
        Self {
            scatter,
            n,
            penalty,
            icf,
        }
    }

    pub fn v(&self) -> usize {
        self.scatter.dim()
    }

    pub fn evaluate(&self, g: &Graph) -> Result<ScoredStructure> {
        score_structure_from(self.scatter, self.n, g, None, self.penalty, &self.icf)
    }

    /// Evaluates `g` with ICF warm-started from `init`.
    pub fn evaluate_from(&self, g: &Graph, init: Option<&SymMatrix>) -> Result<ScoredStructure> {
        score_structure_from(self.scatter, self.n, g, init, self.penalty, &self.icf)
    }

    /// Evaluates every graph in parallel; output order matches input order.
    /// Candidates whose fit fails come back as `None`.
    pub fn evaluate_all(
        &self,
        graphs: &[Graph],
        init: Option<&SymMatrix>,
    ) -> Vec<Option<ScoredStructure>> {
        graphs
            .par_iter()
            .map(|g| self.evaluate_from(g, init).ok())
            .collect()
    }
}

/// Total order used for every argmax: higher score first, then smaller bitstring.
pub fn compare_candidates(a: &ScoredStructure, b: &ScoredStructure) -> Ordering {
    match a.score.partial_cmp(&b.score) {
        Some(Ordering::Equal) | None => b.graph.cmp(&a.graph),
        Some(o) => o,
    }
}

/// Best candidate under [`compare_candidates`].
pub fn best_of<'s, I>(candidates: I) -> Option<&'s ScoredStructure>
where
    I: IntoIterator<Item = &'s ScoredStructure>,
{
    candidates.into_iter().reduce(|best, c| {
        if compare_candidates(c, best) == Ordering::Greater {
            c
        } else {
            best
        }
    })
}

/// Result of a structure search.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: ScoredStructure,
    /// Best score after each pass (stepwise) or generation (GA).
    pub trace: Vec<f64>,
    /// Number of ICF fits performed.
    pub evaluations: usize,
}
