//! Greedy stepwise search alternating single-edge additions and removals,
//! with Occam's-window pruning of candidates that trail the pass optimum.

use std::collections::{BTreeMap, BTreeSet};

use super::{best_of, SearchOutcome, StructureProblem};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::icf::ScoredStructure;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepwiseConfig {
    /// Occam window width `C`; `f64::INFINITY` disables pruning.
    pub occam_c: f64,
    /// Maximum number of addition+removal cycles.
    pub max_passes: usize,
    /// Warm-start each candidate's ICF from the current covariance.
    pub warm_start: bool,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        Self {
            occam_c: 50.0,
            max_passes: 100,
            warm_start: true,
        }
    }
}

/// Edges whose deficit `D_e` against the pass optimum is at most `c`.
pub fn occam_filter<K: Ord + Copy>(deltas: &BTreeMap<K, f64>, c: f64) -> BTreeSet<K> {
    deltas
        .iter()
        .filter(|(_, &d)| d <= c)
        .map(|(&e, _)| e)
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Phase {
    Add,
    Remove,
}

pub fn stepwise_search(
    problem: &StructureProblem<'_>,
    start: ScoredStructure,
    cfg: &StepwiseConfig,
) -> Result<SearchOutcome> {
    if cfg.occam_c.is_nan() || cfg.occam_c < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Occam constant must be >= 0, got {}",
            cfg.occam_c
        )));
    }
    if start.graph.v() != problem.v() {
        return Err(Error::DimensionMismatch("start graph and scatter".into()));
    }
    let t = start.graph.n_pairs();
    let mut current = start;
    let mut trace = vec![current.score];
    let mut evaluations = 0;
    if t == 0 {
        return Ok(SearchOutcome {
            best: current,
            trace,
            evaluations,
        });
    }

    // D_e from the most recent pass that evaluated edge e, per phase
    let mut add_deltas: BTreeMap<usize, f64> = BTreeMap::new();
    let mut remove_deltas: BTreeMap<usize, f64> = BTreeMap::new();
    let mut phase = Phase::Add;
    let mut idle_passes = 0;

    for _ in 0..2 * cfg.max_passes {
        let deltas = match phase {
            Phase::Add => &mut add_deltas,
            Phase::Remove => &mut remove_deltas,
        };
        let want_present = phase == Phase::Remove;
        let pruned = pruned_edges(deltas, cfg.occam_c);
        let candidates: Vec<usize> = (0..t)
            .filter(|&e| current.graph.bit(e) == want_present && !pruned.contains(&e))
            .collect();

        let mut changed = false;
        if !candidates.is_empty() {
            let graphs: Vec<Graph> = candidates
                .iter()
                .map(|&e| current.graph.flipped(e))
                .collect();
            let init = cfg.warm_start.then(|| current.sigma.sigma());
            let results = problem.evaluate_all(&graphs, init);
            evaluations += graphs.len();

            if let Some(best) = best_of(results.iter().flatten()).cloned() {
                for (&e, r) in candidates.iter().zip(&results) {
                    let d = r.as_ref().map_or(f64::INFINITY, |s| best.score - s.score);
                    deltas.insert(e, d);
                }
                let accept = match phase {
                    Phase::Add => best.score > current.score,
                    Phase::Remove => best.score >= current.score,
                };
                if accept {
                    let flipped = candidates[results
                        .iter()
                        .position(|r| r.as_ref().is_some_and(|s| s.graph == best.graph))
                        .expect("best comes from the results")];
                    add_deltas.remove(&flipped);
                    remove_deltas.remove(&flipped);
                    current = best;
                    changed = true;
                }
            } else {
                for &e in &candidates {
                    deltas.insert(e, f64::INFINITY);
                }
            }
        }

        trace.push(current.score);
        idle_passes = if changed { 0 } else { idle_passes + 1 };
        if idle_passes >= 2 {
            break;
        }
        phase = match phase {
            Phase::Add => Phase::Remove,
            Phase::Remove => Phase::Add,
        };
    }

    Ok(SearchOutcome {
        best: current,
        trace,
        evaluations,
    })
}

fn pruned_edges(deltas: &BTreeMap<usize, f64>, c: f64) -> BTreeSet<usize> {
    let survivors = occam_filter(deltas, c);
    deltas
        .keys()
        .copied()
        .filter(|e| !survivors.contains(e))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occam_examples() {
        let deltas: BTreeMap<char, f64> = [('a', 10.0), ('b', 60.0), ('c', 49.9)]
            .into_iter()
            .collect();
        assert_eq!(
            occam_filter(&deltas, 50.0),
            ['a', 'c'].into_iter().collect()
        );
        assert_eq!(occam_filter(&deltas, f64::INFINITY).len(), 3);
        let ties: BTreeMap<char, f64> = [('a', 0.0), ('b', 1e-9)].into_iter().collect();
        assert_eq!(occam_filter(&ties, 0.0), ['a'].into_iter().collect());
    }
}
