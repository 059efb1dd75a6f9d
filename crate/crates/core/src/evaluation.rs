//! Clustering agreement and graph recovery metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ari: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub k_hat: usize,
    /// Notes on rate conventions applied to empty or complete truth graphs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conventions: Vec<String>,
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Hubert–Arabie adjusted Rand index.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "label vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameter(
            "ARI needs at least two observations".into(),
        ));
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(a.len() as u64);
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        // both partitions are a single cluster, or both all singletons
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Averaged best-match edge error rates of estimated graphs against truth graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphRecovery {
    pub fpr: f64,
    pub fnr: f64,
    pub conventions: Vec<String>,
}

/// For each estimated graph, FPR and FNR are minimized over the truth graphs
/// independently, then averaged over the estimated graphs.
pub fn graph_recovery_rates(estimated: &[Graph], truth: &[Graph]) -> Result<GraphRecovery> {
    if estimated.is_empty() || truth.is_empty() {
        return Err(Error::InvalidParameter(
            "graph collections must be non-empty".into(),
        ));
    }
    let v = truth[0].v();
    if estimated.iter().chain(truth).any(|g| g.v() != v) {
        return Err(Error::DimensionMismatch(
            "graphs over different numbers of variables".into(),
        ));
    }
    let mut conventions = Vec::new();
    for (k, t) in truth.iter().enumerate() {
        if t.is_empty() && t.n_pairs() > 0 {
            conventions.push(format!(
                "truth graph {} has no edges: FNR taken as 0",
                k + 1
            ));
        }
        if t.is_complete() && t.n_pairs() > 0 {
            conventions.push(format!("truth graph {} is complete: FPR taken as 0", k + 1));
        }
    }
    let (mut fpr_sum, mut fnr_sum) = (0.0, 0.0);
    for g in estimated {
        let (mut fpr, mut fnr) = (f64::INFINITY, f64::INFINITY);
        for t in truth {
            let (mut fp, mut fneg, mut pos) = (0usize, 0usize, 0usize);
            for (&e, &tr) in g.bits().iter().zip(t.bits()) {
                pos += tr as usize;
                fp += (e && !tr) as usize;
                fneg += (!e && tr) as usize;
            }
            let neg = t.n_pairs() - pos;
            fpr = fpr.min(if neg == 0 {
                0.0
            } else {
                fp as f64 / neg as f64
            });
            fnr = fnr.min(if pos == 0 {
                0.0
            } else {
                fneg as f64 / pos as f64
            });
        }
        fpr_sum += fpr;
        fnr_sum += fnr;
    }
    let m = estimated.len() as f64;
    Ok(GraphRecovery {
        fpr: fpr_sum / m,
        fnr: fnr_sum / m,
        conventions,
    })
}

/// ARI of the labels plus recovery rates of the graphs.
pub fn evaluate(
    labels: &[usize],
    truth_labels: &[usize],
    graphs: &[Graph],
    truth_graphs: &[Graph],
) -> Result<MetricReport> {
    let ari = adjusted_rand_index(labels, truth_labels)?;
    let rec = graph_recovery_rates(graphs, truth_graphs)?;
    Ok(MetricReport {
        ari,
        fpr: rec.fpr,
        fnr: rec.fnr,
        k_hat: graphs.len(),
        conventions: rec.conventions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ari_examples() {
        let a = [1, 1, 2, 2, 3, 3];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&a, &[7, 7, 0, 0, 4, 4]).unwrap(), 1.0);
        assert_abs_diff_eq!(
            adjusted_rand_index(&[1, 1, 2, 2], &[1, 1, 1, 2]).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert!(adjusted_rand_index(&[1, 2], &[1, 2, 3]).is_err());
        assert!(adjusted_rand_index(&[1], &[1]).is_err());
    }

    #[test]
    fn ari_reference_value() {
        // contingency [[2,1],[0,3]]: index 4, row sum 6, column sum 7, expected 2.8, max 6.5
        let ari = adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 1, 1]).unwrap();
        assert_abs_diff_eq!(ari, (4.0 - 2.8) / (6.5 - 2.8), epsilon = 1e-15);
    }

    #[test]
    fn recovery_examples() {
        let g12 = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let g23 = Graph::from_edges(3, &[(1, 2)]).unwrap();
        let truth = [g12.clone(), g23.clone()];
        let r = graph_recovery_rates(&truth, &truth).unwrap();
        assert_eq!((r.fpr, r.fnr), (0.0, 0.0));
        let r = graph_recovery_rates(std::slice::from_ref(&g12), &truth).unwrap();
        assert_eq!((r.fpr, r.fnr), (0.0, 0.0));
        let r = graph_recovery_rates(&[Graph::empty(3), Graph::empty(3)], &truth).unwrap();
        assert_eq!((r.fpr, r.fnr), (0.0, 1.0));
        assert!(r.conventions.is_empty());

        let r = graph_recovery_rates(&[Graph::complete(3)], &[Graph::empty(3)]).unwrap();
        assert_eq!((r.fpr, r.fnr), (1.0, 0.0));
        assert_eq!(r.conventions.len(), 1);
        assert!(graph_recovery_rates(&[Graph::empty(4)], &[Graph::empty(3)]).is_err());
    }

    fn labels() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0usize..4, n),
                prop::collection::vec(0usize..4, n),
            )
        })
    }

    proptest! {
        #[test]
        fn ari_symmetric_and_permutation_invariant((a, b) in labels(), shift in 1usize..4) {
            let ab = adjusted_rand_index(&a, &b).unwrap();
            prop_assert!((ab - adjusted_rand_index(&b, &a).unwrap()).abs() < 1e-12);
            let relabelled: Vec<usize> = a.iter().map(|&x| (x + shift) % 4 + 10).collect();
            prop_assert!((ab - adjusted_rand_index(&relabelled, &b).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
        }

        #[test]
        fn recovery_rates_bounded(bits in prop::collection::vec(any::<bool>(), 10), truth in prop::collection::vec(any::<bool>(), 10)) {
            let g = Graph::from_bits(5, bits).unwrap();
            let t = Graph::from_bits(5, truth).unwrap();
            let r = graph_recovery_rates(std::slice::from_ref(&g), &[t]).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.fpr) && (0.0..=1.0).contains(&r.fnr));
            if !g.is_empty() && !g.is_complete() {
                let s = graph_recovery_rates(std::slice::from_ref(&g), std::slice::from_ref(&g)).unwrap();
                prop_assert_eq!((s.fpr, s.fnr), (0.0, 0.0));
            }
        }
    }
}
