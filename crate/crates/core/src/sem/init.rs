//! Starting partitions and starting graphs for the structural EM.

use kodama::{linkage, Method};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::icf::ScoredStructure;
use crate::numerics::{correlation_matrix, SymMatrix};
use crate::search::{best_of, StructureProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    /// Ward-linkage agglomerative clustering on Euclidean distances.
    Hierarchical,
    /// Lloyd's k-means with k-means++ seeding.
    Kmeans,
}

pub const DEFAULT_RHO_GRID: [f64; 7] = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Hard assignment of each row of `x` to one of `k` non-empty groups,
/// labelled `0..k` in order of first appearance.
pub fn init_partition(
    x: &DMatrix<f64>,
    k: usize,
    method: InitMethod,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = x.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::TooFewObservations { n, k });
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }
    if k == n {
        return Ok((0..n).collect());
    }
    let raw = match method {
        InitMethod::Hierarchical => ward_partition(x, k),
        InitMethod::Kmeans => kmeans_partition(x, k, seed),
    };
    Ok(relabel_by_first_appearance(&raw))
}

fn relabel_by_first_appearance(z: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    z.iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

fn row(x: &DMatrix<f64>, i: usize) -> DVector<f64> {
    x.row(i).transpose()
}

fn ward_partition(x: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let n = x.nrows();
    let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            condensed.push((x.row(i) - x.row(j)).norm());
        }
    }
    let dendrogram = linkage(&mut condensed, n, Method::Ward);

    // replay the first n - k merges with a union-find; cluster ids >= n
    // name the cluster created at step (id - n)
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for (step_idx, step) in dendrogram.steps().iter().take(n - k).enumerate() {
        let new_id = n + step_idx;
        let a = find(&mut parent, step.cluster1);
        let b = find(&mut parent, step.cluster2);
        parent[a] = new_id;
        parent[b] = new_id;
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

fn kmeans_partition(x: &DMatrix<f64>, k: usize, seed: u64) -> Vec<usize> {
    let n = x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist2 = |i: usize, c: &DVector<f64>| (x.row(i).transpose() - c).norm_squared();

    // k-means++ seeding
    let mut centers: Vec<DVector<f64>> = vec![row(x, rng.random_range(0..n))];
    while centers.len() < k {
        let d: Vec<f64> = (0..n)
            .map(|i| {
                centers
                    .iter()
                    .map(|c| dist2(i, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    chosen = i;
                    break;
                }
                u -= di;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(row(x, pick));
    }

    let mut z = vec![usize::MAX; n];
    for _ in 0..300 {
        let mut changed = false;
        for (i, zi) in z.iter_mut().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| dist2(i, &centers[a]).total_cmp(&dist2(i, &centers[b])))
                .expect("k >= 1");
            if *zi != best {
                *zi = best;
                changed = true;
            }
        }
        // refill empty clusters with the point farthest from its center
        for c in 0..k {
            if !z.contains(&c) {
                let far = (0..n)
                    .filter(|&i| z.iter().filter(|&&zz| zz == z[i]).count() > 1)
                    .max_by(|&a, &b| dist2(a, &centers[z[a]]).total_cmp(&dist2(b, &centers[z[b]])))
                    .expect("n > k leaves a cluster with two members");
                z[far] = c;
                changed = true;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| z[i] == c).collect();
            let mut mean = DVector::zeros(x.ncols());
            for &i in &members {
                mean += row(x, i);
            }
            *center = mean / members.len() as f64;
        }
        if !changed {
            break;
        }
    }
    z
}

/// Graph with an edge wherever `|r_jh| ≥ rho`.
pub fn threshold_graph(corr: &SymMatrix, rho: f64) -> Graph {
    let v = corr.dim();
    let bits = (0..v)
        .flat_map(|j| ((j + 1)..v).map(move |h| (j, h)))
        .map(|(j, h)| corr.get(j, h).abs() >= rho)
        .collect();
    Graph::from_bits(v, bits).expect("bit count matches")
}

/// Distinct threshold graphs of the correlation of `problem.scatter` over
/// `rho_grid`, each fitted and scored. Candidates whose fit fails are dropped.
pub fn threshold_candidates(
    problem: &StructureProblem<'_>,
    rho_grid: &[f64],
) -> Result<Vec<ScoredStructure>> {
    let corr = correlation_matrix(problem.scatter)?;
    let mut graphs: Vec<Graph> = Vec::new();
    for &rho in rho_grid {
        let g = threshold_graph(&corr, rho);
        if !graphs.contains(&g) {
            graphs.push(g);
        }
    }
    Ok(problem
        .evaluate_all(&graphs, None)
        .into_iter()
        .flatten()
        .collect())
}

/// Best threshold graph for one component, plus every scored candidate.
#[derive(Clone, Debug)]
pub struct InitialStructure {
    pub best: ScoredStructure,
    pub candidates: Vec<ScoredStructure>,
}

pub fn init_graph(problem: &StructureProblem<'_>, rho_grid: &[f64]) -> Result<InitialStructure> {
    let candidates = threshold_candidates(problem, rho_grid)?;
    let best = best_of(&candidates)
        .cloned()
        .ok_or_else(|| Error::AllFitsFailed("no threshold graph could be fitted".into()))?;
    Ok(InitialStructure { best, candidates })
}
