//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsemix::search::{best_of, StructureProblem};
use sparsemix::{Graph, ScoredStructure, SymMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sample covariance of mildly correlated uniform data, with its sample size.
pub fn random_scatter(rng: &mut ChaCha8Rng, v: usize) -> (SymMatrix, usize) {
    let n = v + 5 + rng.random_range(0..20);
    let a = DMatrix::from_fn(n, v, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let mix = DMatrix::from_fn(v, v, |i, j| {
        if i == j {
            1.0
        } else {
            0.6 * (rng.random::<f64>() - 0.5)
        }
    });
    let x = a * mix;
    (SymMatrix::new(x.tr_mul(&x) / n as f64).unwrap(), n)
}

pub fn random_graph(rng: &mut ChaCha8Rng, v: usize, p: f64) -> Graph {
    Graph::from_bits(
        v,
        (0..v * (v - 1) / 2)
            .map(|_| rng.random::<f64>() < p)
            .collect(),
    )
    .unwrap()
}

/// Random scatter paired with a random graph of random density.
pub fn random_instance(rng: &mut ChaCha8Rng, v: usize) -> (SymMatrix, Graph) {
    let (s, _) = random_scatter(rng, v);
    let p = rng.random_range(0.1..0.9);
    (s, random_graph(rng, v, p))
}

/// Largest |Σ⁻¹(S − Σ)Σ⁻¹| over the diagonal and the edges of `g`.
pub fn stationarity_residual(s: &DMatrix<f64>, sigma: &DMatrix<f64>, g: &Graph) -> f64 {
    let inv = sigma.clone().cholesky().unwrap().inverse();
    let m = &inv * (s - sigma) * &inv;
    let v = s.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..v {
        worst = worst.max(m[(j, j)].abs());
        for h in 0..v {
            if h != j && g.has_edge(j, h) {
                worst = worst.max(m[(j, h)].abs());
            }
        }
    }
    worst
}

pub fn all_graphs(v: usize) -> Vec<Graph> {
    let t = v * (v - 1) / 2;
    (0..1u64 << t)
        .map(|mask| {
            Graph::from_bits(v, (0..t).map(|i| mask >> (t - 1 - i) & 1 == 1).collect()).unwrap()
        })
        .collect()
}

/// Scores every graph on `problem.v()` nodes and returns all of them with the optimum.
pub fn exhaustive(problem: &StructureProblem<'_>) -> (Vec<ScoredStructure>, ScoredStructure) {
    let all: Vec<ScoredStructure> = all_graphs(problem.v())
        .iter()
        .map(|g| problem.evaluate(g).unwrap())
        .collect();
    let best = best_of(&all).unwrap().clone();
    (all, best)
}

/// True when no single-edge flip of `s.graph` scores higher than `s` by more than `tol`.
pub fn is_local_optimum(problem: &StructureProblem<'_>, s: &ScoredStructure, tol: f64) -> bool {
    (0..s.graph.n_pairs())
        .all(|i| problem.evaluate(&s.graph.flipped(i)).unwrap().score <= s.score + tol)
}

/// Closed-form saturated Gaussian log-likelihood `−(N/2)[V ln 2π + ln det S + V]`.
pub fn saturated_loglik(x: &DMatrix<f64>) -> f64 {
    let (n, v) = (x.nrows() as f64, x.ncols() as f64);
    let s = moments_scatter(x);
    let logdet = s
        .clone()
        .cholesky()
        .unwrap()
        .l()
        .diagonal()
        .iter()
        .map(|d| 2.0 * d.ln())
        .sum::<f64>();
    -0.5 * n * (v * (2.0 * std::f64::consts::PI).ln() + logdet + v)
}

/// Sum of independent univariate Gaussian maximum log-likelihoods.
pub fn diagonal_loglik(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let s = moments_scatter(x);
    (0..x.ncols())
        .map(|j| -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + s[(j, j)].ln() + 1.0))
        .sum()
}

/// Maximum-likelihood (1/N) covariance.
pub fn moments_scatter(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    c.tr_mul(&c) / n
}

/// Draws `n` points from N(0, Σ) where Σ has unit variances and the given
/// off-diagonal correlations.
pub fn gaussian_sample(rng: &mut ChaCha8Rng, corr: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    use rand_distr::StandardNormal;
    let l = corr.clone().cholesky().unwrap().l();
    let z = DMatrix::from_fn(n, corr.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    z * l.transpose()
}
