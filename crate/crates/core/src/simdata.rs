//! Synthetic mixtures of covariance graph models for the four benchmark
//! scenarios: a moving block, Erdős–Rényi graphs, hub graphs and a mix of
//! block, random and Toeplitz structures.

use nalgebra::{DMatrix, DVector};
use rand::distr::{weighted::WeightedIndex, Distribution, Uniform};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::icf::{fit_covariance, IcfConfig};
use crate::numerics::{SparseCovariance, SymMatrix};
use crate::seed::derive_seed;

/// Mixing proportions used for three-component simulations.
pub const DEFAULT_TAU: [f64; 3] = [0.2, 0.5, 0.3];

/// Off-diagonal value of the pseudo-target projected onto each graph.
const PSEUDO_TARGET_OFFDIAG: f64 = 0.9;

const MEAN_STREAM: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: u8,
    pub v: usize,
    pub k: usize,
    pub seed: u64,
    /// Edge probability per component (scenario 2).
    pub er_probs: Vec<f64>,
    /// Sparsity per component (scenario 3); realized density is `1 − s`.
    pub hub_sparsity: Vec<f64>,
    pub toeplitz_band: f64,
    /// Block size; `None` means `⌊V/2⌋` for scenario 1 and 5 for scenario 4.
    pub block_size: Option<usize>,
}

impl ScenarioSpec {
    pub fn new(id: u8, v: usize, k: usize, seed: u64) -> Self {
        Self {
            id,
            v,
            k,
            seed,
            er_probs: vec![0.3, 0.2, 0.1],
            hub_sparsity: vec![0.7, 0.8, 0.9],
            toeplitz_band: 0.5,
            block_size: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.id) {
            return Err(Error::InvalidParameter(format!(
                "unknown scenario {}",
                self.id
            )));
        }
        if self.v < 4 {
            return Err(Error::InvalidParameter(format!(
                "scenarios need v >= 4, got {}",
                self.v
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let per_component = match self.id {
            2 => Some(("er_probs", &self.er_probs)),
            3 => Some(("hub_sparsity", &self.hub_sparsity)),
            _ => None,
        };
        if let Some((name, p)) = per_component {
            if p.len() < self.k {
                return Err(Error::InvalidParameter(format!(
                    "{name} has {} entries for k = {}",
                    p.len(),
                    self.k
                )));
            }
            if p.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                return Err(Error::InvalidParameter(format!(
                    "{name} entries must lie in (0, 1)"
                )));
            }
        }
        if matches!(self.block_size, Some(0)) {
            return Err(Error::InvalidParameter(
                "block size must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn clique(v: usize, nodes: std::ops::Range<usize>) -> Graph {
    let mut g = Graph::empty(v);
    for a in nodes.clone() {
        for b in a + 1..nodes.end {
            g.set_edge(a, b, true).expect("nodes in range");
        }
    }
    g
}

fn erdos_renyi(v: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let bits = (0..v * (v - 1) / 2).map(|_| rng.random_bool(p)).collect();
    Graph::from_bits(v, bits).expect("bit count matches v")
}

/// `⌈V/2⌉` random hubs; every pair touching a hub is an edge with the
/// probability that makes the expected density `1 − sparsity`.
fn hub_graph(v: usize, sparsity: f64, rng: &mut impl Rng) -> Graph {
    let n_hubs = v.div_ceil(2);
    let mut is_hub = vec![false; v];
    for h in sample(rng, v, n_hubs) {
        is_hub[h] = true;
    }
    let t = (v * (v - 1) / 2) as f64;
    let touching = t - ((v - n_hubs) * (v - n_hubs).saturating_sub(1) / 2) as f64;
    let p = ((1.0 - sparsity) * t / touching).min(1.0);
    let mut g = Graph::empty(v);
    for idx in 0..g.n_pairs() {
        let (a, b) = g.pair_at(idx);
        if (is_hub[a] || is_hub[b]) && rng.random_bool(p) {
            g.set_edge(a, b, true).expect("pair in range");
        }
    }
    g
}

fn block_diagonal(v: usize, size: usize) -> Graph {
    let mut g = Graph::empty(v);
    for start in (0..v).step_by(size) {
        for e in clique(v, start..(start + size).min(v)).edges() {
            g.set_edge(e.0, e.1, true).expect("edge in range");
        }
    }
    g
}

fn toeplitz(v: usize, band: f64) -> Result<SparseCovariance> {
    let mut m = DMatrix::identity(v, v);
    let mut g = Graph::empty(v);
    for j in 1..v {
        m[(j, j - 1)] = band;
        m[(j - 1, j)] = band;
        g.set_edge(j - 1, j, true)?;
    }
    let sigma = SymMatrix::new(m)?;
    if !sigma.is_positive_definite() {
        return Err(Error::NotPositiveDefinite("Toeplitz covariance"));
    }
    SparseCovariance::new(sigma, g)
}

fn project_pseudo_target(g: &Graph) -> Result<SparseCovariance> {
    let v = g.v();
    let target = SymMatrix::new(DMatrix::from_fn(v, v, |a, b| {
        if a == b {
            1.0
        } else {
            PSEUDO_TARGET_OFFDIAG
        }
    }))?;
    Ok(fit_covariance(&target, g, &IcfConfig::default())?.sigma)
}

/// True graph and covariance of every component of a scenario.
pub fn scenario_components(spec: &ScenarioSpec) -> Result<Vec<(Graph, SparseCovariance)>> {
    spec.validate()?;
    let v = spec.v;
    (0..spec.k)
        .map(|c| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[spec.id as u64, c as u64]));
            let g = match spec.id {
                1 => {
                    let b = spec.block_size.unwrap_or(v / 2).min(v);
                    let start = if spec.k == 1 {
                        0
                    } else {
                        c * (v - b) / (spec.k - 1)
                    };
                    clique(v, start..start + b)
                }
                2 => erdos_renyi(v, spec.er_probs[c], &mut rng),
                3 => hub_graph(v, spec.hub_sparsity[c], &mut rng),
                _ => match c % 3 {
                    0 => block_diagonal(v, spec.block_size.unwrap_or(5)),
                    1 => erdos_renyi(v, 0.2, &mut rng),
                    _ => {
                        let sigma = toeplitz(v, spec.toeplitz_band)?;
                        return Ok((sigma.pattern().clone(), sigma));
                    }
                },
            };
            let sigma = project_pseudo_target(&g)?;
            Ok((g, sigma))
        })
        .collect()
}

/// Component means with coordinates uniform on `(−(k+1), k+1)`.
pub fn scenario_means(v: usize, k: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[MEAN_STREAM]));
    (0..k)
        .map(|c| {
            let r = (c + 1) as f64;
            let u = Uniform::new(-r, r).expect("non-empty range");
            DVector::from_fn(v, |_, _| u.sample(&mut rng))
        })
        .collect()
}

/// Draws `n` labelled observations; labels are 0-based component indices.
pub fn sample_mixture(
    tau: &[f64],
    components: &[SparseCovariance],
    means: &[DVector<f64>],
    n: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if tau.len() != components.len() || tau.len() != means.len() || tau.is_empty() {
        return Err(Error::DimensionMismatch("tau, components and means".into()));
    }
    if tau.iter().any(|&t| t.is_nan() || t < 0.0) || (tau.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(
            "tau must be non-negative and sum to 1".into(),
        ));
    }
    let v = means[0].len();
    if means.iter().any(|m| m.len() != v) || components.iter().any(|s| s.dim() != v) {
        return Err(Error::DimensionMismatch(
            "component dimensions differ".into(),
        ));
    }
    let factors = components
        .iter()
        .map(|s| Ok(s.sigma().cholesky()?.l()))
        .collect::<Result<Vec<_>>>()?;
    let choose = WeightedIndex::new(tau).map_err(|_| Error::ZeroWeights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, v);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = choose.sample(&mut rng);
        let z = DVector::from_fn(v, |_, _| rng.sample::<f64, _>(StandardNormal));
        let row = &means[c] + &factors[c] * z;
        x.row_mut(i).copy_from(&row.transpose());
        labels.push(c);
    }
    Ok((x, labels))
}

/// A full simulated data set with its ground truth.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub x: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub graphs: Vec<Graph>,
    pub covariances: Vec<SparseCovariance>,
    pub means: Vec<DVector<f64>>,
    pub tau: Vec<f64>,
}

/// Generates a scenario and samples `n` observations. Three components use
/// proportions (0.2, 0.5, 0.3); other counts use equal proportions.
pub fn simulate(spec: &ScenarioSpec, n: usize) -> Result<Simulation> {
    let comps = scenario_components(spec)?;
    let tau = if spec.k == DEFAULT_TAU.len() {
        DEFAULT_TAU.to_vec()
    } else {
        vec![1.0 / spec.k as f64; spec.k]
    };
    let means = scenario_means(spec.v, spec.k, spec.seed);
    let (graphs, covariances): (Vec<_>, Vec<_>) = comps.into_iter().unzip();
    let (x, labels) = sample_mixture(
        &tau,
        &covariances,
        &means,
        n,
        derive_seed(spec.seed, &[MEAN_STREAM + 1]),
    )?;
    Ok(Simulation {
        x,
        labels,
        graphs,
        covariances,
        means,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn moving_block() {
        let comps = scenario_components(&ScenarioSpec::new(1, 10, 3, 1)).unwrap();
        let starts: Vec<usize> = comps
            .iter()
            .map(|(g, _)| {
                assert_eq!(g.edge_count(), 10);
                g.edges()[0].0
            })
            .collect();
        assert_eq!(starts, vec![0, 2, 5]);
        assert_eq!(comps[0].0, clique(10, 0..5));
    }

    #[test]
    fn toeplitz_component() {
        let comps = scenario_components(&ScenarioSpec::new(4, 5, 3, 0)).unwrap();
        let s = comps[2].1.sigma();
        for a in 0usize..5 {
            for b in 0..5 {
                let want = match a.abs_diff(b) {
                    0 => 1.0,
                    1 => 0.5,
                    _ => 0.0,
                };
                assert_eq!(s.get(a, b), want);
            }
        }
        let eig = s.matrix().clone().symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| e > 0.0));
        assert!(toeplitz(5, 0.9).is_err());
    }

    #[test]
    fn every_scenario_is_pattern_exact() {
        for id in 1..=4 {
            for seed in 0..3 {
                for (g, s) in scenario_components(&ScenarioSpec::new(id, 10, 3, seed)).unwrap() {
                    assert!(s.sigma().is_positive_definite());
                    for idx in 0..g.n_pairs() {
                        let (a, b) = g.pair_at(idx);
                        assert_eq!(s.sigma().get(a, b) == 0.0, !g.bit(idx), "scenario {id}");
                    }
                }
            }
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = ScenarioSpec::new(3, 12, 3, 42);
        let a = simulate(&spec, 50).unwrap();
        let b = simulate(&spec, 50).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.graphs, b.graphs);
        assert!(ScenarioSpec::new(5, 10, 3, 0).validate().is_err());
        assert!(ScenarioSpec::new(1, 3, 3, 0).validate().is_err());
    }

    #[test]
    fn hub_density_tracks_sparsity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in [0.7, 0.8, 0.9] {
            let reps = 200;
            let dens: f64 = (0..reps)
                .map(|_| hub_graph(20, s, &mut rng).edge_count() as f64 / 190.0)
                .sum::<f64>()
                / reps as f64;
            assert_abs_diff_eq!(dens, 1.0 - s, epsilon = 0.01);
        }
    }

    #[test]
    fn single_component_labels() {
        let s = SparseCovariance::full(SymMatrix::identity(2)).unwrap();
        let (_, labels) = sample_mixture(&[1.0], &[s], &[DVector::zeros(2)], 100, 0).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn means_ranges() {
        let m = scenario_means(50, 3, 9);
        for (c, mu) in m.iter().enumerate() {
            assert!(mu.iter().all(|x| x.abs() < (c + 1) as f64));
        }
    }
}
