//! Genetic algorithm over adjacency bitstrings: rank-weighted selection,
//! single-point crossover, single-bit mutation and elitism.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{best_of, compare_candidates, SearchOutcome, StructureProblem};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::icf::ScoredStructure;
use crate::penalty::default_er_alpha;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaConfig {
    pub pop_size: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    /// Stop after this many generations without improvement of the elite.
    pub stall_generations: usize,
    pub max_generations: usize,
    pub seed: u64,
    /// Edge probability for random individuals filling the initial
    /// population; `None` uses `ln V / T`.
    pub fill_density: Option<f64>,
    /// Reuse fitness of bitstrings evaluated in earlier generations.
    pub memoize: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            pop_size: 50,
            p_crossover: 0.8,
            p_mutation: 0.2,
            stall_generations: 100,
            max_generations: 1000,
            seed: 0,
            fill_density: None,
            memoize: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.pop_size < 4 || !prob(self.p_crossover) || !prob(self.p_mutation) {
            return Err(Error::InvalidParameter(format!(
                "invalid GA config {self:?}"
            )));
        }
        if let Some(d) = self.fill_density {
            if !prob(d) {
                return Err(Error::InvalidParameter(format!(
                    "fill density {d} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

struct Evaluator<'p, 'a> {
    problem: &'p StructureProblem<'a>,
    pinned: HashMap<Graph, ScoredStructure>,
    cache: HashMap<Graph, Option<ScoredStructure>>,
    memoize: bool,
    evaluations: usize,
}

impl Evaluator<'_, '_> {
    /// Fitness of every individual, in population order.
    fn evaluate(&mut self, population: &[Graph]) -> Vec<Option<ScoredStructure>> {
        if !self.memoize {
            self.cache.clear();
        }
        let mut pending: Vec<Graph> = Vec::new();
        for g in population {
            if !self.pinned.contains_key(g) && !self.cache.contains_key(g) && !pending.contains(g) {
                pending.push(g.clone());
            }
        }
        let results = self.problem.evaluate_all(&pending, None);
        self.evaluations += pending.len();
        for (g, r) in pending.into_iter().zip(results) {
            self.cache.insert(g, r);
        }
        population
            .iter()
            .map(|g| match self.pinned.get(g) {
                Some(s) => Some(s.clone()),
                None => self.cache[g].clone(),
            })
            .collect()
    }
}

/// Evolves a population seeded with `seeds` (already scored against
/// `problem`) and returns the best structure found.
pub fn ga_search(
    problem: &StructureProblem<'_>,
    seeds: &[ScoredStructure],
    cfg: &GaConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    if seeds.len() > cfg.pop_size {
        return Err(Error::InvalidParameter(format!(
            "{} seed structures exceed population size {}",
            seeds.len(),
            cfg.pop_size
        )));
    }
    let v = problem.v();
    let t = crate::graph::pair_count(v);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let density = match cfg.fill_density {
        Some(d) => d,
        None if v >= 2 => default_er_alpha(v)?,
        None => 0.0,
    };
    let mut population: Vec<Graph> = seeds.iter().map(|s| s.graph.clone()).collect();
    while population.len() < cfg.pop_size {
        let bits = (0..t).map(|_| rng.random_bool(density)).collect();
        population.push(Graph::from_bits(v, bits)?);
    }

    let mut eval = Evaluator {
        problem,
        pinned: seeds.iter().map(|s| (s.graph.clone(), s.clone())).collect(),
        cache: HashMap::new(),
        memoize: cfg.memoize,
        evaluations: 0,
    };
    let mut fitness = eval.evaluate(&population);
    let mut best = best_of(fitness.iter().flatten())
        .cloned()
        .ok_or_else(|| Error::AllFitsFailed("initial GA population".into()))?;
    let mut trace = vec![best.score];
    let mut stall = 0;

    for _ in 0..cfg.max_generations {
        if stall >= cfg.stall_generations || t == 0 {
            break;
        }
        let mut next = select(&population, &fitness, &mut rng)?;
        crossover(&mut next, cfg.p_crossover, &mut rng)?;
        mutate(&mut next, cfg.p_mutation, &mut rng)?;
        let mut next_fitness = eval.evaluate(&next);

        if !next.contains(&best.graph) {
            let worst = worst_index(&next_fitness);
            next[worst] = best.graph.clone();
            next_fitness[worst] = Some(best.clone());
        }
        population = next;
        fitness = next_fitness;

        let gen_best = best_of(fitness.iter().flatten()).expect("elite is always present");
        if gen_best.score > best.score {
            best = gen_best.clone();
            stall = 0;
        } else {
            stall += 1;
        }
        trace.push(best.score);
    }

    Ok(SearchOutcome {
        best,
        trace,
        evaluations: eval.evaluations,
    })
}

/// Rank-weighted sampling with replacement: rank `r` (1 = fittest) gets
/// weight `P − r + 1`.
fn select(
    population: &[Graph],
    fitness: &[Option<ScoredStructure>],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Graph>> {
    let p = population.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| match (&fitness[a], &fitness[b]) {
        (Some(x), Some(y)) => compare_candidates(y, x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => population[a].cmp(&population[b]),
    });
    let weights: Vec<usize> = (0..p).map(|r| p - r).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((0..p)
        .map(|_| population[order[dist.sample(rng)]].clone())
        .collect())
}

fn crossover(population: &mut [Graph], prob: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    for pair in population.chunks_exact_mut(2) {
        let t = pair[0].n_pairs();
        if t < 2 || !rng.random_bool(prob) {
            continue;
        }
        let point = rng.random_range(1..t);
        let (a, b) = (pair[0].bits(), pair[1].bits());
        let child1: Vec<bool> = a[..point].iter().chain(&b[point..]).copied().collect();
        let child2: Vec<bool> = b[..point].iter().chain(&a[point..]).copied().collect();
        let v = pair[0].v();
        pair[0] = Graph::from_bits(v, child1)?;
        pair[1] = Graph::from_bits(v, child2)?;
    }
    Ok(())
}

fn mutate(population: &mut [Graph], prob: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    for g in population.iter_mut() {
        let t = g.n_pairs();
        if t == 0 || !rng.random_bool(prob) {
            continue;
        }
        let idx = rng.random_range(0..t);
        *g = g.flipped(idx);
    }
    Ok(())
}

fn worst_index(fitness: &[Option<ScoredStructure>]) -> usize {
    let mut worst = 0;
    for i in 1..fitness.len() {
        let replace = match (&fitness[i], &fitness[worst]) {
            (None, Some(_)) => true,
            (Some(a), Some(b)) => compare_candidates(a, b) == std::cmp::Ordering::Less,
            _ => false,
        };
        if replace {
            worst = i;
        }
    }
    worst
}
