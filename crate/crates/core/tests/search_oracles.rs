//! Stepwise and genetic search checked against exhaustive enumeration.

mod common;

use common::{exhaustive, gaussian_sample, is_local_optimum, moments_scatter, rng};
use nalgebra::DMatrix;
use sparsemix::search::{ga_search, stepwise_search, GaConfig, StepwiseConfig, StructureProblem};
use sparsemix::{Graph, IcfConfig, Penalty, SymMatrix};

const UNPRUNED: StepwiseConfig = StepwiseConfig {
    occam_c: f64::INFINITY,
    max_passes: 100,
    warm_start: true,
};

/// N=500 draws with a strong correlation between variables 1 and 2 only.
fn strong_pair_scatter() -> SymMatrix {
    let corr = DMatrix::from_row_slice(3, 3, &[1.0, 0.8, 0.0, 0.8, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let x = gaussian_sample(&mut rng(17), &corr, 500);
    SymMatrix::new(moments_scatter(&x)).unwrap()
}

#[test]
fn two_variables_pick_the_better_graph() {
    for (r, n) in [(0.05, 30.0), (0.6, 30.0), (0.2, 200.0)] {
        let s = SymMatrix::from_rows(&[vec![1.0, r], vec![r, 1.0]]).unwrap();
        let pen = Penalty::Bic { n };
        let problem = StructureProblem::new(&s, n, &pen, IcfConfig::default());
        let (_, best) = exhaustive(&problem);
        let start = problem.evaluate(&Graph::empty(2)).unwrap();
        let out = stepwise_search(&problem, start, &UNPRUNED).unwrap();
        assert_eq!(out.best.graph, best.graph, "r = {r}, n = {n}");
    }
}

#[test]
fn stepwise_keeps_a_local_optimum() {
    let s = strong_pair_scatter();
    let pen = Penalty::Bic { n: 500.0 };
    let problem = StructureProblem::new(&s, 500.0, &pen, IcfConfig::default());
    let (_, best) = exhaustive(&problem);
    let out = stepwise_search(&problem, best.clone(), &UNPRUNED).unwrap();
    assert_eq!(out.best.graph, best.graph);
}

#[test]
fn stepwise_finds_the_strong_pair() {
    let s = strong_pair_scatter();
    let pen = Penalty::Bic { n: 500.0 };
    let problem = StructureProblem::new(&s, 500.0, &pen, IcfConfig::default());
    let (_, best) = exhaustive(&problem);
    assert_eq!(best.graph, Graph::from_edges(3, &[(0, 1)]).unwrap());
    let start = problem.evaluate(&Graph::empty(3)).unwrap();
    let out = stepwise_search(&problem, start.clone(), &UNPRUNED).unwrap();
    assert_eq!(out.best.graph, best.graph);
    assert!(out.best.score >= start.score);
    assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
    assert!(is_local_optimum(&problem, &out.best, 1e-9));
}

#[test]
fn ga_full_enumeration_seed() {
    let s = strong_pair_scatter();
    let pen = Penalty::Bic { n: 500.0 };
    let problem = StructureProblem::new(&s, 500.0, &pen, IcfConfig::default());
    let (all, best) = exhaustive(&problem);
    let cfg = GaConfig {
        pop_size: 8,
        max_generations: 0,
        ..GaConfig::default()
    };
    let out = ga_search(&problem, &all, &cfg).unwrap();
    assert_eq!(out.best.graph, best.graph);
    assert_eq!(out.trace.len(), 1);
}

#[test]
fn ga_finds_the_strong_pair_across_seeds() {
    let s = strong_pair_scatter();
    let pen = Penalty::Bic { n: 500.0 };
    let problem = StructureProblem::new(&s, 500.0, &pen, IcfConfig::default());
    let (_, best) = exhaustive(&problem);
    let empty = problem.evaluate(&Graph::empty(3)).unwrap();
    let hits = (0..20)
        .filter(|&seed| {
            let cfg = GaConfig {
                pop_size: 8,
                stall_generations: 20,
                seed,
                ..GaConfig::default()
            };
            let out = ga_search(&problem, std::slice::from_ref(&empty), &cfg).unwrap();
            assert!(
                out.trace.windows(2).all(|w| w[1] >= w[0]),
                "elite score decreased"
            );
            out.best.graph == best.graph
        })
        .count();
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn ga_without_operators_keeps_a_uniform_population() {
    let s = strong_pair_scatter();
    let pen = Penalty::Bic { n: 500.0 };
    let problem = StructureProblem::new(&s, 500.0, &pen, IcfConfig::default());
    let only = problem.evaluate(&Graph::complete(3)).unwrap();
    let cfg = GaConfig {
        pop_size: 6,
        p_crossover: 0.0,
        p_mutation: 0.0,
        stall_generations: 5,
        ..GaConfig::default()
    };
    let seeds = vec![only.clone(); 6];
    let out = ga_search(&problem, &seeds, &cfg).unwrap();
    assert_eq!(out.best.graph, only.graph);
    assert_eq!(out.best.score, only.score);
}

fn v6_problem_data() -> (SymMatrix, Penalty) {
    let mut r = rng(23);
    let (s, n) = common::random_scatter(&mut r, 6);
    (s, Penalty::Bic { n: n as f64 })
}

#[test]
fn memoization_is_transparent() {
    let (s, pen) = v6_problem_data();
    let problem = StructureProblem::new(&s, 40.0, &pen, IcfConfig::default());
    let start = problem.evaluate(&Graph::empty(6)).unwrap();
    let run = |memoize| {
        let cfg = GaConfig {
            pop_size: 12,
            stall_generations: 15,
            seed: 3,
            memoize,
            ..GaConfig::default()
        };
        ga_search(&problem, std::slice::from_ref(&start), &cfg).unwrap()
    };
    let (with, without) = (run(true), run(false));
    assert_eq!(with.best.graph, without.best.graph);
    assert_eq!(with.trace, without.trace);
    assert!(with.evaluations < without.evaluations);
}

#[test]
fn thread_count_does_not_change_results() {
    let (s, pen) = v6_problem_data();
    let problem = StructureProblem::new(&s, 40.0, &pen, IcfConfig::default());
    let start = problem.evaluate(&Graph::empty(6)).unwrap();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let ga = ga_search(
                &problem,
                std::slice::from_ref(&start),
                &GaConfig {
                    pop_size: 10,
                    stall_generations: 10,
                    seed: 11,
                    ..GaConfig::default()
                },
            )
            .unwrap();
            let sw = stepwise_search(&problem, start.clone(), &StepwiseConfig::default()).unwrap();
            (
                ga.best.graph,
                ga.best.score.to_bits(),
                ga.trace,
                sw.best.graph,
                sw.best.score.to_bits(),
            )
        })
    };
    assert_eq!(run(1), run(4));
    assert_eq!(run(1), run(1));
}
