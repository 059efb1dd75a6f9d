//! Structural EM checked against closed forms, a plain Gaussian-mixture EM
//! and per-component exhaustive search.

mod common;

use common::{
    diagonal_loglik, exhaustive, gaussian_sample, moments_scatter, rng, saturated_loglik,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use sparsemix::evaluation::{adjusted_rand_index, graph_recovery_rates};
use sparsemix::icf::ScoredStructure;
use sparsemix::numerics::SparseCovariance;
use sparsemix::search::{StepwiseConfig, StructureProblem};
use sparsemix::sem::em::{m_step_weights_means, SStepContext};
use sparsemix::sem::{
    classify, fit, fit_from_partition, init_partition, s_step, select_model, FitConfig, InitMethod,
    InitialGraph, Responsibilities, SearchStrategy,
};
use sparsemix::{Error, Graph, IcfConfig, Penalty, PenaltyKind, PenaltySpec};

fn forced(graph: InitialGraph) -> FitConfig {
    FitConfig {
        penalty: PenaltySpec::new(PenaltyKind::None),
        search: SearchStrategy::Fixed,
        initial_graph: graph,
        prior_c: None,
        ..FitConfig::default()
    }
}

fn correlated_sample(seed: u64, n: usize) -> DMatrix<f64> {
    let corr = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0]);
    gaussian_sample(&mut rng(seed), &corr, n).add_scalar(2.0)
}

#[test]
fn single_complete_component_is_the_saturated_gaussian() {
    let x = correlated_sample(1, 150);
    let f = fit(&x, 1, &forced(InitialGraph::Complete)).unwrap();
    let want = saturated_loglik(&x);
    assert!(
        ((f.loglik - want) / want).abs() < 1e-6,
        "{} vs {want}",
        f.loglik
    );
    assert_eq!(f.n_params, 3 + 6);
    assert!(f.converged);
}

#[test]
fn single_empty_component_is_independent_univariate_fits() {
    let x = correlated_sample(2, 150);
    let f = fit(&x, 1, &forced(InitialGraph::Empty)).unwrap();
    let want = diagonal_loglik(&x);
    assert!(((f.loglik - want) / want).abs() < 1e-6);
    assert_eq!(f.n_params, 6);
}

/// Unconstrained EM for a Gaussian mixture started from a hard partition.
fn plain_em(x: &DMatrix<f64>, z0: &[usize], k: usize, iterations: usize) -> f64 {
    let (n, v) = x.shape();
    let mut z = DMatrix::from_fn(n, k, |i, c| if z0[i] == c { 1.0 } else { 0.0 });
    let mut loglik = 0.0;
    for it in 0..=iterations {
        let mut params = Vec::new();
        for c in 0..k {
            let nk: f64 = z.column(c).sum();
            let mut mu = DVector::zeros(v);
            for i in 0..n {
                mu += x.row(i).transpose() * z[(i, c)];
            }
            mu /= nk;
            let mut cov = DMatrix::zeros(v, v);
            for i in 0..n {
                let d = x.row(i).transpose() - &mu;
                cov += &d * d.transpose() * z[(i, c)];
            }
            cov /= nk;
            params.push((nk / n as f64, mu, cov));
        }
        loglik = 0.0;
        for i in 0..n {
            let dens: Vec<f64> = params
                .iter()
                .map(|(tau, mu, cov)| {
                    let ch = cov.clone().cholesky().unwrap();
                    let d = x.row(i).transpose() - mu;
                    let q = d.dot(&ch.solve(&d));
                    let det = ch.determinant();
                    tau * (-0.5 * q).exp()
                        / ((2.0 * std::f64::consts::PI).powi(v as i32) * det).sqrt()
                })
                .collect();
            let total: f64 = dens.iter().sum();
            loglik += total.ln();
            for c in 0..k {
                z[(i, c)] = dens[c] / total;
            }
        }
        if it == iterations {
            break;
        }
    }
    loglik
}

#[test]
fn complete_graphs_reproduce_plain_em() {
    let mut r = rng(3);
    let n = 120;
    let x = DMatrix::from_fn(n, 2, |i, _| {
        r.sample::<f64, _>(StandardNormal) + if i % 2 == 0 { 0.0 } else { 2.5 }
    });
    let z0 = init_partition(&x, 2, InitMethod::Hierarchical, 0).unwrap();
    let cfg = FitConfig {
        max_iter: 15,
        ..forced(InitialGraph::Complete)
    };
    let f = fit_from_partition(&x, 2, &z0, &cfg).unwrap();
    let want = plain_em(&x, &z0, 2, f.iterations);
    assert!(
        ((f.loglik - want) / n as f64).abs() < 1e-6,
        "{} vs {want}",
        f.loglik
    );
}

#[test]
fn s_step_matches_per_component_exhaustive_search() {
    let c1 = DMatrix::from_row_slice(3, 3, &[1.0, 0.8, 0.0, 0.8, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let c2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.8, 0.0, 0.8, 1.0]);
    let mut r = rng(4);
    let a = gaussian_sample(&mut r, &c1, 500);
    let b = gaussian_sample(&mut r, &c2, 500);
    let x = DMatrix::from_fn(
        1000,
        3,
        |i, j| if i < 500 { a[(i, j)] } else { b[(i - 500, j)] },
    );
    let labels: Vec<usize> = (0..1000).map(|i| i / 500).collect();
    let stats = m_step_weights_means(&x, &Responsibilities::from_hard(&labels, 2)).unwrap();

    let pen = Penalty::Bic { n: 1000.0 };
    let strategy = SearchStrategy::Stepwise(StepwiseConfig {
        occam_c: f64::INFINITY,
        ..StepwiseConfig::default()
    });
    let ctx = SStepContext {
        prior: None,
        penalty: &pen,
        strategy: &strategy,
        icf: IcfConfig::default(),
        rho_grid: &[],
        seed: 0,
    };
    let empty = |s: &sparsemix::SymMatrix| ScoredStructure {
        graph: Graph::empty(3),
        sigma: SparseCovariance::new(
            sparsemix::SymMatrix::from_diagonal(&s.diagonal()),
            Graph::empty(3),
        )
        .unwrap(),
        score: f64::NEG_INFINITY,
        converged: true,
    };
    let prev: Vec<ScoredStructure> = stats.iter().map(|s| empty(&s.scatter)).collect();
    let out = s_step(&stats, &prev, &ctx, 1).unwrap();
    for (st, got) in stats.iter().zip(&out) {
        let problem = StructureProblem::new(&st.scatter, st.n_k, &pen, IcfConfig::default());
        let (_, best) = exhaustive(&problem);
        assert_eq!(got.graph, best.graph);
    }
    assert_eq!(out[0].graph, Graph::from_edges(3, &[(0, 1)]).unwrap());
    assert_eq!(out[1].graph, Graph::from_edges(3, &[(1, 2)]).unwrap());
}

#[test]
fn fixed_strategy_refits_the_same_graph() {
    let x = correlated_sample(5, 100);
    let stats = m_step_weights_means(&x, &Responsibilities::from_hard(&vec![0; 100], 1)).unwrap();
    let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
    let pen = Penalty::None;
    let problem = StructureProblem::new(&stats[0].scatter, 100.0, &pen, IcfConfig::default());
    let prev = problem.evaluate(&g).unwrap();
    let ctx = SStepContext {
        prior: None,
        penalty: &pen,
        strategy: &SearchStrategy::Fixed,
        icf: IcfConfig::default(),
        rho_grid: &[],
        seed: 0,
    };
    let out = s_step(&stats, std::slice::from_ref(&prev), &ctx, 1).unwrap();
    assert_eq!(out[0].graph, g);
    assert!(out[0].score >= prev.score - 1e-9);
}

fn separated_pair(seed: u64) -> (DMatrix<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let truth: Vec<usize> = (0..400).map(|i| i % 2).collect();
    let x = DMatrix::from_fn(400, 4, |i, _| {
        r.sample::<f64, _>(StandardNormal) + if truth[i] == 0 { -5.0 } else { 5.0 }
    });
    (x, truth)
}

#[test]
fn separated_diagonal_mixture_is_recovered() {
    let empty = [Graph::empty(4), Graph::empty(4)];
    let bic = FitConfig {
        penalty: PenaltySpec::new(PenaltyKind::Bic),
        ..FitConfig::default()
    };
    let mut er_fpr = 0.0;
    let reps = 30;
    for seed in 0..reps {
        let (x, truth) = separated_pair(seed);
        let f = fit(&x, 2, &FitConfig::default()).unwrap();
        assert!(adjusted_rand_index(&f.labels, &truth).unwrap() >= 0.99);
        assert!(f.ll_trace.windows(2).all(|w| w[1] >= w[0] - 1e-7));
        er_fpr += graph_recovery_rates(&f.model.graphs(), &empty).unwrap().fpr / reps as f64;

        let f = fit(&x, 2, &bic).unwrap();
        assert!(adjusted_rand_index(&f.labels, &truth).unwrap() >= 0.99);
        let fpr = graph_recovery_rates(&f.model.graphs(), &empty).unwrap().fpr;
        assert!(fpr <= 0.1, "seed {seed}: BIC fpr {fpr}");
    }
    // the default ER cost per edge, ln((1 − α)/α) with α = ln 4 / 6, admits a
    // null edge when χ²₁ > 2.40, which happens with probability 0.121
    assert!((0.06..=0.2).contains(&er_fpr), "ER mean fpr {er_fpr}");
}

#[test]
fn one_gaussian_selects_one_component() {
    let mut r = rng(7);
    let x = DMatrix::from_fn(500, 3, |_, _| r.sample::<f64, _>(StandardNormal));
    let sel = select_model(&x, &[1, 2], &FitConfig::default()).unwrap();
    assert_eq!(sel.best.k, 1);
    assert_eq!(sel.table.len(), 2);
    let single = select_model(&x, &[1], &FitConfig::default()).unwrap();
    assert_eq!(single.best.k, 1);
    assert_eq!(single.best.bic, sel.table[0].bic.unwrap());
}

#[test]
fn degenerate_fits_are_reported_and_skipped() {
    let x = correlated_sample(8, 12);
    let cfg = FitConfig {
        prior_c: None,
        ..FitConfig::default()
    };
    assert!(matches!(
        fit(&x, 6, &cfg),
        Err(Error::DegenerateComponent { .. })
    ));
    let sel = select_model(&x, &[1, 6], &cfg).unwrap();
    assert_eq!(sel.best.k, 1);
    assert!(sel.table[1].error.is_some());
    assert!(matches!(
        select_model(&x, &[6], &cfg),
        Err(Error::AllFitsFailed(_))
    ));
    assert!(matches!(
        fit(&x, 12, &cfg),
        Err(Error::TooFewObservations { .. })
    ));
}

#[test]
fn prior_keeps_small_components_fittable() {
    let x = correlated_sample(8, 12);
    let f = fit(&x, 4, &FitConfig::default()).unwrap();
    assert!(f.row_sum_errors.iter().all(|&e| e < 1e-10));
    let det_w = f.prior.as_ref().unwrap().w.log_det().unwrap().exp();
    assert!((det_w - 0.001 / 4.0).abs() < 1e-8 * det_w);
}

#[test]
fn classification_ignores_monotone_transforms() {
    let mut r = rng(9);
    let z = DMatrix::from_fn(50, 3, |_, _| r.random::<f64>());
    let a = classify(&Responsibilities(z.clone()));
    let b = classify(&Responsibilities(z.map(|p| (3.0 * p).exp() - 7.0)));
    assert_eq!(a, b);
}

#[test]
fn fits_are_seed_deterministic() {
    let x = correlated_sample(10, 80);
    let cfg = FitConfig {
        search: SearchStrategy::Genetic(sparsemix::search::GaConfig {
            pop_size: 10,
            stall_generations: 5,
            ..Default::default()
        }),
        seed: 4,
        ..FitConfig::default()
    };
    let a = fit(&x, 2, &cfg).unwrap();
    let b = fit(&x, 2, &cfg).unwrap();
    assert_eq!(a.ll_trace, b.ll_trace);
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.model.graphs(), b.model.graphs());
    let _ = moments_scatter(&x);
}
