//! The structural EM loop: E-step, weight/mean updates, per-component
//! structure search (S-step), convergence and BIC.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::init::{init_graph, init_partition, threshold_candidates, InitMethod, DEFAULT_RHO_GRID};
use super::prior::{default_prior, PriorSpec, DEFAULT_PRIOR_C};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::icf::{IcfConfig, ScoredStructure};
use crate::numerics::{log_sum_exp, weighted_moments, MvnDensity, SymMatrix};
use crate::penalty::{CustomPenalty, Penalty, PenaltySpec};
use crate::search::{ga_search, stepwise_search, GaConfig, StepwiseConfig, StructureProblem};
use crate::seed::derive_seed;

/// Mixture parameters and per-component graphs.
#[derive(Clone, Debug)]
pub struct MixtureModel {
    pub tau: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub components: Vec<ScoredStructure>,
}

impl MixtureModel {
    pub fn k(&self) -> usize {
        self.tau.len()
    }

    pub fn v(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    pub fn graphs(&self) -> Vec<Graph> {
        self.components.iter().map(|c| c.graph.clone()).collect()
    }
}

/// Posterior membership probabilities, one row per observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities(pub DMatrix<f64>);

impl Responsibilities {
    pub fn from_hard(labels: &[usize], k: usize) -> Self {
        Self(DMatrix::from_fn(labels.len(), k, |i, c| {
            if labels[i] == c {
                1.0
            } else {
                0.0
            }
        }))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        self.0
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Structure search used inside the S-step.
#[derive(Clone, Debug, PartialEq)]
pub enum SearchStrategy {
    Stepwise(StepwiseConfig),
    Genetic(GaConfig),
    /// Keep each component's graph and only re-fit its covariance.
    Fixed,
}

/// Graphs the S-EM starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialGraph {
    /// Best correlation-threshold graph over the ρ grid.
    Threshold,
    Complete,
    Empty,
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub penalty: PenaltySpec,
    /// Overrides `penalty` when set.
    pub custom_penalty: Option<CustomPenalty>,
    pub search: SearchStrategy,
    pub initial_graph: InitialGraph,
    /// Inverse-Wishart regularization constant `c`; `None` disables the prior.
    pub prior_c: Option<f64>,
    pub icf: IcfConfig,
    pub init: InitMethod,
    pub rho_grid: Vec<f64>,
    /// Relative change of the penalized objective below which EM stops.
    pub ll_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            penalty: PenaltySpec::default(),
            custom_penalty: None,
            search: SearchStrategy::Stepwise(StepwiseConfig::default()),
            initial_graph: InitialGraph::Threshold,
            prior_c: Some(DEFAULT_PRIOR_C),
            icf: IcfConfig::default(),
            init: InitMethod::Hierarchical,
            rho_grid: DEFAULT_RHO_GRID.to_vec(),
            ll_tol: 1e-5,
            max_iter: 200,
            seed: 0,
            restarts: 1,
        }
    }
}

impl FitConfig {
    pub fn resolve_penalty(&self, n: usize, v: usize) -> Result<Penalty> {
        match &self.custom_penalty {
            Some(c) => Ok(Penalty::Custom(c.clone())),
            None => self.penalty.resolve(n, v),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub k: usize,
    pub model: MixtureModel,
    pub resp: Responsibilities,
    pub labels: Vec<usize>,
    /// Penalized (and, with the prior, regularized) log-likelihood after each E-step.
    pub ll_trace: Vec<f64>,
    /// Unpenalized mixture log-likelihood at the final parameters.
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Max |row sum − 1| of the responsibilities at every E-step.
    pub row_sum_errors: Vec<f64>,
    pub prior: Option<PriorSpec>,
    pub seed: u64,
}

/// Output of one E-step.
#[derive(Clone, Debug)]
pub struct EStep {
    pub resp: Responsibilities,
    pub loglik: f64,
}

pub fn e_step(x: &DMatrix<f64>, model: &MixtureModel) -> Result<EStep> {
    let (n, v) = x.shape();
    if model.v() != v {
        return Err(Error::DimensionMismatch(format!(
            "data has {v} columns, model has {}",
            model.v()
        )));
    }
    if x.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("input data".into()));
    }
    let k = model.k();
    let mut logp = DMatrix::zeros(n, k);
    for c in 0..k {
        let dens = MvnDensity::new(&model.means[c], model.components[c].sigma.sigma())?;
        let ln_tau = model.tau[c].ln();
        for (i, lp) in dens.logpdf_rows(x).into_iter().enumerate() {
            logp[(i, c)] = ln_tau + lp;
        }
    }
    let mut loglik = 0.0;
    let mut z = DMatrix::zeros(n, k);
    let mut row = vec![0.0; k];
    for i in 0..n {
        for c in 0..k {
            row[c] = logp[(i, c)];
        }
        let lse = log_sum_exp(&row);
        if !lse.is_finite() {
            return Err(Error::NonFinite(format!(
                "log-density of observation {}",
                i + 1
            )));
        }
        loglik += lse;
        for c in 0..k {
            z[(i, c)] = (row[c] - lse).exp();
        }
    }
    Ok(EStep {
        resp: Responsibilities(z),
        loglik,
    })
}

/// Weighted count, proportion, mean and scatter of one component.
#[derive(Clone, Debug)]
pub struct ComponentStats {
    pub n_k: f64,
    pub tau: f64,
    pub mean: DVector<f64>,
    pub scatter: SymMatrix,
}

const MIN_COMPONENT_WEIGHT: f64 = 1e-8;

pub fn m_step_weights_means(
    x: &DMatrix<f64>,
    resp: &Responsibilities,
) -> Result<Vec<ComponentStats>> {
    let n = x.nrows() as f64;
    let z = resp.matrix();
    if z.nrows() != x.nrows() {
        return Err(Error::DimensionMismatch("responsibilities and data".into()));
    }
    (0..z.ncols())
        .map(|c| {
            let w: Vec<f64> = z.column(c).iter().copied().collect();
            let n_k: f64 = w.iter().sum();
            if n_k < MIN_COMPONENT_WEIGHT {
                return Err(Error::DegenerateComponent {
                    component: c,
                    n_eff: n_k,
                });
            }
            let m = weighted_moments(x, &w)?;
            Ok(ComponentStats {
                n_k: m.n_eff,
                tau: m.n_eff / n,
                mean: m.mean,
                scatter: m.scatter,
            })
        })
        .collect()
}

/// Effective sample size and scatter the S-step optimizes against. Without
/// the prior, small or singular components are degenerate.
pub fn component_target(
    stats: &ComponentStats,
    component: usize,
    prior: Option<&PriorSpec>,
) -> Result<(f64, SymMatrix)> {
    match prior {
        Some(p) => p.regularize(&stats.scatter, stats.n_k),
        None => {
            let v = stats.scatter.dim() as f64;
            if stats.n_k < (0.5 * v).max(2.0) || !stats.scatter.is_positive_definite() {
                return Err(Error::DegenerateComponent {
                    component,
                    n_eff: stats.n_k,
                });
            }
            Ok((stats.n_k, stats.scatter.clone()))
        }
    }
}

/// Settings shared by every S-step of a fit.
#[derive(Clone, Debug)]
pub struct SStepContext<'a> {
    pub prior: Option<&'a PriorSpec>,
    pub penalty: &'a Penalty,
    pub strategy: &'a SearchStrategy,
    pub icf: IcfConfig,
    pub rho_grid: &'a [f64],
    pub seed: u64,
}

/// Searches each component's graph independently, seeded with the previous
/// structure. The previous graph is re-fitted from its previous covariance,
/// so every returned score is at least that of the previous parameters.
pub fn s_step(
    stats: &[ComponentStats],
    previous: &[ScoredStructure],
    ctx: &SStepContext<'_>,
    iteration: usize,
) -> Result<Vec<ScoredStructure>> {
    if stats.len() != previous.len() {
        return Err(Error::DimensionMismatch(
            "component statistics and previous structures".into(),
        ));
    }
    stats
        .par_iter()
        .zip(previous.par_iter())
        .enumerate()
        .map(|(c, (st, prev))| {
            let (n_eff, target) = component_target(st, c, ctx.prior)?;
            let problem = StructureProblem::new(&target, n_eff, ctx.penalty, ctx.icf);
            let elite = problem.evaluate_from(&prev.graph, Some(prev.sigma.sigma()))?;
            search_component(
                &problem,
                elite,
                ctx,
                derive_seed(ctx.seed, &[iteration as u64, c as u64]),
            )
        })
        .collect()
}

fn search_component(
    problem: &StructureProblem<'_>,
    elite: ScoredStructure,
    ctx: &SStepContext<'_>,
    seed: u64,
) -> Result<ScoredStructure> {
    match ctx.strategy {
        SearchStrategy::Fixed => Ok(elite),
        SearchStrategy::Stepwise(cfg) => Ok(stepwise_search(problem, elite, cfg)?.best),
        SearchStrategy::Genetic(cfg) => {
            let mut seeds = vec![elite];
            for cand in threshold_candidates(problem, ctx.rho_grid).unwrap_or_default() {
                if seeds.len() < cfg.pop_size && seeds.iter().all(|s| s.graph != cand.graph) {
                    seeds.push(cand);
                }
            }
            let cfg = GaConfig { seed, ..*cfg };
            Ok(ga_search(problem, &seeds, &cfg)?.best)
        }
    }
}

/// `ν = (K − 1) + K V + Σ_k (V + E_k)`.
pub fn n_params(k: usize, v: usize, edge_counts: &[usize]) -> usize {
    (k - 1) + k * v + edge_counts.iter().map(|e| v + e).sum::<usize>()
}

/// `2 ℓ(Θ̂, Ĝ) − ν ln N` with the unpenalized mixture log-likelihood.
pub fn bic_score(fit: &FitResult, n: usize) -> f64 {
    2.0 * fit.loglik - fit.n_params as f64 * (n as f64).ln()
}

/// Row-wise argmax; ties go to the lowest component index.
pub fn classify(resp: &Responsibilities) -> Vec<usize> {
    resp.matrix()
        .row_iter()
        .map(|r| {
            let mut best = 0;
            for c in 1..r.len() {
                if r[c] > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Penalized/regularized objective: `ℓ + Σ log p(Σ_k) − Σ Q(A_k)`.
pub fn penalized_objective(
    loglik: f64,
    model: &MixtureModel,
    prior: Option<&PriorSpec>,
    penalty: &Penalty,
) -> Result<f64> {
    let mut obj = loglik;
    for comp in &model.components {
        if let Some(p) = prior {
            obj += p.log_density(comp.sigma.sigma())?;
        }
        obj -= penalty.value(&comp.graph);
    }
    if !obj.is_finite() {
        return Err(Error::NonFinite("penalized log-likelihood".into()));
    }
    Ok(obj)
}

/// Fits a `k`-component mixture, keeping the best of `cfg.restarts` runs.
pub fn fit(x: &DMatrix<f64>, k: usize, cfg: &FitConfig) -> Result<FitResult> {
    let restarts = cfg.restarts.max(1);
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for r in 0..restarts {
        let (method, seed) = if r == 0 {
            (cfg.init, cfg.seed)
        } else {
            (
                InitMethod::Kmeans,
                derive_seed(cfg.seed, &[u64::MAX, r as u64]),
            )
        };
        match init_partition(x, k, method, seed).and_then(|z0| fit_from_partition(x, k, &z0, cfg)) {
            Ok(f) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| f.ll_trace.last() > b.ll_trace.last());
                if better {
                    best = Some(f);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one restart ran"))
}

/// Runs the structural EM from a given hard partition.
pub fn fit_from_partition(
    x: &DMatrix<f64>,
    k: usize,
    z0: &[usize],
    cfg: &FitConfig,
) -> Result<FitResult> {
    let (n, v) = x.shape();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::TooFewObservations { n, k });
    }
    if z0.len() != n || z0.iter().any(|&c| c >= k) {
        return Err(Error::InvalidParameter(
            "initial partition does not match the data".into(),
        ));
    }
    if cfg.ll_tol.is_nan() || cfg.ll_tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ll_tol must be positive, got {}",
            cfg.ll_tol
        )));
    }
    let penalty = cfg.resolve_penalty(n, v)?;
    let prior = match cfg.prior_c {
        Some(c) => {
            let pooled = weighted_moments(x, &vec![1.0; n])?.scatter;
            Some(default_prior(&pooled, k, c)?)
        }
        None => None,
    };
    let ctx = SStepContext {
        prior: prior.as_ref(),
        penalty: &penalty,
        strategy: &cfg.search,
        icf: cfg.icf,
        rho_grid: &cfg.rho_grid,
        seed: cfg.seed,
    };

    let stats = m_step_weights_means(x, &Responsibilities::from_hard(z0, k))?;
    let starts = stats
        .par_iter()
        .enumerate()
        .map(|(c, st)| {
            let (n_eff, target) = component_target(st, c, ctx.prior)?;
            let problem = StructureProblem::new(&target, n_eff, &penalty, cfg.icf);
            match cfg.initial_graph {
                InitialGraph::Threshold => Ok(init_graph(&problem, &cfg.rho_grid)?.best),
                InitialGraph::Complete => problem.evaluate(&Graph::complete(v)),
                InitialGraph::Empty => problem.evaluate(&Graph::empty(v)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let components = s_step(&stats, &starts, &ctx, 0)?;
    let mut model = MixtureModel {
        tau: stats.iter().map(|s| s.tau).collect(),
        means: stats.into_iter().map(|s| s.mean).collect(),
        components,
    };

    let mut ll_trace = Vec::new();
    let mut row_sum_errors = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let estep = loop {
        let es = e_step(x, &model)?;
        row_sum_errors.push(es.resp.max_row_sum_error());
        let obj = penalized_objective(es.loglik, &model, prior.as_ref(), &penalty)?;
        if let Some(&prev) = ll_trace.last() {
            let prev: f64 = prev;
            if (obj - prev).abs() < cfg.ll_tol * obj.abs() {
                ll_trace.push(obj);
                converged = true;
                break es;
            }
        }
        ll_trace.push(obj);
        if iterations >= cfg.max_iter {
            break es;
        }
        iterations += 1;
        let stats = m_step_weights_means(x, &es.resp)?;
        let components = s_step(&stats, &model.components, &ctx, iterations)?;
        model = MixtureModel {
            tau: stats.iter().map(|s| s.tau).collect(),
            means: stats.into_iter().map(|s| s.mean).collect(),
            components,
        };
    };

    let edges: Vec<usize> = model
        .components
        .iter()
        .map(|c| c.graph.edge_count())
        .collect();
    let n_params = n_params(k, v, &edges);
    let labels = classify(&estep.resp);
    let mut result = FitResult {
        k,
        model,
        resp: estep.resp,
        labels,
        ll_trace,
        loglik: estep.loglik,
        bic: 0.0,
        n_params,
        converged,
        iterations,
        row_sum_errors,
        prior,
        seed: cfg.seed,
    };
    result.bic = bic_score(&result, n);
    Ok(result)
}
