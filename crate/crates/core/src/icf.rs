//! Iterative conditional fitting: maximum-likelihood (and MAP) covariance
//! estimation constrained to the zero pattern of a covariance graph.
//!
//! Each sweep visits every variable `j`, holds `Σ[-j,-j]` fixed and
//! re-estimates row `j` by regressing `X_j` on the pseudo-variables
//! `Ω[s(j),·] X_{-j}` with `Ω = Σ[-j,-j]⁻¹`. Entries for non-edges are never
//! written, so they stay exactly zero.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{log_det_from_cholesky, SparseCovariance, SymMatrix};
use crate::penalty::Penalty;
use crate::sem::prior::PriorSpec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcfConfig {
    /// Stop when the relative objective increase of a sweep falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for IcfConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_sweeps: 500,
        }
    }
}

impl IcfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_sweeps == 0 {
            return Err(Error::InvalidParameter(format!(
                "invalid ICF config {self:?}"
            )));
        }
        Ok(())
    }
}

// objectives smaller than this in magnitude are compared on an absolute scale
const NEAR_ZERO_OBJECTIVE: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct IcfFit {
    pub sigma: SparseCovariance,
    pub converged: bool,
    pub sweeps: usize,
    /// `−½[tr(SΣ⁻¹) + log det Σ]` at the start and after every sweep.
    pub objective_trace: Vec<f64>,
}

/// A graph together with its fitted covariance and penalized score.
#[derive(Clone, Debug)]
pub struct ScoredStructure {
    pub graph: Graph,
    pub sigma: SparseCovariance,
    pub score: f64,
    pub converged: bool,
}

/// Constrained MLE of `Σ` in `C+(g)` starting from `diag(S)`.
pub fn fit_covariance(scatter: &SymMatrix, g: &Graph, cfg: &IcfConfig) -> Result<IcfFit> {
    fit_covariance_from(scatter, g, None, cfg)
}

/// As [`fit_covariance`], optionally warm-started from `init`. Entries of
/// `init` outside the pattern are zeroed; if that leaves a non-PD matrix the
/// start falls back to `diag(S)`.
pub fn fit_covariance_from(
    scatter: &SymMatrix,
    g: &Graph,
    init: Option<&SymMatrix>,
    cfg: &IcfConfig,
) -> Result<IcfFit> {
    cfg.validate()?;
    let v = scatter.dim();
    if g.v() != v {
        return Err(Error::DimensionMismatch(format!(
            "scatter has {v} variables but graph has {}",
            g.v()
        )));
    }
    if !scatter.is_positive_definite() {
        return Err(Error::NotPositiveDefinite("scatter"));
    }

    if g.is_empty() || g.is_complete() {
        let sigma = if g.is_complete() {
            scatter.clone()
        } else {
            SymMatrix::from_diagonal(&scatter.diagonal())
        };
        let obj = unit_objective(scatter, &sigma)?;
        return Ok(IcfFit {
            sigma: SparseCovariance::new(sigma, g.clone())?,
            converged: true,
            sweeps: 0,
            objective_trace: vec![obj],
        });
    }

    let s = scatter.matrix();
    let mut sigma = warm_start(scatter, g, init);
    let neighbors: Vec<Vec<usize>> = (0..v).map(|j| g.neighbors(j)).collect::<Result<_>>()?;

    let mut trace = vec![unit_objective_raw(s, &sigma)?];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        for (j, nb) in neighbors.iter().enumerate() {
            update_row(s, &mut sigma, j, nb)?;
        }
        sweeps += 1;
        let obj = unit_objective_raw(s, &sigma)?;
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(obj);
        let threshold = cfg.tol * prev.abs().max(NEAR_ZERO_OBJECTIVE);
        if obj - prev < threshold {
            converged = true;
            break;
        }
    }

    Ok(IcfFit {
        sigma: SparseCovariance::new(SymMatrix::new(sigma)?, g.clone())?,
        converged,
        sweeps,
        objective_trace: trace,
    })
}

fn warm_start(scatter: &SymMatrix, g: &Graph, init: Option<&SymMatrix>) -> DMatrix<f64> {
    let diag = || DMatrix::from_diagonal(&DVector::from_vec(scatter.diagonal()));
    let Some(init) = init else { return diag() };
    if init.dim() != g.v() {
        return diag();
    }
    let mut m = init.matrix().clone();
    for idx in 0..g.n_pairs() {
        if !g.bit(idx) {
            let (j, h) = g.pair_at(idx);
            m[(j, h)] = 0.0;
            m[(h, j)] = 0.0;
        }
    }
    if Cholesky::new(m.clone()).is_some() {
        m
    } else {
        diag()
    }
}

fn update_row(s: &DMatrix<f64>, sigma: &mut DMatrix<f64>, j: usize, nb: &[usize]) -> Result<()> {
    if nb.is_empty() {
        sigma[(j, j)] = s[(j, j)];
        return Ok(());
    }
    let v = s.nrows();
    let others: Vec<usize> = (0..v).filter(|&h| h != j).collect();
    let m = others.len();
    // positions of the neighbors inside `others`
    let pos: Vec<usize> = nb.iter().map(|&h| if h < j { h } else { h - 1 }).collect();

    let sigma_oo = DMatrix::from_fn(m, m, |a, b| sigma[(others[a], others[b])]);
    let omega = Cholesky::new(sigma_oo)
        .ok_or(Error::NotPositiveDefinite("ICF iterate"))?
        .inverse();
    let s_oo = DMatrix::from_fn(m, m, |a, b| s[(others[a], others[b])]);
    let s_jo = DVector::from_fn(m, |a, _| s[(j, others[a])]);
    let omega_s = omega.select_columns(&pos);

    // a = S[j,-j] Ω[·,s],  M = Ω[s,·] S[-j,-j] Ω[·,s]
    let a = omega_s.tr_mul(&s_jo);
    let mm = omega_s.tr_mul(&(&s_oo * &omega_s));
    let beta = match Cholesky::new(mm.clone()) {
        Some(ch) => ch.solve(&a),
        None => mm
            .lu()
            .solve(&a)
            .ok_or(Error::NotPositiveDefinite("ICF regression system"))?,
    };
    let lambda = s[(j, j)] - beta.dot(&a);
    let omega_ss = DMatrix::from_fn(pos.len(), pos.len(), |x, y| omega[(pos[x], pos[y])]);
    let quad = beta.dot(&(&omega_ss * &beta));

    for (b, &h) in beta.iter().zip(nb) {
        sigma[(j, h)] = *b;
        sigma[(h, j)] = *b;
    }
    sigma[(j, j)] = lambda + quad;
    Ok(())
}

fn unit_objective_raw(s: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    let chol = Cholesky::new(sigma.clone()).ok_or(Error::NotPositiveDefinite("covariance"))?;
    let tr = chol.solve(s).trace();
    Ok(-0.5 * (tr + log_det_from_cholesky(&chol)))
}

fn unit_objective(scatter: &SymMatrix, sigma: &SymMatrix) -> Result<f64> {
    unit_objective_raw(scatter.matrix(), sigma.matrix())
}

/// `−(n/2)[tr(S Σ⁻¹) + log det Σ]`.
pub fn gaussian_objective(scatter: &SymMatrix, n: f64, sigma: &SymMatrix) -> Result<f64> {
    if scatter.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch("scatter and covariance".into()));
    }
    Ok(n * unit_objective(scatter, sigma)?)
}

/// Penalized component objective `−(n/2)[tr(SΣ⁻¹) + log det Σ] − Q(A)`.
pub fn objective_score(
    scatter: &SymMatrix,
    n: f64,
    sigma: &SparseCovariance,
    penalty: &Penalty,
) -> Result<f64> {
    let score = gaussian_objective(scatter, n, sigma.sigma())? - penalty.value(sigma.pattern());
    if !score.is_finite() {
        return Err(Error::NonFinite("structure score".into()));
    }
    Ok(score)
}

/// MAP estimate under an inverse-Wishart prior: ICF on `S̃ = (nS + W)/Ñ`.
pub fn fit_covariance_map(
    scatter: &SymMatrix,
    n: f64,
    prior: &PriorSpec,
    g: &Graph,
    cfg: &IcfConfig,
) -> Result<IcfFit> {
    let (_, s_tilde) = prior.regularize(scatter, n)?;
    fit_covariance(&s_tilde, g, cfg)
}

/// Fits `Σ` for `g` by ICF and scores the pair.
pub fn score_structure(
    scatter: &SymMatrix,
    n: f64,
    g: &Graph,
    penalty: &Penalty,
    cfg: &IcfConfig,
) -> Result<ScoredStructure> {
    score_structure_from(scatter, n, g, None, penalty, cfg)
}

pub fn score_structure_from(
    scatter: &SymMatrix,
    n: f64,
    g: &Graph,
    init: Option<&SymMatrix>,
    penalty: &Penalty,
    cfg: &IcfConfig,
) -> Result<ScoredStructure> {
    let fit = fit_covariance_from(scatter, g, init, cfg)?;
    let score = objective_score(scatter, n, &fit.sigma, penalty)?;
    Ok(ScoredStructure {
        graph: g.clone(),
        sigma: fit.sigma,
        score,
        converged: fit.converged,
    })
}
