//! Dense symmetric-matrix primitives and Gaussian log-densities.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::graph::Graph;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Dense symmetric matrix. Symmetrized as `(A + Aᵀ)/2` on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut m = m;
        let v = m.nrows();
        for j in 0..v {
            for h in (j + 1)..v {
                let avg = 0.5 * (m[(j, h)] + m[(h, j)]);
                m[(j, h)] = avg;
                m[(h, j)] = avg;
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let v = rows.len();
        if rows.iter().any(|r| r.len() != v) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        Self::new(DMatrix::from_fn(v, v, |i, j| rows[i][j]))
    }

    pub fn identity(v: usize) -> Self {
        Self(DMatrix::identity(v, v))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, j: usize, h: usize) -> f64 {
        self.0[(j, h)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().iter().copied().collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.0.clone()).ok_or(Error::NotPositiveDefinite("Cholesky failed"))
    }

    pub fn is_positive_definite(&self) -> bool {
        Cholesky::new(self.0.clone()).is_some()
    }

    /// `log det` via Cholesky; fails on non-PD input.
    pub fn log_det(&self) -> Result<f64> {
        Ok(log_det_from_cholesky(&self.cholesky()?))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("matrix sum".into()));
        }
        Ok(Self(&self.0 + &other.0))
    }
}

pub(crate) fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
}

/// A positive-definite covariance whose off-diagonal zeros are exactly the
/// non-edges of `pattern`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCovariance {
    sigma: SymMatrix,
    pattern: Graph,
}

impl SparseCovariance {
    /// Validates positive definiteness and the zero pattern.
    pub fn new(sigma: SymMatrix, pattern: Graph) -> Result<Self> {
        if sigma.dim() != pattern.v() {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{} but graph has {} variables",
                sigma.dim(),
                sigma.dim(),
                pattern.v()
            )));
        }
        for idx in 0..pattern.n_pairs() {
            if !pattern.bit(idx) {
                let (j, h) = pattern.pair_at(idx);
                if sigma.get(j, h) != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({}, {}) must be zero for a non-edge",
                        j + 1,
                        h + 1
                    )));
                }
            }
        }
        if !sigma.is_positive_definite() {
            return Err(Error::NotPositiveDefinite("sparse covariance"));
        }
        Ok(Self { sigma, pattern })
    }

    /// Unrestricted covariance (complete pattern).
    pub fn full(sigma: SymMatrix) -> Result<Self> {
        let v = sigma.dim();
        Self::new(sigma, Graph::complete(v))
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn pattern(&self) -> &Graph {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }
}

/// Gaussian density with a cached Cholesky factor for repeated evaluation.
#[derive(Clone, Debug)]
pub struct MvnDensity {
    mu: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl MvnDensity {
    pub fn new(mu: &DVector<f64>, sigma: &SymMatrix) -> Result<Self> {
        if mu.len() != sigma.dim() {
            return Err(Error::DimensionMismatch("mean and covariance".into()));
        }
        let chol = sigma.cholesky()?;
        let v = mu.len() as f64;
        let log_norm = -0.5 * (v * LN_2PI + log_det_from_cholesky(&chol));
        Ok(Self {
            mu: mu.clone(),
            chol,
            log_norm,
        })
    }

    pub fn logpdf(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mu;
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        self.log_norm - 0.5 * y.norm_squared()
    }

    /// Log-density of every row of `x` (N×V).
    pub fn logpdf_rows(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let n = x.nrows();
        let mut centered = x.transpose();
        for i in 0..n {
            let mut col = centered.column_mut(i);
            col -= &self.mu;
        }
        let l = self.chol.l();
        l.solve_lower_triangular_mut(&mut centered);
        centered
            .column_iter()
            .map(|c| self.log_norm - 0.5 * c.norm_squared())
            .collect()
    }
}

/// `log φ(x | μ, Σ)`.
pub fn mvn_logpdf(x: &DVector<f64>, mu: &DVector<f64>, sigma: &SparseCovariance) -> Result<f64> {
    if x.len() != mu.len() {
        return Err(Error::DimensionMismatch("observation and mean".into()));
    }
    Ok(MvnDensity::new(mu, sigma.sigma())?.logpdf(x))
}

/// Weighted count, mean and 1/n-normalized scatter.
#[derive(Clone, Debug)]
pub struct Moments {
    pub n_eff: f64,
    pub mean: DVector<f64>,
    pub scatter: SymMatrix,
}

pub fn weighted_moments(x: &DMatrix<f64>, w: &[f64]) -> Result<Moments> {
    let (n, v) = x.shape();
    if w.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} observations",
            w.len(),
            n
        )));
    }
    if w.iter().any(|&wi| wi < 0.0 || !wi.is_finite()) {
        return Err(Error::InvalidParameter(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let n_eff: f64 = w.iter().sum();
    if n_eff <= 0.0 {
        return Err(Error::ZeroWeights);
    }
    let wv = DVector::from_column_slice(w);
    let mean = x.tr_mul(&wv) / n_eff;
    let mut centered = x.clone();
    for j in 0..v {
        let mj = mean[j];
        for i in 0..n {
            centered[(i, j)] = (centered[(i, j)] - mj) * w[i].sqrt();
        }
    }
    let scatter = centered.tr_mul(&centered) / n_eff;
    Ok(Moments {
        n_eff,
        mean,
        scatter: SymMatrix::new(scatter)?,
    })
}

/// `R = U S U` with `U = diag(S_jj^{-1/2})`.
pub fn correlation_matrix(scatter: &SymMatrix) -> Result<SymMatrix> {
    let d = scatter.diagonal();
    if let Some(j) = d.iter().position(|&s| s <= 0.0 || !s.is_finite()) {
        return Err(Error::ZeroVariance(j));
    }
    let inv_sd: Vec<f64> = d.iter().map(|s| 1.0 / s.sqrt()).collect();
    let v = scatter.dim();
    let r = DMatrix::from_fn(v, v, |j, h| {
        if j == h {
            1.0
        } else {
            (scatter.get(j, h) * inv_sd[j] * inv_sd[h]).clamp(-1.0, 1.0)
        }
    });
    SymMatrix::new(r)
}

/// Numerically stable `log Σ exp(a_i)`.
pub fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + a.iter().map(|&ai| (ai - m).exp()).sum::<f64>().ln()
}
