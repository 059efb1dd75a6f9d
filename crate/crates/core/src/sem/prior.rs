//! Inverse-Wishart regularization of component covariances.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::SymMatrix;

/// Inverse-Wishart `IW(omega, W)` prior on each component covariance.
///
/// Density kernel: `|Σ|^{-(ω+V+1)/2} exp(-½ tr(W Σ⁻¹))`.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    pub omega: f64,
    pub w: SymMatrix,
    pub c: f64,
    /// Set when the pooled scatter was singular and `W` fell back to `δ I`.
    pub singular_fallback: bool,
}

pub const DEFAULT_PRIOR_C: f64 = 0.001;

/// `ω = V + 2`, `W = S / det(S)^{1/V} · (c/K)^{1/V}` so that `det W = c/K`.
pub fn default_prior(pooled_scatter: &SymMatrix, k: usize, c: f64) -> Result<PriorSpec> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "prior scale c must be positive, got {c}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let v = pooled_scatter.dim();
    let vf = v as f64;
    let target_log_det = (c / k as f64).ln();
    let (w, singular_fallback) = match pooled_scatter.log_det() {
        Ok(ld) if ld.is_finite() => {
            let scale = ((target_log_det - ld) / vf).exp();
            (pooled_scatter.scaled(scale), false)
        }
        _ => {
            let delta = (target_log_det / vf).exp();
            (SymMatrix::identity(v).scaled(delta), true)
        }
    };
    Ok(PriorSpec {
        omega: vf + 2.0,
        w,
        c,
        singular_fallback,
    })
}

impl PriorSpec {
    /// Parameters under which the MAP estimate reduces to the MLE:
    /// `ω = −(V+1)`, `W = 0`.
    pub fn no_regularization(v: usize) -> Self {
        Self {
            omega: -(v as f64 + 1.0),
            w: SymMatrix::new(nalgebra::DMatrix::zeros(v, v)).expect("square"),
            c: 0.0,
            singular_fallback: false,
        }
    }

    /// `(Ñ, S̃)` with `Ñ = n + ω + V + 1` and `S̃ = (n S + W) / Ñ`.
    pub fn regularize(&self, scatter: &SymMatrix, n: f64) -> Result<(f64, SymMatrix)> {
        let v = scatter.dim();
        if self.w.dim() != v {
            return Err(Error::DimensionMismatch(
                "prior scale matrix and scatter".into(),
            ));
        }
        let n_tilde = n + self.omega + v as f64 + 1.0;
        if n_tilde.is_nan() || n_tilde <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "regularized sample size must be positive, got {n_tilde}"
            )));
        }
        let s_tilde = scatter.scaled(n).add(&self.w)?.scaled(1.0 / n_tilde);
        Ok((n_tilde, s_tilde))
    }

    /// `log p(Σ)`. The normalizing constant is included whenever it exists
    /// (`ω > V − 1` and `W` PD); it does not affect any optimization.
    pub fn log_density(&self, sigma: &SymMatrix) -> Result<f64> {
        let v = sigma.dim();
        let vf = v as f64;
        let chol = sigma.cholesky()?;
        let log_det_sigma = crate::numerics::log_det_from_cholesky(&chol);
        let tr = (self.w.matrix() * chol.inverse()).trace();
        let mut lp = -0.5 * (self.omega + vf + 1.0) * log_det_sigma - 0.5 * tr;
        if self.omega > vf - 1.0 {
            if let Ok(ld_w) = self.w.log_det() {
                let half = 0.5 * self.omega;
                let ln_mv_gamma = 0.25 * vf * (vf - 1.0) * std::f64::consts::PI.ln()
                    + (0..v).map(|j| ln_gamma(half - 0.5 * j as f64)).sum::<f64>();
                lp += half * ld_w - half * vf * std::f64::consts::LN_2 - ln_mv_gamma;
            }
        }
        Ok(lp)
    }
}
