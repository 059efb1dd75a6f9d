//! Graph-complexity penalties `Q(A)` subtracted from the component log-likelihood.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pair_count, Graph};

/// Which penalty family to use; parameters are resolved against the data
/// dimensions by [`PenaltySpec::resolve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Bic,
    Ebic,
    Er,
    #[serde(rename = "pl")]
    PowerLaw,
    None,
}

/// User-facing penalty configuration. Unset tuning parameters take their
/// defaults: `gamma = 1`, `alpha = ln V / T`, `beta = ln(N V)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind) -> Self {
        Self {
            kind,
            gamma: None,
            alpha: None,
            beta: None,
        }
    }

    /// Fixes every parameter for a sample of `n` observations on `v` variables.
    pub fn resolve(&self, n: usize, v: usize) -> Result<Penalty> {
        let nf = n as f64;
        let p = match self.kind {
            PenaltyKind::None => Penalty::None,
            PenaltyKind::Bic => Penalty::Bic { n: nf },
            PenaltyKind::Ebic => Penalty::Ebic {
                n: nf,
                gamma: self.gamma.unwrap_or(1.0),
            },
            PenaltyKind::Er => Penalty::ErdosRenyi {
                alpha: match self.alpha {
                    Some(a) => a,
                    None => default_er_alpha(v)?,
                },
            },
            PenaltyKind::PowerLaw => Penalty::PowerLaw {
                beta: self.beta.unwrap_or_else(|| default_pl_beta(n, v)),
            },
        };
        p.validate()?;
        Ok(p)
    }
}

impl Default for PenaltySpec {
    fn default() -> Self {
        Self::new(PenaltyKind::Er)
    }
}

/// User-supplied penalty over the adjacency bit set.
#[derive(Clone)]
pub struct CustomPenalty {
    name: String,
    func: Arc<dyn Fn(&Graph) -> f64 + Send + Sync>,
}

impl CustomPenalty {
    pub fn new(
        name: impl Into<String>,
        func: impl Fn(&Graph) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            func: Arc::new(func),
        }
    }
}

impl fmt::Debug for CustomPenalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomPenalty({})", self.name)
    }
}

/// A fully parameterized penalty function.
#[derive(Clone, Debug)]
pub enum Penalty {
    None,
    /// `½ E ln N`
    Bic {
        n: f64,
    },
    /// `½ E ln N + 2γ E ln V`
    Ebic {
        n: f64,
        gamma: f64,
    },
    /// `−E ln α − (T − E) ln(1 − α)`
    ErdosRenyi {
        alpha: f64,
    },
    /// `β Σ_j ln(d_j + 1)`
    PowerLaw {
        beta: f64,
    },
    Custom(CustomPenalty),
}

impl Penalty {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            Penalty::Bic { n } | Penalty::Ebic { n, .. } if !(n >= 1.0 && n.is_finite()) => {
                return bad(format!("sample size must be >= 1, got {n}"));
            }
            Penalty::Ebic { gamma, .. } if !(0.0..=1.0).contains(&gamma) => {
                return bad(format!("gamma must lie in [0, 1], got {gamma}"));
            }
            Penalty::ErdosRenyi { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                return bad(format!("alpha must lie in (0, 1), got {alpha}"));
            }
            Penalty::PowerLaw { beta } if !(beta >= 0.0 && beta.is_finite()) => {
                return bad(format!("beta must be finite and >= 0, got {beta}"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn value(&self, g: &Graph) -> f64 {
        let e = g.edge_count() as f64;
        match self {
            Penalty::None => 0.0,
            Penalty::Bic { n } => 0.5 * e * n.ln(),
            Penalty::Ebic { n, gamma } => 0.5 * e * n.ln() + 2.0 * gamma * e * (g.v() as f64).ln(),
            Penalty::ErdosRenyi { alpha } => {
                let t = g.n_pairs() as f64;
                let mut q = 0.0;
                // skip zero-count terms so that 0·ln(·) never produces NaN
                if e > 0.0 {
                    q -= e * alpha.ln();
                }
                if t - e > 0.0 {
                    q -= (t - e) * (1.0 - alpha).ln();
                }
                q
            }
            Penalty::PowerLaw { beta } => {
                beta * g
                    .degrees()
                    .iter()
                    .map(|&d| ((d + 1) as f64).ln())
                    .sum::<f64>()
            }
            Penalty::Custom(c) => (c.func)(g),
        }
    }
}

/// `ln V / T`; the expected edge count under ER(α) is then `ln V`.
pub fn default_er_alpha(v: usize) -> Result<f64> {
    if v < 2 {
        return Err(Error::InvalidParameter(format!(
            "the Erdős–Rényi penalty needs at least 2 variables, got {v}"
        )));
    }
    Ok((v as f64).ln() / pair_count(v) as f64)
}

pub fn default_pl_beta(n: usize, v: usize) -> f64 {
    ((n * v) as f64).ln()
}
