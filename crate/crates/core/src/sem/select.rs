//! Choosing the number of components by BIC.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::em::{fit, FitConfig, FitResult};
use crate::error::{Error, Result};

/// One row of the model-selection table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub k: usize,
    pub bic: Option<f64>,
    pub n_params: Option<usize>,
    pub edges: Option<Vec<usize>>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub best: FitResult,
    pub table: Vec<SelectionRow>,
}

/// Fits every `k` in `k_range` and keeps the maximum-BIC fit (smaller `k`
/// on ties). Failed fits are reported in the table and skipped.
pub fn select_model(x: &DMatrix<f64>, k_range: &[usize], cfg: &FitConfig) -> Result<Selection> {
    if k_range.is_empty() {
        return Err(Error::InvalidParameter(
            "empty range of component counts".into(),
        ));
    }
    let fits: Vec<(usize, Result<FitResult>)> =
        k_range.par_iter().map(|&k| (k, fit(x, k, cfg))).collect();

    let table = fits
        .iter()
        .map(|(k, r)| match r {
            Ok(f) => SelectionRow {
                k: *k,
                bic: Some(f.bic),
                n_params: Some(f.n_params),
                edges: Some(
                    f.model
                        .components
                        .iter()
                        .map(|c| c.graph.edge_count())
                        .collect(),
                ),
                converged: Some(f.converged),
                error: None,
            },
            Err(e) => SelectionRow {
                k: *k,
                bic: None,
                n_params: None,
                edges: None,
                converged: None,
                error: Some(e.to_string()),
            },
        })
        .collect::<Vec<_>>();

    let mut best: Option<FitResult> = None;
    let mut errors = Vec::new();
    for (k, r) in fits {
        match r {
            Ok(f) => {
                let better = match &best {
                    None => true,
                    Some(b) => f.bic > b.bic || (f.bic == b.bic && f.k < b.k),
                };
                if better {
                    best = Some(f);
                }
            }
            Err(e) => errors.push(format!("K={k}: {e}")),
        }
    }
    let best = best.ok_or_else(|| Error::AllFitsFailed(errors.join("; ")))?;
    Ok(Selection { best, table })
}
