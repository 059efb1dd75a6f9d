//! Penalized structural EM for mixtures of covariance graph models.

pub mod em;
pub mod init;
pub mod prior;
pub mod select;

pub use em::{
    bic_score, classify, e_step, fit, fit_from_partition, m_step_weights_means, n_params, s_step,
    FitConfig, FitResult, InitialGraph, MixtureModel, Responsibilities, SearchStrategy,
};
pub use init::{init_graph, init_partition, threshold_graph, InitMethod};
pub use prior::{default_prior, PriorSpec};
pub use select::{select_model, Selection, SelectionRow};
