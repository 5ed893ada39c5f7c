//! Bayesian spillover graphs.
//!
//! A single multivariate time series is fitted with a conjugate Bayesian VAR;
//! every posterior draw is turned into an `h`-step forecast error variance
//! decomposition, and the draws together give a directed, weighted graph of
//! spillovers with credible intervals on every edge and node score.
//!
//! Pipeline: [`mts`] -> [`posterior`] -> [`fevd`] -> [`graph`]. The
//! [`simulate`] and [`eval`] modules generate ground-truth networks and score
//! node rankings against point-estimate VAR baselines.

pub mod error;
pub mod eval;
pub mod fevd;
pub mod graph;
mod matrix_serde;
pub mod mts;
pub mod pipeline;
pub mod posterior;
pub mod simulate;

pub use error::{BsgError, Result};
pub use fevd::{fevd, ma_coefficients, FevdMatrix, PsiSequence};
pub use graph::{
    build_graph, find_h_star, hpdi, network_measures, Estimate, HorizonTrace, NetworkMeasures,
    SpilloverGraph,
};
pub use mts::{check_stationarity, Mts, StationarityReport};
pub use posterior::{
    build_design, compute_posterior, sample_posterior, NiwPosterior, NiwPrior, PosteriorDraws,
    VarParams,
};
