//! End-to-end analysis of one series: preprocess, fit, sample, and build the
//! spillover graph with its node measures.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{BsgError, Result};
use crate::graph::{
    build_graph, find_h_star, network_measures, HorizonTrace, NetworkMeasures, SpilloverGraph,
    DEFAULT_EPSILON, DEFAULT_HPDI_MASS, DEFAULT_H_MAX,
};
use crate::mts::{check_stationarity, Mts, StationarityReport};
use crate::posterior::{fit, sample_posterior, NiwPrior, PosteriorDraws};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HorizonChoice {
    Fixed { h: usize },
    Search { h_max: usize, epsilon: f64 },
}

impl Default for HorizonChoice {
    fn default() -> Self {
        HorizonChoice::Search {
            h_max: DEFAULT_H_MAX,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub p: usize,
    pub m: usize,
    pub seed: u64,
    pub horizon: HorizonChoice,
    pub hpdi_mass: f64,
    pub difference: bool,
    pub zscore: bool,
    /// Defaults to the vague prior.
    #[serde(skip)]
    pub prior: Option<NiwPrior>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            p: 1,
            m: 500,
            seed: 0,
            horizon: HorizonChoice::default(),
            hpdi_mass: DEFAULT_HPDI_MASS,
            difference: false,
            zscore: false,
            prior: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub draws: PosteriorDraws,
    pub graph: SpilloverGraph,
    pub measures: NetworkMeasures,
    /// Present when `h` was searched for.
    pub trace: Option<HorizonTrace>,
    /// Of the posterior-mean lag coefficients.
    pub stationarity: StationarityReport,
}

/// Differencing then standardizing, as requested.
pub fn preprocess(x: &Mts, difference: bool, zscore: bool) -> Result<Mts> {
    let x = if difference { x.first_difference()? } else { x.clone() };
    Ok(if zscore { x.zscore() } else { x })
}

pub fn analyze(x: &Mts, opts: &AnalyzeOptions) -> Result<Analysis> {
    let x = preprocess(x, opts.difference, opts.zscore)?;
    let post = fit(&x, opts.p, opts.prior.as_ref())?;
    let draws = sample_posterior(&post, opts.m, opts.seed)?;
    analyze_draws(draws, x.labels(), opts)
}

/// Graph and measures from existing draws; `p`, `m` and preprocessing in
/// `opts` are ignored.
pub fn analyze_draws(draws: PosteriorDraws, labels: &[String], opts: &AnalyzeOptions) -> Result<Analysis> {
    if labels.len() != draws.d {
        return Err(BsgError::Dimension(format!(
            "{} labels for d = {}",
            labels.len(),
            draws.d
        )));
    }
    let (h, trace) = match opts.horizon {
        HorizonChoice::Fixed { h } => (h, None),
        HorizonChoice::Search { h_max, epsilon } => {
            let trace = find_h_star(&draws, h_max, epsilon)?;
            if !trace.converged {
                log::warn!("no h <= {h_max} met epsilon = {epsilon}; using h = {h_max}");
            }
            (trace.h_star, Some(trace))
        }
    };
    let graph = build_graph(&draws, h, labels)?;
    let measures = network_measures(&graph, opts.hpdi_mass)?;
    let stationarity = check_stationarity(&mean_phis(&draws))?;
    if !stationarity.is_stationary {
        log::warn!(
            "posterior-mean VAR is not stationary (max modulus {:.4})",
            stationarity.max_modulus
        );
    }
    Ok(Analysis {
        draws,
        graph,
        measures,
        trace,
        stationarity,
    })
}

fn mean_phis(draws: &PosteriorDraws) -> Vec<DMatrix<f64>> {
    let m = draws.len() as f64;
    (0..draws.p)
        .map(|lag| {
            draws
                .draws
                .iter()
                .fold(DMatrix::zeros(draws.d, draws.d), |acc, v| acc + &v.phis[lag])
                / m
        })
        .collect()
}
