//! Normalized discounted cumulative gain for node rankings.

use serde::{Deserialize, Serialize};

use crate::error::{BsgError, Result};
use crate::graph::rank_nodes;

fn dcg(gains: impl Iterator<Item = f64>) -> f64 {
    gains
        .enumerate()
        .map(|(i, rel)| rel / ((i + 2) as f64).log2())
        .sum()
}

/// `DCG@cutoff / IDCG@cutoff` for the ordering induced by `scores`
/// (descending). Tied scores are ordered worst relevance first.
pub fn ndcg(scores: &[f64], relevance: &[f64], cutoff: usize) -> Result<f64> {
    let d = scores.len();
    if relevance.len() != d {
        return Err(BsgError::Dimension(format!(
            "{d} scores for {} relevance grades",
            relevance.len()
        )));
    }
    if cutoff == 0 || cutoff > d {
        return Err(BsgError::InvalidInput(format!("cutoff {cutoff} outside 1..={d}")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(BsgError::InvalidInput("scores contain NaN".into()));
    }
    if relevance.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(BsgError::InvalidInput("relevance grades must be finite and >= 0".into()));
    }
    if !relevance.iter().any(|r| *r > 0.0) {
        return Err(BsgError::InvalidInput("all relevance grades are zero".into()));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(relevance[a].total_cmp(&relevance[b]))
    });
    let mut ideal = relevance.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let actual = dcg(order.iter().take(cutoff).map(|&i| relevance[i]));
    let best = dcg(ideal.into_iter().take(cutoff));
    Ok(actual / best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    /// Labels by descending score, ties in label order.
    pub ordering: Vec<String>,
    pub scores: Vec<f64>,
    pub ndcg: f64,
}

pub fn rank(scores: &[f64], labels: &[String], relevance: &[f64], cutoff: usize) -> Result<RankingResult> {
    let ndcg = ndcg(scores, relevance, cutoff)?;
    let ordering = rank_nodes(scores, labels)
        .into_iter()
        .map(|i| labels[i].clone())
        .collect();
    Ok(RankingResult {
        ordering,
        scores: scores.to_vec(),
        ndcg,
    })
}
