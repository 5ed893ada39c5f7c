//! Spillover graphs over posterior draws, horizon selection, node measures
//! and highest-posterior-density intervals.
//!
//! Edge matrices are indexed `[source][target]`: entry `(k, j)` is the share
//! (in percent) of target `j`'s forecast error variance attributed to shocks
//! in source `k`. Every column of a per-draw edge matrix therefore sums to 100.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BsgError, Result};
use crate::fevd::FevdAccumulator;
use crate::posterior::PosteriorDraws;

pub const DEFAULT_HPDI_MASS: f64 = 0.95;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_H_MAX: usize = 50;
pub const DEFAULT_EDGE_PERCENTILE: f64 = 80.0;

/// Shortest window over the sorted samples holding `ceil(mass * n)` points.
/// Equal-width windows resolve to the leftmost.
pub fn hpdi(samples: &[f64], mass: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(BsgError::InvalidInput(format!(
            "HPDI needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(BsgError::InvalidInput(format!("HPDI mass {mass} outside (0, 1)")));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(BsgError::InvalidInput("HPDI samples contain NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard against mass * n landing a hair above an integer
    let count = ((mass * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut best = (sorted[0], sorted[count - 1]);
    for start in 1..=(n - count) {
        let lo = sorted[start];
        let hi = sorted[start + count - 1];
        if hi - lo < best.1 - best.0 {
            best = (lo, hi);
        }
    }
    Ok(best)
}

/// Posterior mean with an HPDI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub hpdi_lo: f64,
    pub hpdi_hi: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64], mass: f64) -> Result<Estimate> {
        let (hpdi_lo, hpdi_hi) = hpdi(samples, mass)?;
        Ok(Estimate {
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
            hpdi_lo,
            hpdi_hi,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SpilloverGraph {
    /// Posterior mean spillover in percent, `[source][target]`.
    pub mean_edges: DMatrix<f64>,
    /// Per-draw spillovers in percent, `[source][target]`.
    pub edge_samples: Vec<DMatrix<f64>>,
    pub h: usize,
    pub labels: Vec<String>,
}

impl SpilloverGraph {
    pub fn dim(&self) -> usize {
        self.mean_edges.nrows()
    }

    pub fn draw_count(&self) -> usize {
        self.edge_samples.len()
    }

    /// Samples of one edge across draws.
    pub fn edge_draws(&self, source: usize, target: usize) -> Vec<f64> {
        self.edge_samples.iter().map(|e| e[(source, target)]).collect()
    }

    pub fn edge_estimate(&self, source: usize, target: usize, mass: f64) -> Result<Estimate> {
        Estimate::from_samples(&self.edge_draws(source, target), mass)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn check_draws(draws: &PosteriorDraws, labels: &[String]) -> Result<()> {
    if draws.len() < 2 {
        return Err(BsgError::InvalidInput(format!("need M >= 2 draws, got {}", draws.len())));
    }
    if labels.len() != draws.d {
        return Err(BsgError::Dimension(format!(
            "{} labels for {} components",
            labels.len(),
            draws.d
        )));
    }
    Ok(())
}

fn mean_matrix(samples: &[DMatrix<f64>]) -> DMatrix<f64> {
    let (r, c) = samples[0].shape();
    // fixed summation order keeps results independent of thread count
    let mut sum = DMatrix::zeros(r, c);
    for s in samples {
        sum += s;
    }
    sum / samples.len() as f64
}

/// Current per-draw edges of a set of accumulators.
fn edges_at(accs: &[FevdAccumulator<'_>]) -> Result<Vec<DMatrix<f64>>> {
    accs.par_iter()
        .enumerate()
        .map(|(m, acc)| {
            acc.current()
                .map(|f| f.normalized.transpose() * 100.0)
                .map_err(|e| BsgError::Draw {
                    draw: m,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Spillover graph at horizon `h`.
pub fn build_graph(draws: &PosteriorDraws, h: usize, labels: &[String]) -> Result<SpilloverGraph> {
    let mut graphs = build_graphs(draws, &[h], labels)?;
    Ok(graphs.remove(0))
}

/// Graphs at several horizons from one sweep over `h`.
pub fn build_graphs(
    draws: &PosteriorDraws,
    horizons: &[usize],
    labels: &[String],
) -> Result<Vec<SpilloverGraph>> {
    check_draws(draws, labels)?;
    if horizons.iter().any(|&h| h == 0) {
        return Err(BsgError::InvalidInput("horizon h must be at least 1".into()));
    }
    let h_max = horizons.iter().copied().max().unwrap_or(0);
    let mut accs: Vec<FevdAccumulator<'_>> = draws.draws.iter().map(FevdAccumulator::new).collect();
    let mut out: Vec<Option<SpilloverGraph>> = vec![None; horizons.len()];
    for h in 1..=h_max {
        accs.par_iter_mut().for_each(|a| a.advance());
        if !horizons.contains(&h) {
            continue;
        }
        let edge_samples = edges_at(&accs)?;
        let graph = SpilloverGraph {
            mean_edges: mean_matrix(&edge_samples),
            edge_samples,
            h,
            labels: labels.to_vec(),
        };
        for (slot, &want) in out.iter_mut().zip(horizons) {
            if want == h {
                *slot = Some(graph.clone());
            }
        }
    }
    Ok(out.into_iter().map(|g| g.expect("every horizon visited")).collect())
}

/// Mean edges per horizon up to the selected `h*`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonTrace {
    /// Entry `i` holds the mean edges at `h = i + 1`.
    pub per_h_mean_edges: Vec<Vec<Vec<f64>>>,
    pub h_star: usize,
    pub converged: bool,
    pub epsilon: f64,
    /// Largest entry change from `h - 1` to `h`, for `h = 2..=h_star`.
    pub max_changes: Vec<f64>,
}

impl HorizonTrace {
    pub fn mean_edges_at(&self, h: usize) -> Option<DMatrix<f64>> {
        let rows = self.per_h_mean_edges.get(h.checked_sub(1)?)?;
        let d = rows.len();
        Some(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Smallest `h <= h_max` at which every mean edge moved by less than
/// `epsilon` percentage points since `h - 1`.
pub fn find_h_star(draws: &PosteriorDraws, h_max: usize, epsilon: f64) -> Result<HorizonTrace> {
    if h_max < 2 {
        return Err(BsgError::InvalidInput(format!("H_max = {h_max} must be at least 2")));
    }
    if !(epsilon > 0.0) {
        return Err(BsgError::InvalidInput(format!("epsilon = {epsilon} must be positive")));
    }
    if draws.len() < 2 {
        return Err(BsgError::InvalidInput(format!("need M >= 2 draws, got {}", draws.len())));
    }
    let mut accs: Vec<FevdAccumulator<'_>> = draws.draws.iter().map(FevdAccumulator::new).collect();
    let mut per_h = Vec::new();
    let mut max_changes = Vec::new();
    let mut prev: Option<DMatrix<f64>> = None;
    for h in 1..=h_max {
        accs.par_iter_mut().for_each(|a| a.advance());
        let mean = mean_matrix(&edges_at(&accs)?);
        per_h.push(to_rows(&mean));
        if let Some(p) = &prev {
            let change = (&mean - p).amax();
            max_changes.push(change);
            if change < epsilon {
                return Ok(HorizonTrace {
                    per_h_mean_edges: per_h,
                    h_star: h,
                    converged: true,
                    epsilon,
                    max_changes,
                });
            }
        }
        prev = Some(mean);
    }
    Ok(HorizonTrace {
        per_h_mean_edges: per_h,
        h_star: h_max,
        converged: false,
        epsilon,
        max_changes,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkMeasures {
    /// Total off-diagonal spillover, in summed percent (range `0..=100 d`).
    pub spillover_index: Estimate,
    /// Spillover received by each node, percent.
    pub vulnerability: Vec<Estimate>,
    /// Share of system spillover emitted by each node, percent; `None` when
    /// every draw has a zero spillover index.
    pub influence: Option<Vec<Estimate>>,
    /// Draws left out of the influence scores because their index was zero.
    pub influence_excluded: usize,
    pub h: usize,
    pub hpdi_mass: f64,
}

/// Index, vulnerability and influence of a single draw's edge matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMeasures {
    pub index: f64,
    pub vulnerability: Vec<f64>,
    pub influence: Option<Vec<f64>>,
}

/// Index at or below which influence is undefined.
const ZERO_INDEX: f64 = 1e-12;

pub fn draw_measures(edges: &DMatrix<f64>) -> DrawMeasures {
    let d = edges.nrows();
    let mut vulnerability = vec![0.0; d];
    let mut emitted = vec![0.0; d];
    for k in 0..d {
        for j in 0..d {
            if j != k {
                vulnerability[j] += edges[(k, j)];
                emitted[k] += edges[(k, j)];
            }
        }
    }
    let index: f64 = emitted.iter().sum();
    let influence = (index > ZERO_INDEX).then(|| emitted.iter().map(|e| 100.0 * e / index).collect());
    DrawMeasures {
        index,
        vulnerability,
        influence,
    }
}

pub fn network_measures(g: &SpilloverGraph, mass: f64) -> Result<NetworkMeasures> {
    if g.edge_samples.len() < 2 {
        return Err(BsgError::InvalidInput("graph needs at least 2 draws".into()));
    }
    let per_draw: Vec<DrawMeasures> = g.edge_samples.par_iter().map(draw_measures).collect();
    let d = g.dim();
    let index: Vec<f64> = per_draw.iter().map(|m| m.index).collect();
    let vulnerability = (0..d)
        .map(|j| {
            let s: Vec<f64> = per_draw.iter().map(|m| m.vulnerability[j]).collect();
            Estimate::from_samples(&s, mass)
        })
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<&Vec<f64>> = per_draw.iter().filter_map(|m| m.influence.as_ref()).collect();
    let influence_excluded = per_draw.len() - defined.len();
    let influence = match defined.len() {
        0 => None,
        1 => Some(
            defined[0]
                .iter()
                .map(|&v| Estimate {
                    mean: v,
                    hpdi_lo: v,
                    hpdi_hi: v,
                })
                .collect(),
        ),
        _ => Some(
            (0..d)
                .map(|k| {
                    let s: Vec<f64> = defined.iter().map(|m| m[k]).collect();
                    Estimate::from_samples(&s, mass)
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    if influence_excluded > 0 {
        log::warn!("{influence_excluded} draws with zero spillover index left out of influence scores");
    }
    Ok(NetworkMeasures {
        spillover_index: Estimate::from_samples(&index, mass)?,
        vulnerability,
        influence,
        influence_excluded,
        h: g.h,
        hpdi_mass: mass,
    })
}

/// Node order by descending score; equal scores fall back to label order.
pub fn rank_nodes(scores: &[f64], labels: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| labels[a].cmp(&labels[b]))
    });
    order
}

/// Linear-interpolation percentile (`pct` in `[0, 100]`).
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (pct.clamp(0.0, 100.0) / 100.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRecord {
    pub label: String,
    pub influence: Option<Estimate>,
    pub vulnerability: Estimate,
    /// Share of the node's own forecast error variance explained by itself.
    pub self_spillover: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub mean: f64,
    pub hpdi_lo: f64,
    pub hpdi_hi: f64,
    pub h: usize,
}

/// JSON graph document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphExport {
    pub h: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub hpdi_mass: f64,
    pub spillover_index: Estimate,
    pub influence_excluded: usize,
    pub nodes: Vec<NodeRecord>,
    /// Off-diagonal edges.
    pub edges: Vec<EdgeRecord>,
}

impl GraphExport {
    pub fn new(g: &SpilloverGraph, measures: &NetworkMeasures) -> Result<GraphExport> {
        let d = g.dim();
        let nodes = (0..d)
            .map(|i| NodeRecord {
                label: g.labels[i].clone(),
                influence: measures.influence.as_ref().map(|v| v[i]),
                vulnerability: measures.vulnerability[i],
                self_spillover: g.mean_edges[(i, i)],
            })
            .collect();
        let mut edges = Vec::with_capacity(d * (d - 1));
        for k in 0..d {
            for j in 0..d {
                if k == j {
                    continue;
                }
                let est = g.edge_estimate(k, j, measures.hpdi_mass)?;
                edges.push(EdgeRecord {
                    source: g.labels[k].clone(),
                    target: g.labels[j].clone(),
                    mean: g.mean_edges[(k, j)],
                    hpdi_lo: est.hpdi_lo,
                    hpdi_hi: est.hpdi_hi,
                    h: g.h,
                });
            }
        }
        Ok(GraphExport {
            h: g.h,
            m: g.draw_count(),
            hpdi_mass: measures.hpdi_mass,
            spillover_index: measures.spillover_index,
            influence_excluded: measures.influence_excluded,
            nodes,
            edges,
        })
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT digraph keeping off-diagonal mean edges strictly above the given
/// percentile of all off-diagonal means. Pen width scales with the weight.
pub fn to_dot(g: &SpilloverGraph, edge_percentile: f64, comments: &[String]) -> String {
    let d = g.dim();
    let off: Vec<f64> = (0..d)
        .flat_map(|k| (0..d).filter(move |&j| j != k).map(move |j| (k, j)))
        .map(|(k, j)| g.mean_edges[(k, j)])
        .collect();
    let threshold = percentile(&off, edge_percentile);
    let max_w = off.iter().copied().fold(0.0f64, f64::max);
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "// {c}");
    }
    let _ = writeln!(out, "digraph spillover {{");
    let _ = writeln!(out, "  label=\"h = {}\";", g.h);
    for l in &g.labels {
        let _ = writeln!(out, "  \"{}\";", dot_escape(l));
    }
    for k in 0..d {
        for j in 0..d {
            let w = g.mean_edges[(k, j)];
            if k == j || !(w > threshold) {
                continue;
            }
            let pen = if max_w > 0.0 { 0.5 + 4.5 * w / max_w } else { 1.0 };
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{:.1}\", penwidth={:.3}];",
                dot_escape(&g.labels[k]),
                dot_escape(&g.labels[j]),
                w,
                pen
            );
        }
    }
    out.push_str("}\n");
    out
}
