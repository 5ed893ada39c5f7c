//! Point-estimate VAR Granger-causality graphs with Benjamini-Hochberg
//! filtering.

use nalgebra::{Cholesky, DMatrix};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{BsgError, Result};
use crate::mts::Mts;
use crate::posterior::{build_design, symmetric_condition};

/// Above this condition number `X'X` is treated as singular.
const MAX_DESIGN_CONDITION: f64 = 1e12;

/// Significant lagged edges of a least-squares VAR(p).
#[derive(Debug, Clone)]
pub struct NgcGraph {
    /// `adjacency[source][target]`; the diagonal is never set.
    pub adjacency: Vec<Vec<bool>>,
    /// Coefficient of the most significant lag, `[source][target]`.
    pub weights: DMatrix<f64>,
    /// Smallest p-value over lags, `[source][target]`.
    pub p_values: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl NgcGraph {
    pub fn from_adjacency(adjacency: Vec<Vec<bool>>, labels: Vec<String>) -> NgcGraph {
        let d = adjacency.len();
        let weights = DMatrix::from_fn(d, d, |s, t| if adjacency[s][t] { 1.0 } else { 0.0 });
        NgcGraph {
            adjacency,
            weights,
            p_values: DMatrix::from_element(d, d, f64::NAN),
            labels,
        }
    }

    pub fn dim(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().flatten().filter(|&&e| e).count()
    }

    /// No cross edges survived.
    pub fn is_degenerate(&self) -> bool {
        self.edge_count() == 0
    }

    pub fn transposed(&self) -> NgcGraph {
        let d = self.dim();
        NgcGraph {
            adjacency: (0..d).map(|s| (0..d).map(|t| self.adjacency[t][s]).collect()).collect(),
            weights: self.weights.transpose(),
            p_values: self.p_values.transpose(),
            labels: self.labels.clone(),
        }
    }
}

/// Indices rejected by the Benjamini-Hochberg step-up rule at level `q`.
pub fn benjamini_hochberg(p_values: &[f64], q: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut cutoff = 0;
    for (rank, &i) in order.iter().enumerate() {
        if p_values[i] <= (rank + 1) as f64 * q / m as f64 {
            cutoff = rank + 1;
        }
    }
    let mut reject = vec![false; m];
    for &i in &order[..cutoff] {
        reject[i] = true;
    }
    reject
}

/// Per-equation OLS with two-sided t-tests on every off-diagonal lag
/// coefficient, then BH at level `fdr_q` over all `d^2 p - dp` of them.
pub fn fit_ngc(x: &Mts, p: usize, fdr_q: f64) -> Result<NgcGraph> {
    if !(fdr_q > 0.0 && fdr_q < 1.0) {
        return Err(BsgError::InvalidInput(format!("FDR level {fdr_q} outside (0, 1)")));
    }
    let design = build_design(x, p)?;
    let d = x.dim();
    let n = design.x.nrows();
    let k = design.x.ncols();
    if n <= k {
        return Err(BsgError::TooShort(format!(
            "least squares needs more than {k} rows, have {n}"
        )));
    }
    let xtx = design.x.tr_mul(&design.x);
    let condition = symmetric_condition(&xtx);
    if !(condition <= MAX_DESIGN_CONDITION) {
        return Err(BsgError::SingularDesign { condition });
    }
    let chol = Cholesky::new(xtx).ok_or(BsgError::SingularDesign { condition })?;
    let beta = chol.solve(&design.x.tr_mul(&design.z));
    let xtx_inv = chol.inverse();
    let resid = &design.z - &design.x * &beta;
    let dof = (n - k) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| BsgError::InvalidInput(e.to_string()))?;

    // hypotheses (lag, source, target) for source != target
    let mut tests = Vec::with_capacity(p * d * (d - 1));
    let mut p_vals = Vec::with_capacity(tests.capacity());
    let mut coefs = Vec::with_capacity(tests.capacity());
    for target in 0..d {
        let s2 = resid.column(target).norm_squared() / dof;
        for lag in 0..p {
            for source in 0..d {
                if source == target {
                    continue;
                }
                let row = 1 + lag * d + source;
                let coef = beta[(row, target)];
                let se = (s2 * xtx_inv[(row, row)]).sqrt();
                let pv = if se > 0.0 {
                    2.0 * (1.0 - t_dist.cdf((coef / se).abs()))
                } else if coef != 0.0 {
                    0.0
                } else {
                    1.0
                };
                tests.push((source, target));
                p_vals.push(pv.clamp(0.0, 1.0));
                coefs.push(coef);
            }
        }
    }
    let reject = benjamini_hochberg(&p_vals, fdr_q);
    let mut adjacency = vec![vec![false; d]; d];
    let mut weights = DMatrix::zeros(d, d);
    let mut best_p = DMatrix::from_element(d, d, f64::NAN);
    for (i, &(s, t)) in tests.iter().enumerate() {
        if reject[i] && coefs[i].is_finite() {
            adjacency[s][t] = true;
        }
        if !(best_p[(s, t)] <= p_vals[i]) {
            best_p[(s, t)] = p_vals[i];
            weights[(s, t)] = coefs[i];
        }
    }
    Ok(NgcGraph {
        adjacency,
        weights,
        p_values: best_p,
        labels: x.labels().to_vec(),
    })
}
