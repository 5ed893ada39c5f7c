//! Multivariate time-series container, preprocessing and stationarity checks.

use std::collections::HashSet;
use std::io::{Read, Write};

use nalgebra::{DMatrix, Schur};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{BsgError, Result};

/// A `T x d` panel of observations, one column per labelled component.
#[derive(Debug, Clone, PartialEq)]
pub struct Mts {
    values: DMatrix<f64>,
    labels: Vec<String>,
}

impl Mts {
    pub fn new(values: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let (t, d) = values.shape();
        if t < 2 {
            return Err(BsgError::TooShort(format!("need at least 2 observations, got {t}")));
        }
        if d < 2 {
            return Err(BsgError::InvalidInput(format!(
                "need at least 2 components, got {d}"
            )));
        }
        if labels.len() != d {
            return Err(BsgError::Dimension(format!(
                "{} labels for {d} columns",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(BsgError::InvalidInput(format!("duplicate label `{l}`")));
            }
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (row, col) = (idx % t, idx / t);
            return Err(BsgError::InvalidInput(format!(
                "non-finite value at row {row}, column `{}`",
                labels[col]
            )));
        }
        Ok(Mts { values, labels })
    }

    /// Builds a panel with generated labels `z1..zd`.
    pub fn with_default_labels(values: DMatrix<f64>) -> Result<Self> {
        let labels = default_labels(values.ncols());
        Mts::new(values, labels)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of components `d`.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Row `t + 1` minus row `t`; one fewer observation, labels kept.
    pub fn first_difference(&self) -> Result<Mts> {
        let t = self.len();
        if t < 3 {
            return Err(BsgError::TooShort(format!(
                "differencing {t} observations leaves fewer than 2"
            )));
        }
        let diff = self.values.rows(1, t - 1) - self.values.rows(0, t - 1);
        Mts::new(diff, self.labels.clone())
    }

    /// Inverse of [`Mts::first_difference`] given the original first row.
    pub fn cumulative_sum_from(&self, first_row: &[f64]) -> Result<Mts> {
        let d = self.dim();
        if first_row.len() != d {
            return Err(BsgError::Dimension(format!(
                "first row has {} entries, expected {d}",
                first_row.len()
            )));
        }
        let t = self.len();
        let mut out = DMatrix::zeros(t + 1, d);
        for j in 0..d {
            out[(0, j)] = first_row[j];
            for i in 0..t {
                out[(i + 1, j)] = out[(i, j)] + self.values[(i, j)];
            }
        }
        Mts::new(out, self.labels.clone())
    }

    /// Centres each column and scales it to unit sample standard deviation.
    /// Constant columns are only centred.
    pub fn zscore(&self) -> Mts {
        let t = self.len() as f64;
        let mut out = self.values.clone();
        for mut col in out.column_iter_mut() {
            let mean = col.sum() / t;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
            let sd = var.sqrt();
            for v in col.iter_mut() {
                *v -= mean;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        Mts {
            values: out,
            labels: self.labels.clone(),
        }
    }

    /// Reorders components; `order[i]` is the old index placed at position `i`.
    pub fn permuted(&self, order: &[usize]) -> Result<Mts> {
        let d = self.dim();
        let mut check: Vec<usize> = order.to_vec();
        check.sort_unstable();
        if check != (0..d).collect::<Vec<_>>() {
            return Err(BsgError::InvalidInput("not a permutation".into()));
        }
        let values = DMatrix::from_fn(self.len(), d, |i, j| self.values[(i, order[j])]);
        let labels = order.iter().map(|&k| self.labels[k].clone()).collect();
        Mts::new(values, labels)
    }

    /// Parses CSV: header of labels, optional leading `timestamp` column
    /// (ignored), `#` comment lines skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Mts> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let skip_first = header
            .get(0)
            .map(|h| h.eq_ignore_ascii_case("timestamp"))
            .unwrap_or(false);
        let labels: Vec<String> = header
            .iter()
            .skip(usize::from(skip_first))
            .map(str::to_string)
            .collect();
        let d = labels.len();
        let mut data = Vec::new();
        let mut rows = 0usize;
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let fields: Vec<&str> = record.iter().skip(usize::from(skip_first)).collect();
            if fields.len() != d {
                return Err(BsgError::Dimension(format!(
                    "data row {} has {} fields, header has {d}",
                    line + 1,
                    fields.len()
                )));
            }
            for (j, f) in fields.iter().enumerate() {
                let v: f64 = f.parse().map_err(|_| {
                    BsgError::InvalidInput(format!(
                        "row {}, column `{}`: cannot parse `{f}`",
                        line + 1,
                        labels[j]
                    ))
                })?;
                data.push(v);
            }
            rows += 1;
        }
        Mts::new(DMatrix::from_row_slice(rows, d, &data), labels)
    }

    /// Writes the panel as CSV, preceded by `# `-prefixed comment lines.
    pub fn write_csv<W: Write>(&self, mut writer: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(writer, "# {c}")?;
        }
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.labels)?;
        for row in self.values.row_iter() {
            wtr.write_record(row.iter().map(|v| format_float(*v)))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v}")
}

pub fn default_labels(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("z{i}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// Companion-matrix eigenvalue magnitudes, descending.
    pub eigen_moduli: Vec<f64>,
    pub is_stationary: bool,
    pub max_modulus: f64,
}

/// Stacks `phi_1..phi_p` into the `(pd) x (pd)` companion matrix.
pub fn companion_matrix(coeffs: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let p = coeffs.len();
    if p == 0 {
        return Err(BsgError::InvalidInput("no coefficient matrices".into()));
    }
    let d = coeffs[0].nrows();
    for (i, phi) in coeffs.iter().enumerate() {
        if phi.nrows() != d || phi.ncols() != d {
            return Err(BsgError::Dimension(format!(
                "phi_{} is {}x{}, expected {d}x{d}",
                i + 1,
                phi.nrows(),
                phi.ncols()
            )));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(BsgError::InvalidInput(format!("phi_{} has non-finite entries", i + 1)));
        }
    }
    let n = p * d;
    let mut c = DMatrix::zeros(n, n);
    for (i, phi) in coeffs.iter().enumerate() {
        c.view_mut((0, i * d), (d, d)).copy_from(phi);
    }
    for i in d..n {
        c[(i, i - d)] = 1.0;
    }
    Ok(c)
}

/// Eigenvalue moduli of a square matrix, descending.
///
/// The sparsity pattern is first split into strongly connected components;
/// the spectrum is the union of the spectra of the diagonal blocks under that
/// block-triangular permutation. Singleton blocks contribute their diagonal
/// entry exactly, so nilpotent (acyclic) patterns give exact zeros instead of
/// the `eps^(1/k)` noise a dense solver produces on defective matrices.
pub fn eigen_moduli(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut moduli = Vec::with_capacity(n);
    for comp in tarjan_scc(&g) {
        if comp.len() == 1 {
            let i = comp[0].index();
            moduli.push(m[(i, i)].abs());
            continue;
        }
        let idx: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        let block = DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])]);
        moduli.extend(block_moduli(block));
    }
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli
}

/// Schur iterations allowed before retrying with a shifted block.
const SCHUR_MAX_ITER: usize = 10_000;

/// Moduli of a dense block. The unshifted QR iteration can stall on some
/// permutation-like blocks; shifting by a multiple of the identity breaks
/// the symmetry without changing the eigenvectors.
fn block_moduli(block: DMatrix<f64>) -> Vec<f64> {
    let n = block.nrows();
    let scale = block.amax().max(1.0);
    for shift in [0.0, 0.1, 0.37, 1.3] {
        let s = shift * scale;
        let shifted = &block + DMatrix::identity(n, n) * s;
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, SCHUR_MAX_ITER) {
            return schur
                .complex_eigenvalues()
                .iter()
                .map(|z| (z - s).norm())
                .collect();
        }
    }
    log::warn!("Schur iteration did not converge; falling back to a norm bound");
    vec![block.norm(); n]
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigen_moduli(m).first().copied().unwrap_or(0.0)
}

/// Companion-form stationarity check for `phi_1..phi_p`.
pub fn check_stationarity(coeffs: &[DMatrix<f64>]) -> Result<StationarityReport> {
    let companion = companion_matrix(coeffs)?;
    let eigen_moduli = eigen_moduli(&companion);
    let max_modulus = eigen_moduli.first().copied().unwrap_or(0.0);
    Ok(StationarityReport {
        is_stationary: max_modulus < 1.0,
        max_modulus,
        eigen_moduli,
    })
}
