//! Moving-average coefficients and generalized forecast error variance
//! decomposition for one parameter point.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{BsgError, Result};
use crate::posterior::VarParams;

/// `psi_0 .. psi_{h-1}` of the moving-average representation.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSequence {
    pub psis: Vec<DMatrix<f64>>,
}

/// `psi_0 = I`, `psi_i = sum_{j=1..min(i,p)} phi_j psi_{i-j}`.
pub fn ma_coefficients(params: &VarParams, h: usize) -> Result<PsiSequence> {
    if h == 0 {
        return Err(BsgError::InvalidInput("horizon h must be at least 1".into()));
    }
    let mut it = PsiIter::new(params);
    let psis = (0..h).map(|_| it.next_psi()).collect();
    Ok(PsiSequence { psis })
}

/// Streams `psi_i` while keeping only the last `p` of them.
#[derive(Debug, Clone)]
struct PsiIter<'a> {
    phis: &'a [DMatrix<f64>],
    recent: VecDeque<DMatrix<f64>>,
    i: usize,
}

impl<'a> PsiIter<'a> {
    fn new(params: &'a VarParams) -> Self {
        PsiIter {
            phis: &params.phis,
            recent: VecDeque::with_capacity(params.phis.len()),
            i: 0,
        }
    }

    fn next_psi(&mut self) -> DMatrix<f64> {
        let d = self.phis[0].nrows();
        let psi = if self.i == 0 {
            DMatrix::identity(d, d)
        } else {
            // recent[0] is psi_{i-1}
            let mut acc = DMatrix::zeros(d, d);
            for (j, prev) in self.recent.iter().enumerate().take(self.phis.len()) {
                acc += &self.phis[j] * prev;
            }
            acc
        };
        self.recent.push_front(psi.clone());
        self.recent.truncate(self.phis.len());
        self.i += 1;
        psi
    }
}

/// `raw[j][k] = w_{h,jk}`; `normalized` rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FevdMatrix {
    pub raw: DMatrix<f64>,
    pub normalized: DMatrix<f64>,
    pub h: usize,
}

/// Running sums behind the decomposition, advanced one horizon at a time.
#[derive(Debug, Clone)]
pub struct FevdAccumulator<'a> {
    psi: PsiIter<'a>,
    sigma: &'a DMatrix<f64>,
    /// `sum_i (e_j' psi_i Sigma e_k)^2`
    numerator: DMatrix<f64>,
    /// `sum_i e_j' psi_i Sigma psi_i' e_j`
    variance: Vec<f64>,
    h: usize,
}

impl<'a> FevdAccumulator<'a> {
    pub fn new(params: &'a VarParams) -> Self {
        let d = params.dim();
        FevdAccumulator {
            psi: PsiIter::new(params),
            sigma: &params.sigma_a,
            numerator: DMatrix::zeros(d, d),
            variance: vec![0.0; d],
            h: 0,
        }
    }

    /// Horizon reached so far.
    pub fn horizon(&self) -> usize {
        self.h
    }

    /// Adds `psi_h` to the sums, moving to horizon `h + 1`.
    pub fn advance(&mut self) {
        let psi = self.psi.next_psi();
        let m = &psi * self.sigma;
        let d = m.nrows();
        for j in 0..d {
            let mut var = 0.0;
            for k in 0..d {
                let v = m[(j, k)];
                self.numerator[(j, k)] += v * v;
                var += v * psi[(j, k)];
            }
            self.variance[j] += var;
        }
        self.h += 1;
    }

    /// Forecast error variance of each component at the current horizon.
    pub fn forecast_variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn current(&self) -> Result<FevdMatrix> {
        if self.h == 0 {
            return Err(BsgError::InvalidInput("horizon h must be at least 1".into()));
        }
        let d = self.numerator.nrows();
        let mut raw = DMatrix::zeros(d, d);
        let mut normalized = DMatrix::zeros(d, d);
        for j in 0..d {
            let var = self.variance[j];
            if !(var > 0.0) {
                return Err(BsgError::DegenerateComponent { component: j });
            }
            let mut row_sum = 0.0;
            for k in 0..d {
                let w = self.numerator[(j, k)] / (self.sigma[(k, k)] * var);
                raw[(j, k)] = w;
                row_sum += w;
            }
            if !(row_sum > 0.0) || !row_sum.is_finite() {
                return Err(BsgError::DegenerateComponent { component: j });
            }
            for k in 0..d {
                normalized[(j, k)] = raw[(j, k)] / row_sum;
            }
        }
        Ok(FevdMatrix {
            raw,
            normalized,
            h: self.h,
        })
    }
}

/// Generalized `h`-step decomposition of one parameter point.
pub fn fevd(params: &VarParams, h: usize) -> Result<FevdMatrix> {
    if h == 0 {
        return Err(BsgError::InvalidInput("horizon h must be at least 1".into()));
    }
    let mut acc = FevdAccumulator::new(params);
    for _ in 0..h {
        acc.advance();
    }
    acc.current()
}
