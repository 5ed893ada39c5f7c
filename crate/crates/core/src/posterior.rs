//! Bayesian VAR(p) estimation under the conjugate normal-inverse-Wishart prior.
//!
//! The regression form stacks observations as `Z = X B + A`, where row `i` of
//! `X` is `(1, z'_{p+i-1}, ..., z'_i)` (intercept, then lags newest first) and
//! `B` is the `(pd+1) x d` coefficient matrix `[phi0'; phi1'; ...; phip']`.
//! Given the prior
//!
//! ```text
//! Sigma_a      ~ IW(V0, n0)
//! vec(B) | Sigma_a ~ N(vec(B0), Sigma_a (x) C^-1)
//! ```
//!
//! the posterior has the same form with `precision = X'X + C`,
//! `B~ = precision^-1 (X'Z + C B0)`, scale `V0 + S~` and `n0 + n` degrees of
//! freedom. Draws are exact and i.i.d.; no Markov chain is involved.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BsgError, Result};
use crate::mts::Mts;

/// Above this condition number `X'X + C` is treated as singular.
pub const MAX_CONDITION: f64 = 1e15;

const SYMMETRY_TOL: f64 = 1e-10;

/// One VAR(p) parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct VarParams {
    pub phi0: DVector<f64>,
    pub phis: Vec<DMatrix<f64>>,
    pub sigma_a: DMatrix<f64>,
}

impl VarParams {
    pub fn new(phi0: DVector<f64>, phis: Vec<DMatrix<f64>>, sigma_a: DMatrix<f64>) -> Result<Self> {
        let params = VarParams { phi0, phis, sigma_a };
        params.validate()?;
        Ok(params)
    }

    /// VAR(1) with zero intercept.
    pub fn var1(phi1: DMatrix<f64>, sigma_a: DMatrix<f64>) -> Result<Self> {
        let d = phi1.nrows();
        VarParams::new(DVector::zeros(d), vec![phi1], sigma_a)
    }

    pub fn dim(&self) -> usize {
        self.sigma_a.nrows()
    }

    pub fn order(&self) -> usize {
        self.phis.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.sigma_a.nrows();
        if self.sigma_a.ncols() != d || self.phi0.len() != d {
            return Err(BsgError::Dimension(format!(
                "sigma_a is {}x{}, phi0 has {} entries",
                d,
                self.sigma_a.ncols(),
                self.phi0.len()
            )));
        }
        if self.phis.is_empty() {
            return Err(BsgError::InvalidInput("lag order must be at least 1".into()));
        }
        for (i, phi) in self.phis.iter().enumerate() {
            if phi.shape() != (d, d) {
                return Err(BsgError::Dimension(format!(
                    "phi_{} is {}x{}, expected {d}x{d}",
                    i + 1,
                    phi.nrows(),
                    phi.ncols()
                )));
            }
        }
        check_spd(&self.sigma_a, "sigma_a")
    }

    /// `(pd+1) x d` regression coefficients.
    pub fn to_beta(&self) -> DMatrix<f64> {
        let d = self.dim();
        let p = self.order();
        let mut beta = DMatrix::zeros(p * d + 1, d);
        beta.row_mut(0).copy_from(&self.phi0.transpose());
        for (i, phi) in self.phis.iter().enumerate() {
            beta.view_mut((1 + i * d, 0), (d, d)).copy_from(&phi.transpose());
        }
        beta
    }

    /// Splits regression coefficients into intercept and lag matrices.
    pub fn from_beta(beta: &DMatrix<f64>, sigma_a: DMatrix<f64>) -> Result<Self> {
        let d = beta.ncols();
        let k = beta.nrows();
        if k < d + 1 || (k - 1) % d != 0 {
            return Err(BsgError::Dimension(format!(
                "coefficient matrix {k}x{d} is not (pd+1)xd"
            )));
        }
        let p = (k - 1) / d;
        let phi0 = beta.row(0).transpose();
        let phis = (0..p)
            .map(|i| beta.view((1 + i * d, 0), (d, d)).transpose())
            .collect();
        VarParams::new(phi0, phis, sigma_a)
    }
}

/// Symmetric within tolerance and Cholesky-factorable.
pub(crate) fn check_spd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(BsgError::Dimension(format!("{name} is not square")));
    }
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(BsgError::NotPositiveDefinite(format!(
                    "{name} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) || Cholesky::new(m.clone()).is_none() {
        return Err(BsgError::NotPositiveDefinite(format!("{name} has no Cholesky factor")));
    }
    Ok(())
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Normal-inverse-Wishart prior hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwPrior {
    pub v0: DMatrix<f64>,
    pub n0: f64,
    pub beta0: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl NiwPrior {
    /// Vague prior: `V0 = I`, `n0 = d + 2`, `B0 = 0`, `C = I / c0`.
    pub fn vague(d: usize, p: usize, c0: f64) -> NiwPrior {
        let k = p * d + 1;
        NiwPrior {
            v0: DMatrix::identity(d, d),
            n0: d as f64 + 2.0,
            beta0: DMatrix::zeros(k, d),
            c: DMatrix::identity(k, k) / c0,
        }
    }

    /// [`NiwPrior::vague`] with `c0 = 1e6`.
    pub fn default_for(d: usize, p: usize) -> NiwPrior {
        NiwPrior::vague(d, p, 1e6)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.v0.nrows();
        let k = self.c.nrows();
        if self.beta0.shape() != (k, d) {
            return Err(BsgError::Dimension(format!(
                "beta0 is {}x{}, expected {k}x{d}",
                self.beta0.nrows(),
                self.beta0.ncols()
            )));
        }
        if !(self.n0 > 0.0) {
            return Err(BsgError::InvalidInput(format!("n0 = {} must be positive", self.n0)));
        }
        check_spd(&self.v0, "V0")?;
        check_spd(&self.c, "C")
    }
}

/// Regression form of a VAR(p) fit.
#[derive(Debug, Clone)]
pub struct Design {
    /// `(T-p) x d` responses.
    pub z: DMatrix<f64>,
    /// `(T-p) x (pd+1)` regressors.
    pub x: DMatrix<f64>,
    pub p: usize,
    /// Components whose value never changes over the sample.
    pub constant_components: Vec<usize>,
}

pub fn build_design(x: &Mts, p: usize) -> Result<Design> {
    if p == 0 {
        return Err(BsgError::InvalidInput("lag order p must be at least 1".into()));
    }
    let t = x.len();
    let d = x.dim();
    if t <= p {
        return Err(BsgError::TooShort(format!("T = {t} must exceed p = {p}")));
    }
    if t <= p * d + 1 {
        log::warn!("T = {t} <= pd + 1 = {}; the fit is carried by the prior", p * d + 1);
    }
    let v = x.values();
    let n = t - p;
    let z = v.rows(p, n).into_owned();
    let mut design = DMatrix::zeros(n, p * d + 1);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for lag in 1..=p {
            let src = p + i - lag;
            for j in 0..d {
                design[(i, 1 + (lag - 1) * d + j)] = v[(src, j)];
            }
        }
    }
    let constant_components: Vec<usize> = (0..d)
        .filter(|&j| {
            let col = v.column(j);
            col.iter().all(|&c| c == col[0])
        })
        .collect();
    for &j in &constant_components {
        log::warn!("component `{}` is constant", x.labels()[j]);
    }
    Ok(Design {
        z,
        x: design,
        p,
        constant_components,
    })
}

/// Conjugate posterior parameters.
#[derive(Debug, Clone)]
pub struct NiwPosterior {
    pub v_post: DMatrix<f64>,
    pub n_post: f64,
    pub beta_tilde: DMatrix<f64>,
    /// `X'X + C`.
    pub precision: DMatrix<f64>,
    pub n_effective: usize,
    pub p: usize,
}

impl NiwPosterior {
    pub fn dim(&self) -> usize {
        self.v_post.nrows()
    }

    /// Uses this posterior as the prior for further data.
    pub fn as_prior(&self) -> NiwPrior {
        NiwPrior {
            v0: self.v_post.clone(),
            n0: self.n_post,
            beta0: self.beta_tilde.clone(),
            c: self.precision.clone(),
        }
    }

    /// Posterior mean of `Sigma_a`, `V_post / (n_post - d - 1)`.
    pub fn sigma_mean(&self) -> Result<DMatrix<f64>> {
        let d = self.dim() as f64;
        if self.n_post <= d + 1.0 {
            return Err(BsgError::DegreesOfFreedom {
                dof: self.n_post,
                min: d + 1.0,
            });
        }
        Ok(&self.v_post / (self.n_post - d - 1.0))
    }

    /// Posterior-mean parameter point.
    pub fn mean_params(&self) -> Result<VarParams> {
        VarParams::from_beta(&self.beta_tilde, self.sigma_mean()?)
    }
}

/// Condition number of a symmetric matrix via its eigenvalues.
pub(crate) fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn compute_posterior(z: &DMatrix<f64>, x: &DMatrix<f64>, prior: &NiwPrior) -> Result<NiwPosterior> {
    prior.validate()?;
    let d = prior.v0.nrows();
    let k = prior.c.nrows();
    if z.ncols() != d || x.ncols() != k || z.nrows() != x.nrows() {
        return Err(BsgError::Dimension(format!(
            "Z is {}x{}, X is {}x{}, prior expects d = {d}, k = {k}",
            z.nrows(),
            z.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    if (k - 1) % d != 0 {
        return Err(BsgError::Dimension(format!("k = {k} is not pd + 1 for d = {d}")));
    }
    let n = z.nrows();
    let xtx = x.tr_mul(x);
    let mut precision = &xtx + &prior.c;
    symmetrize(&mut precision);
    let condition = symmetric_condition(&precision);
    if !(condition <= MAX_CONDITION) {
        return Err(BsgError::SingularPrecision { condition });
    }
    let chol = Cholesky::new(precision.clone()).ok_or(BsgError::SingularPrecision { condition })?;
    // X'X B^ = X'Z for any least-squares solution B^, so the rank-deficient
    // case needs no pseudo-inverse.
    let rhs = x.tr_mul(z) + &prior.c * &prior.beta0;
    let beta_tilde = chol.solve(&rhs);

    let resid = z - x * &beta_tilde;
    let shrink = &beta_tilde - &prior.beta0;
    let s_tilde = resid.tr_mul(&resid) + shrink.tr_mul(&(&prior.c * &shrink));
    let mut v_post = &prior.v0 + s_tilde;
    symmetrize(&mut v_post);

    Ok(NiwPosterior {
        v_post,
        n_post: prior.n0 + n as f64,
        beta_tilde,
        precision,
        n_effective: n,
        p: (k - 1) / d,
    })
}

/// Design assembly plus posterior in one call.
pub fn fit(x: &Mts, p: usize, prior: Option<&NiwPrior>) -> Result<NiwPosterior> {
    let design = build_design(x, p)?;
    let default_prior;
    let prior = match prior {
        Some(pr) => pr,
        None => {
            default_prior = NiwPrior::default_for(x.dim(), p);
            &default_prior
        }
    };
    compute_posterior(&design.z, &design.x, prior)
}

/// `M` i.i.d. joint posterior draws.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub draws: Vec<VarParams>,
    pub seed: u64,
    pub d: usize,
    pub p: usize,
}

impl PosteriorDraws {
    pub fn new(draws: Vec<VarParams>, seed: u64) -> Result<Self> {
        if draws.len() < 2 {
            return Err(BsgError::InvalidInput(format!(
                "need at least 2 draws, got {}",
                draws.len()
            )));
        }
        let d = draws[0].dim();
        let p = draws[0].order();
        for (m, draw) in draws.iter().enumerate() {
            if draw.dim() != d || draw.order() != p {
                return Err(BsgError::Dimension(format!(
                    "draw {m} has d = {}, p = {}; expected d = {d}, p = {p}",
                    draw.dim(),
                    draw.order()
                )));
            }
            draw.validate().map_err(|e| BsgError::Draw {
                draw: m,
                source: Box::new(e),
            })?;
        }
        Ok(PosteriorDraws { draws, seed, d, p })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Precomputed factors for repeated joint draws.
struct NiwSampler<'a> {
    post: &'a NiwPosterior,
    /// Lower Cholesky factor of `V_post^-1`.
    inv_scale_chol: DMatrix<f64>,
    /// Cholesky factor of the precision `X'X + C`.
    precision_chol: Cholesky<f64, Dyn>,
}

impl<'a> NiwSampler<'a> {
    fn new(post: &'a NiwPosterior) -> Result<Self> {
        let d = post.dim() as f64;
        if post.n_post <= d + 1.0 {
            return Err(BsgError::DegreesOfFreedom {
                dof: post.n_post,
                min: d + 1.0,
            });
        }
        let v_chol = Cholesky::new(post.v_post.clone())
            .ok_or_else(|| BsgError::NotPositiveDefinite("V_post".into()))?;
        let mut v_inv = v_chol.inverse();
        symmetrize(&mut v_inv);
        let inv_scale_chol = Cholesky::new(v_inv)
            .ok_or_else(|| BsgError::NotPositiveDefinite("V_post^-1".into()))?
            .l();
        let precision_chol = Cholesky::new(post.precision.clone())
            .ok_or_else(|| BsgError::NotPositiveDefinite("X'X + C".into()))?;
        Ok(NiwSampler {
            post,
            inv_scale_chol,
            precision_chol,
        })
    }

    /// Inverse-Wishart draw through the Bartlett factor of the matching Wishart:
    /// `W = (L A)(L A)'` with `L L' = V^-1`, and `Sigma = W^-1`.
    fn draw_sigma(&self, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
        let d = self.post.dim();
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            let chi = ChiSquared::new(self.post.n_post - i as f64)
                .map_err(|e| BsgError::InvalidInput(e.to_string()))?;
            a[(i, i)] = chi.sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = StandardNormal.sample(rng);
            }
        }
        let b = &self.inv_scale_chol * a;
        let b_inv = b
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| BsgError::NotPositiveDefinite("Bartlett factor".into()))?;
        let mut sigma = b_inv.tr_mul(&b_inv);
        symmetrize(&mut sigma);
        Ok(sigma)
    }

    /// Matrix-normal draw `B = B~ + U^-T E L'` with `U U' = X'X + C`,
    /// `L L' = Sigma`, so `cov(vec B) = Sigma (x) (X'X + C)^-1`.
    fn draw_beta(&self, sigma: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
        let k = self.post.beta_tilde.nrows();
        let d = self.post.dim();
        let sigma_l = Cholesky::new(sigma.clone())
            .ok_or_else(|| BsgError::NotPositiveDefinite("sampled sigma_a".into()))?
            .l();
        let e = DMatrix::from_fn(k, d, |_, _| StandardNormal.sample(rng));
        let row_scaled = self
            .precision_chol
            .l()
            .tr_solve_lower_triangular(&e)
            .ok_or_else(|| BsgError::NotPositiveDefinite("X'X + C".into()))?;
        Ok(&self.post.beta_tilde + row_scaled * sigma_l.transpose())
    }

    fn draw(&self, seed: u64, index: usize) -> Result<VarParams> {
        let mut rng = draw_rng(seed, index);
        let sigma = self.draw_sigma(&mut rng)?;
        let beta = self.draw_beta(&sigma, &mut rng)?;
        VarParams::from_beta(&beta, sigma)
    }
}

/// Independent substream for draw `index`.
pub(crate) fn draw_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws `m` joint samples; output depends only on `(post, m, seed)`.
pub fn sample_posterior(post: &NiwPosterior, m: usize, seed: u64) -> Result<PosteriorDraws> {
    if m < 2 {
        return Err(BsgError::InvalidInput(format!("need M >= 2 draws, got {m}")));
    }
    let sampler = NiwSampler::new(post)?;
    let draws = (0..m)
        .into_par_iter()
        .map(|i| {
            sampler.draw(seed, i).map_err(|e| BsgError::Draw {
                draw: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PosteriorDraws::new(draws, seed)
}

/// On-disk layout of [`PosteriorDraws`]: header then draw-major records,
/// matrices row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrawsFile {
    pub format: String,
    pub d: usize,
    pub p: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub draws: Vec<DrawRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrawRecord {
    pub phi0: Vec<f64>,
    pub phis: Vec<Vec<f64>>,
    pub sigma_a: Vec<f64>,
}

pub const DRAWS_FORMAT: &str = "bsg-draws/1";

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl DrawsFile {
    pub fn from_draws(
        draws: &PosteriorDraws,
        labels: Option<Vec<String>>,
        config: Option<serde_json::Value>,
    ) -> DrawsFile {
        DrawsFile {
            format: DRAWS_FORMAT.to_string(),
            d: draws.d,
            p: draws.p,
            m: draws.len(),
            seed: draws.seed,
            labels,
            config,
            draws: draws
                .draws
                .iter()
                .map(|v| DrawRecord {
                    phi0: v.phi0.as_slice().to_vec(),
                    phis: v.phis.iter().map(row_major).collect(),
                    sigma_a: row_major(&v.sigma_a),
                })
                .collect(),
        }
    }

    pub fn into_draws(self) -> Result<PosteriorDraws> {
        if self.format != DRAWS_FORMAT {
            return Err(BsgError::InvalidInput(format!("unknown draws format `{}`", self.format)));
        }
        if self.draws.len() != self.m {
            return Err(BsgError::Dimension(format!(
                "header says M = {}, file holds {} draws",
                self.m,
                self.draws.len()
            )));
        }
        let d = self.d;
        let mat = |v: &[f64], what: &str| -> Result<DMatrix<f64>> {
            if v.len() != d * d {
                return Err(BsgError::Dimension(format!("{what} has {} entries", v.len())));
            }
            Ok(DMatrix::from_row_slice(d, d, v))
        };
        let draws = self
            .draws
            .iter()
            .map(|r| {
                if r.phis.len() != self.p || r.phi0.len() != d {
                    return Err(BsgError::Dimension("draw record shape".into()));
                }
                let phis = r
                    .phis
                    .iter()
                    .map(|v| mat(v, "phi"))
                    .collect::<Result<Vec<_>>>()?;
                VarParams::new(DVector::from_column_slice(&r.phi0), phis, mat(&r.sigma_a, "sigma_a")?)
            })
            .collect::<Result<Vec<_>>>()?;
        PosteriorDraws::new(draws, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn design_by_hand() {
        let x = Mts::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 30.0]),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let design = build_design(&x, 1).unwrap();
        assert_eq!(design.z, DMatrix::from_row_slice(2, 2, &[2.0, 20.0, 3.0, 30.0]));
        assert_eq!(
            design.x,
            DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 10.0, 1.0, 2.0, 20.0])
        );
    }

    #[test]
    fn design_lag_order_newest_first() {
        let v = DMatrix::from_fn(5, 2, |i, j| (10 * i + j) as f64);
        let x = Mts::with_default_labels(v).unwrap();
        let design = build_design(&x, 2).unwrap();
        assert_eq!(design.z.shape(), (3, 2));
        assert_eq!(design.x.shape(), (3, 5));
        // first row: z_3 regressed on (1, z_2, z_1) in 1-based time
        assert_eq!(design.x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 10.0, 11.0, 0.0, 1.0]);
        assert_eq!(design.z.row(0).iter().copied().collect::<Vec<_>>(), vec![20.0, 21.0]);
    }

    #[test]
    fn design_errors_and_warnings() {
        let x = Mts::with_default_labels(DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 4.0, 5.0])).unwrap();
        assert!(build_design(&x, 3).is_err());
        assert!(build_design(&x, 0).is_err());
        assert_eq!(build_design(&x, 1).unwrap().constant_components, vec![1]);
    }

    #[test]
    fn beta_round_trip() {
        let phi1 = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let phi2 = DMatrix::from_row_slice(2, 2, &[-0.1, 0.0, 0.05, 0.0]);
        let params = VarParams::new(
            DVector::from_vec(vec![1.0, -1.0]),
            vec![phi1, phi2],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let beta = params.to_beta();
        assert_eq!(beta.shape(), (5, 2));
        // equation j: z_j = beta[:, j]' x, so beta[1 + k, j] = phi1[j, k]
        assert_eq!(beta[(2, 1)], 0.4);
        assert_eq!(beta[(2, 0)], 0.2);
        assert_eq!(beta[(3, 0)], -0.1);
        let back = VarParams::from_beta(&beta, DMatrix::identity(2, 2)).unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn var_params_reject_bad_sigma() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(VarParams::var1(DMatrix::zeros(2, 2), asym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(VarParams::var1(DMatrix::zeros(2, 2), indefinite).is_err());
    }

    #[test]
    fn strong_prior_dominates() {
        let v = DMatrix::from_fn(50, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let x = Mts::with_default_labels(v).unwrap();
        let design = build_design(&x, 1).unwrap();
        let mut prior = NiwPrior::default_for(2, 1);
        prior.c = DMatrix::identity(3, 3) * 1e8;
        let post = compute_posterior(&design.z, &design.x, &prior).unwrap();
        assert!(post.beta_tilde.amax() < 1e-4, "{}", post.beta_tilde);
    }

    #[test]
    fn empty_data_returns_prior() {
        let v = DMatrix::from_fn(40, 3, |i, j| ((i * 5 + j * 11) % 13) as f64);
        let x = Mts::with_default_labels(v).unwrap();
        let post = fit(&x, 1, None).unwrap();
        let prior = post.as_prior();
        let again = compute_posterior(&DMatrix::zeros(0, 3), &DMatrix::zeros(0, 4), &prior).unwrap();
        assert_relative_eq!(again.beta_tilde, post.beta_tilde, epsilon = 1e-9, max_relative = 1e-9);
        assert_relative_eq!(again.v_post, post.v_post, max_relative = 1e-12);
        assert_relative_eq!(again.precision, post.precision, max_relative = 1e-12);
        assert_eq!(again.n_post, post.n_post);
        assert_eq!(again.n_effective, 0);
    }

    #[test]
    fn singular_precision_is_reported() {
        let mut prior = NiwPrior::default_for(2, 1);
        prior.c = DMatrix::identity(3, 3) * 1e-30;
        // constant regressors make X'X rank one
        let x = DMatrix::from_element(10, 3, 1.0);
        let z = DMatrix::from_element(10, 2, 1.0);
        match compute_posterior(&z, &x, &prior) {
            Err(BsgError::SingularPrecision { condition }) => assert!(condition > MAX_CONDITION),
            other => panic!("expected singular precision, got {other:?}"),
        }
    }

    #[test]
    fn sampling_is_deterministic_and_spd() {
        let v = DMatrix::from_fn(60, 2, |i, j| ((i * 3 + j * 7) % 10) as f64 * 0.1);
        let x = Mts::with_default_labels(v).unwrap();
        let post = fit(&x, 1, None).unwrap();
        let a = sample_posterior(&post, 20, 42).unwrap();
        let b = sample_posterior(&post, 20, 42).unwrap();
        assert_eq!(a.draws, b.draws);
        let c = sample_posterior(&post, 20, 43).unwrap();
        assert_ne!(a.draws, c.draws);
        for draw in &a.draws {
            check_spd(&draw.sigma_a, "draw").unwrap();
        }
        assert!(sample_posterior(&post, 1, 42).is_err());
    }

    #[test]
    fn low_degrees_of_freedom_rejected() {
        let v = DMatrix::from_fn(10, 3, |i, j| ((i * 3 + j * 5) % 7) as f64);
        let x = Mts::with_default_labels(v).unwrap();
        let mut post = fit(&x, 1, None).unwrap();
        post.n_post = 4.0;
        assert!(matches!(
            sample_posterior(&post, 5, 1),
            Err(BsgError::DegreesOfFreedom { .. })
        ));
    }

    #[test]
    fn draws_file_round_trip() {
        let v = DMatrix::from_fn(30, 2, |i, j| ((i * 3 + j * 7) % 10) as f64 * 0.1);
        let x = Mts::with_default_labels(v).unwrap();
        let post = fit(&x, 2, None).unwrap();
        let draws = sample_posterior(&post, 4, 9).unwrap();
        let file = DrawsFile::from_draws(&draws, Some(x.labels().to_vec()), None);
        let text = serde_json::to_string(&file).unwrap();
        let back: DrawsFile = serde_json::from_str(&text).unwrap();
        let restored = back.into_draws().unwrap();
        assert_eq!(restored.draws, draws.draws);
        assert_eq!((restored.d, restored.p, restored.seed), (2, 2, 9));
    }
}
