//! Ground-truth generators: structured VAR(1) networks, the five-node chain
//! scenario, and a multispecies Lotka-Volterra system.

mod lotka_volterra;
mod network;

pub use lotka_volterra::{simulate_lotka_volterra, LvConfig, LvParams};
pub use network::{generate_network, NetworkSpec, Topology};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{BsgError, Result};
use crate::mts::{check_stationarity, Mts};
use crate::posterior::VarParams;

pub const DEFAULT_BURN_IN: usize = 200;

/// Role of a node in a simulated network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Source,
    Intermediary,
    Sink,
}

/// Which end of the network a ranking should surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Source,
    Sink,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Source, Task::Sink];

    /// Graded relevance: the targeted role scores 1, intermediaries 0.5,
    /// the opposite role 0.
    pub fn grade(self, role: NodeRole) -> f64 {
        match (self, role) {
            (_, NodeRole::Intermediary) => 0.5,
            (Task::Source, NodeRole::Source) | (Task::Sink, NodeRole::Sink) => 1.0,
            _ => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Source => "source",
            Task::Sink => "sink",
        }
    }
}

/// Equicorrelated Gaussian shocks: `sigma_diag` on the diagonal, `rho *
/// sigma_diag` off it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpec {
    pub sigma_diag: f64,
    pub rho: f64,
}

impl Default for ErrorSpec {
    fn default() -> Self {
        ErrorSpec {
            sigma_diag: 1.0,
            rho: 0.0,
        }
    }
}

impl ErrorSpec {
    pub fn covariance(&self, d: usize) -> Result<DMatrix<f64>> {
        if !(self.sigma_diag > 0.0) {
            return Err(BsgError::InvalidInput(format!(
                "error variance {} must be positive",
                self.sigma_diag
            )));
        }
        if d >= 2 && !(self.rho > -1.0 / (d as f64 - 1.0) && self.rho < 1.0) {
            return Err(BsgError::Infeasible(format!(
                "equicorrelation {} is not positive definite for d = {d}",
                self.rho
            )));
        }
        Ok(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                self.sigma_diag
            } else {
                self.rho * self.sigma_diag
            }
        }))
    }
}

/// How a ground truth evolves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dynamics {
    Var1 {
        phi0: Vec<f64>,
        #[serde(with = "crate::matrix_serde")]
        phi1: DMatrix<f64>,
        #[serde(with = "crate::matrix_serde")]
        sigma_a: DMatrix<f64>,
    },
    LotkaVolterra {
        params: LvParams,
        /// `(predator, prey)` column pairs.
        hunts: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: Vec<String>,
    pub roles: Vec<NodeRole>,
    pub dynamics: Dynamics,
}

impl GroundTruth {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn relevance(&self, task: Task) -> Vec<f64> {
        self.roles.iter().map(|&r| task.grade(r)).collect()
    }

    pub fn labels_with_role(&self, role: NodeRole) -> Vec<&str> {
        self.labels
            .iter()
            .zip(&self.roles)
            .filter(|(_, &r)| r == role)
            .map(|(l, _)| l.as_str())
            .collect()
    }

    /// Linear dynamics as a parameter point; `None` for nonlinear truths.
    pub fn var_params(&self) -> Option<VarParams> {
        match &self.dynamics {
            Dynamics::Var1 { phi0, phi1, sigma_a } => VarParams::new(
                DVector::from_column_slice(phi0),
                vec![phi1.clone()],
                sigma_a.clone(),
            )
            .ok(),
            Dynamics::LotkaVolterra { .. } => None,
        }
    }

    pub fn phi1(&self) -> Option<&DMatrix<f64>> {
        match &self.dynamics {
            Dynamics::Var1 { phi1, .. } => Some(phi1),
            Dynamics::LotkaVolterra { .. } => None,
        }
    }
}

/// Decorrelated child seed for replicate or component `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1 << 32));
    rng.next_u64()
}

/// Forward simulation of a VAR(p) with Gaussian shocks, started at zero;
/// the first `burn_in` steps are discarded.
pub fn simulate_params(
    params: &VarParams,
    labels: Vec<String>,
    t: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Mts> {
    let report = check_stationarity(&params.phis)?;
    if !report.is_stationary {
        return Err(BsgError::NonStationary {
            max_modulus: report.max_modulus,
        });
    }
    let d = params.dim();
    let p = params.order();
    let chol = Cholesky::new(params.sigma_a.clone())
        .ok_or_else(|| BsgError::NotPositiveDefinite("sigma_a".into()))?
        .l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = burn_in + t;
    let mut history: Vec<DVector<f64>> = vec![DVector::zeros(d); p];
    let mut out = DMatrix::zeros(t, d);
    for step in 0..total {
        let eps = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let mut z = &params.phi0 + &chol * eps;
        for (lag, phi) in params.phis.iter().enumerate() {
            z += phi * &history[lag];
        }
        if step >= burn_in {
            out.row_mut(step - burn_in).copy_from(&z.transpose());
        }
        history.rotate_right(1);
        history[0] = z;
    }
    Mts::new(out, labels)
}

/// Simulates `t` observations from a linear ground truth.
pub fn simulate_var(truth: &GroundTruth, t: usize, burn_in: usize, seed: u64) -> Result<Mts> {
    let params = truth.var_params().ok_or_else(|| {
        BsgError::InvalidInput("ground truth has no linear dynamics to simulate".into())
    })?;
    simulate_params(&params, truth.labels.clone(), t, burn_in, seed)
}

/// Five-node VAR(1) in which node 3 reaches node 5 only through node 4.
///
/// Edges (source -> target, weight): 1->2 0.5, 1->3 0.2, 2->3 0.2,
/// 3->3 0.9, 3->4 1.5, 4->5 0.9; unit independent shocks. The persistent
/// node 3 makes the indirect 3->5 spillover zero at h = 1, dominant by
/// h = 4 and flat from h = 17 on, while the direct 4->5 share peaks at
/// h = 2 and then declines. Eigenvalues are the diagonal (0.9 and zeros).
pub fn chain_scenario() -> GroundTruth {
    const EDGES: [(usize, usize, f64); 6] = [
        (1, 2, 0.5),
        (1, 3, 0.2),
        (2, 3, 0.2),
        (3, 3, 0.9),
        (3, 4, 1.5),
        (4, 5, 0.9),
    ];
    let mut phi1 = DMatrix::zeros(5, 5);
    for (src, tgt, w) in EDGES {
        phi1[(tgt - 1, src - 1)] = w;
    }
    GroundTruth {
        labels: (1..=5).map(|i| format!("n{i}")).collect(),
        roles: vec![
            NodeRole::Source,
            NodeRole::Intermediary,
            NodeRole::Intermediary,
            NodeRole::Intermediary,
            NodeRole::Sink,
        ],
        dynamics: Dynamics::Var1 {
            phi0: vec![0.0; 5],
            phi1,
            sigma_a: DMatrix::identity(5, 5),
        },
    }
}
