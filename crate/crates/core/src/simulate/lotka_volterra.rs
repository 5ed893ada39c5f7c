use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dynamics, GroundTruth, NodeRole};
use crate::error::{BsgError, Result};
use crate::mts::Mts;

/// Interaction strengths: prey growth, predation, predator death, conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LvParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LvParams {
    fn default() -> Self {
        LvParams {
            alpha: 1.2,
            beta: 0.2,
            gamma: 1.1,
            delta: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LvConfig {
    /// Total species count; half predators, half prey.
    pub d: usize,
    pub params: LvParams,
    /// Number of sampled observations.
    pub t: usize,
    /// RK4 step.
    pub dt: f64,
    /// Integration steps between samples.
    pub sample_every: usize,
    /// Additive Gaussian observation noise.
    pub noise_sd: f64,
    pub seed: u64,
}

impl LvConfig {
    pub fn new(d: usize, t: usize, seed: u64) -> Self {
        LvConfig {
            d,
            params: LvParams::default(),
            t,
            dt: 0.01,
            sample_every: 10,
            noise_sd: 0.0,
            seed,
        }
    }
}

/// Above this population the integration is considered to have diverged.
const BLOW_UP: f64 = 1e12;

struct System {
    params: LvParams,
    n: usize,
    hunts: Vec<(usize, usize)>,
}

impl System {
    /// State layout: predators `0..n`, prey `n..2n`.
    fn rhs(&self, s: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let p = self.params;
        let mut pressure = vec![0.0; n];
        let mut food = vec![0.0; n];
        for &(pred, prey) in &self.hunts {
            pressure[prey] += s[pred];
            food[pred] += s[n + prey];
        }
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                s[i] * (p.delta * food[i] - p.gamma)
            } else {
                let j = i - n;
                s[i] * (p.alpha - p.beta * pressure[j])
            }
        })
    }

    fn rk4(&self, s: &DVector<f64>, dt: f64) -> DVector<f64> {
        let k1 = self.rhs(s);
        let k2 = self.rhs(&(s + &k1 * (dt / 2.0)));
        let k3 = self.rhs(&(s + &k2 * (dt / 2.0)));
        let k4 = self.rhs(&(s + &k3 * dt));
        s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    }
}

/// Predator `j` hunts prey `j` and `j + 1` (mod n); a single pair hunts once.
fn hunting_pattern(n: usize) -> Vec<(usize, usize)> {
    if n == 1 {
        return vec![(0, 0)];
    }
    (0..n).flat_map(|j| [(j, j), (j, (j + 1) % n)]).collect()
}

/// Integrates the multispecies predator-prey system from random initial
/// populations around the coexistence equilibrium and samples it.
pub fn simulate_lotka_volterra(cfg: &LvConfig) -> Result<(Mts, GroundTruth)> {
    if cfg.d < 2 || cfg.d % 2 != 0 {
        return Err(BsgError::InvalidInput(format!(
            "species count d = {} must be even and at least 2",
            cfg.d
        )));
    }
    let p = cfg.params;
    if !(p.alpha > 0.0 && p.gamma > 0.0 && p.beta >= 0.0 && p.delta >= 0.0) {
        return Err(BsgError::InvalidInput("Lotka-Volterra rates must be positive".into()));
    }
    if !(cfg.dt > 0.0) || cfg.sample_every == 0 || cfg.t < 2 || cfg.noise_sd < 0.0 {
        return Err(BsgError::InvalidInput("invalid integration settings".into()));
    }
    let n = cfg.d / 2;
    let hunts = hunting_pattern(n);
    let links = if n == 1 { 1.0 } else { 2.0 };
    let system = System { params: p, n, hunts };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // coexistence point: every prey sees alpha / beta predators in total,
    // every predator gamma / delta prey
    let pred_eq = if p.beta > 0.0 { p.alpha / (p.beta * links) } else { 1.0 };
    let prey_eq = if p.delta > 0.0 { p.gamma / (p.delta * links) } else { 1.0 };
    let mut state = DVector::from_fn(2 * n, |i, _| {
        let eq = if i < n { pred_eq } else { prey_eq };
        eq * rng.random_range(0.5..1.5)
    });
    let noise = Normal::new(0.0, cfg.noise_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| BsgError::InvalidInput(e.to_string()))?;

    let mut out = DMatrix::zeros(cfg.t, cfg.d);
    let mut step = 0usize;
    for row in 0..cfg.t {
        if row > 0 {
            for _ in 0..cfg.sample_every {
                state = system.rk4(&state, cfg.dt);
                step += 1;
                if state.iter().any(|v| !v.is_finite() || *v > BLOW_UP) {
                    return Err(BsgError::BlowUp { step });
                }
            }
        }
        for j in 0..cfg.d {
            let eps = if cfg.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            out[(row, j)] = state[j] + eps;
        }
    }

    let labels: Vec<String> = (1..=n)
        .map(|i| format!("predator{i}"))
        .chain((1..=n).map(|i| format!("prey{i}")))
        .collect();
    let roles = (0..cfg.d)
        .map(|i| if i < n { NodeRole::Source } else { NodeRole::Sink })
        .collect();
    let truth = GroundTruth {
        labels: labels.clone(),
        roles,
        dynamics: Dynamics::LotkaVolterra {
            params: p,
            hunts: system.hunts.iter().map(|&(pr, py)| (pr, n + py)).collect(),
        },
    };
    Ok((Mts::new(out, labels)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Conserved quantity of the two-species system (predator y, prey x).
    fn invariant(p: &LvParams, x: f64, y: f64) -> f64 {
        p.delta * x - p.gamma * x.ln() + p.beta * y - p.alpha * y.ln()
    }

    #[test]
    fn two_species_conserves_invariant() {
        let cfg = LvConfig::new(2, 2000, 1);
        let (x, truth) = simulate_lotka_volterra(&cfg).unwrap();
        let v = x.values();
        let start = invariant(&cfg.params, v[(0, 1)], v[(0, 0)]);
        // one cycle is roughly 2 pi / sqrt(alpha gamma) ~ 5.5 time units
        let max_drift = v
            .row_iter()
            .map(|r| (invariant(&cfg.params, r[1], r[0]) - start).abs() / start.abs())
            .fold(0.0, f64::max);
        assert!(max_drift < 1e-4, "drift {max_drift}");
        assert_eq!(truth.roles, vec![NodeRole::Source, NodeRole::Sink]);
    }

    #[test]
    fn multispecies_stays_positive() {
        let (x, truth) = simulate_lotka_volterra(&LvConfig::new(20, 1000, 3)).unwrap();
        assert!(x.values().iter().all(|v| *v > 0.0));
        assert_eq!(x.values().shape(), (1000, 20));
        match truth.dynamics {
            Dynamics::LotkaVolterra { hunts, .. } => {
                for pred in 0..10 {
                    assert_eq!(hunts.iter().filter(|h| h.0 == pred).count(), 2);
                }
                for prey in 10..20 {
                    assert_eq!(hunts.iter().filter(|h| h.1 == prey).count(), 2);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn decoupled_species_grow_and_decay() {
        let mut cfg = LvConfig::new(4, 11, 2);
        cfg.params.beta = 0.0;
        cfg.params.delta = 0.0;
        let (x, _) = simulate_lotka_volterra(&cfg).unwrap();
        let v = x.values();
        let horizon = 10.0 * cfg.dt * cfg.sample_every as f64;
        for j in 0..2 {
            let ratio = v[(10, j)] / v[(0, j)];
            assert!((ratio - (-cfg.params.gamma * horizon).exp()).abs() < 1e-9);
        }
        for j in 2..4 {
            let ratio = v[(10, j)] / v[(0, j)];
            assert!((ratio - (cfg.params.alpha * horizon).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_odd_species_and_reports_blow_up() {
        assert!(simulate_lotka_volterra(&LvConfig::new(3, 10, 1)).is_err());
        let mut cfg = LvConfig::new(2, 200, 1);
        cfg.params.beta = 0.0;
        cfg.params.alpha = 50.0;
        assert!(matches!(simulate_lotka_volterra(&cfg), Err(BsgError::BlowUp { .. })));
    }
}
