use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dynamics, ErrorSpec, GroundTruth, NodeRole};
use crate::error::{BsgError, Result};
use crate::mts::{default_labels, eigen_moduli, spectral_radius};

/// Spectral radius cyclic networks are scaled back to.
pub const CYCLIC_RADIUS: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Acyclic: strictly lower triangular under a topological order.
    Dag,
    /// Cycles among intermediaries plus a common autocorrelation on the
    /// diagonal.
    Cyclic,
    /// Edges only from the source set into the sink set.
    Bipartite,
}

impl std::str::FromStr for Topology {
    type Err = BsgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dag" => Ok(Topology::Dag),
            "cyclic" => Ok(Topology::Cyclic),
            "bipartite" => Ok(Topology::Bipartite),
            other => Err(BsgError::InvalidInput(format!("unknown topology `{other}`"))),
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Topology::Dag => "dag",
            Topology::Cyclic => "cyclic",
            Topology::Bipartite => "bipartite",
        })
    }
}

/// Parameters of a random ground-truth network.
///
/// Edge placement: each intermediary draws `in_edges` parents among the
/// sources and `out_edges` children among the sinks; every source is topped
/// up to `out_edges` intermediary children and every sink to `in_edges`
/// intermediary parents. Cyclic networks add one parent per intermediary
/// from the other intermediaries.
/// Edge weights are Unif(0, 1). Node labels are shuffled so column position
/// carries no information about roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub topology: Topology,
    pub d: usize,
    pub n_source: usize,
    pub n_sink: usize,
    /// Diagonal of `phi1` for cyclic networks.
    pub autocorr: f64,
    pub in_edges: usize,
    pub out_edges: usize,
    pub error: ErrorSpec,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(topology: Topology, d: usize, n_source: usize, n_sink: usize, seed: u64) -> Self {
        NetworkSpec {
            topology,
            d,
            n_source,
            n_sink,
            autocorr: 0.5,
            in_edges: 2,
            out_edges: 3,
            error: ErrorSpec::default(),
            seed,
        }
    }

    /// d = 20 with 5 sources and 5 sinks (10 each for bipartite).
    pub fn benchmark(topology: Topology, seed: u64) -> Self {
        match topology {
            Topology::Bipartite => NetworkSpec::new(topology, 20, 10, 10, seed),
            _ => NetworkSpec::new(topology, 20, 5, 5, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(BsgError::Infeasible(format!("d = {} is below 2", self.d)));
        }
        if self.n_source == 0 || self.n_sink == 0 {
            return Err(BsgError::Infeasible("need at least one source and one sink".into()));
        }
        if self.n_source + self.n_sink > self.d {
            return Err(BsgError::Infeasible(format!(
                "{} sources + {} sinks exceed d = {}",
                self.n_source, self.n_sink, self.d
            )));
        }
        if self.in_edges == 0 || self.out_edges == 0 {
            return Err(BsgError::Infeasible("edge densities must be positive".into()));
        }
        if self.topology == Topology::Cyclic && self.d - self.n_source - self.n_sink < 2 {
            return Err(BsgError::Infeasible(
                "a cyclic network needs at least 2 intermediaries".into(),
            ));
        }
        self.error.covariance(self.d).map(|_| ())
    }
}

/// Random subset of `pool` of size `min(k, |pool|)`.
fn choose(rng: &mut ChaCha8Rng, pool: &[usize], k: usize) -> Vec<usize> {
    pool.choose_multiple(rng, k.min(pool.len())).copied().collect()
}

/// Edge set `(source, target)` over topological positions.
struct Layout {
    sources: Vec<usize>,
    inter: Vec<usize>,
    sinks: Vec<usize>,
    edges: BTreeSet<(usize, usize)>,
}

impl Layout {
    fn new(spec: &NetworkSpec) -> Self {
        let n_inter = spec.d - spec.n_source - spec.n_sink;
        let sources: Vec<usize> = (0..spec.n_source).collect();
        let inter: Vec<usize> = (spec.n_source..spec.n_source + n_inter).collect();
        let sinks: Vec<usize> = (spec.n_source + n_inter..spec.d).collect();
        Layout {
            sources,
            inter,
            sinks,
            edges: BTreeSet::new(),
        }
    }

    fn out_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|(s, _)| *s == v).count()
    }

    fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|(_, t)| *t == v).count()
    }

    /// Tops sources up to `out` children and sinks up to `inn` parents.
    fn fill_ends(&mut self, rng: &mut ChaCha8Rng, out: usize, inn: usize, children: &[usize], parents: &[usize]) {
        for s in self.sources.clone() {
            let have = self.out_degree(s);
            if have < out {
                let pool: Vec<usize> = children
                    .iter()
                    .copied()
                    .filter(|&c| !self.edges.contains(&(s, c)))
                    .collect();
                for c in choose(rng, &pool, out - have) {
                    self.edges.insert((s, c));
                }
            }
        }
        for t in self.sinks.clone() {
            let have = self.in_degree(t);
            if have < inn {
                let pool: Vec<usize> = parents
                    .iter()
                    .copied()
                    .filter(|&p| !self.edges.contains(&(p, t)))
                    .collect();
                for p in choose(rng, &pool, inn - have) {
                    self.edges.insert((p, t));
                }
            }
        }
    }
}

fn dag_layout(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Layout {
    let mut lay = Layout::new(spec);
    let inter = lay.inter.clone();
    let sources = lay.sources.clone();
    let sinks = lay.sinks.clone();
    for &v in &inter {
        for p in choose(rng, &sources, spec.in_edges) {
            lay.edges.insert((p, v));
        }
        for c in choose(rng, &sinks, spec.out_edges) {
            lay.edges.insert((v, c));
        }
    }
    lay.fill_ends(rng, spec.out_edges, spec.in_edges, &inter, &inter);
    lay
}

fn cyclic_layout(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Layout {
    let mut lay = dag_layout(spec, rng);
    let inter = lay.inter.clone();
    for &v in &inter {
        let others: Vec<usize> = inter.iter().copied().filter(|&u| u != v).collect();
        for p in choose(rng, &others, 1) {
            lay.edges.insert((p, v));
        }
    }
    if !has_cycle(&lay.edges, spec.d) {
        // close a loop between two intermediaries
        let pair = choose(rng, &inter, 2);
        lay.edges.insert((pair[0], pair[1]));
        lay.edges.insert((pair[1], pair[0]));
    }
    lay
}

fn bipartite_layout(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Layout {
    let mut lay = Layout::new(spec);
    let sinks = lay.sinks.clone();
    let sources = lay.sources.clone();
    lay.fill_ends(rng, spec.out_edges, spec.in_edges, &sinks, &sources);
    lay
}

fn has_cycle(edges: &BTreeSet<(usize, usize)>, d: usize) -> bool {
    let mut adj = DMatrix::zeros(d, d);
    for &(s, t) in edges {
        adj[(t, s)] = 1.0;
    }
    eigen_moduli(&adj).first().copied().unwrap_or(0.0) > 0.5
}

/// Draws a network and its shock covariance from `spec`.
pub fn generate_network(spec: &NetworkSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lay = match spec.topology {
        Topology::Dag => dag_layout(spec, &mut rng),
        Topology::Cyclic => cyclic_layout(spec, &mut rng),
        Topology::Bipartite => bipartite_layout(spec, &mut rng),
    };
    let d = spec.d;
    // position -> column
    let mut column: Vec<usize> = (0..d).collect();
    column.shuffle(&mut rng);

    let mut phi1 = DMatrix::zeros(d, d);
    for &(s, t) in &lay.edges {
        phi1[(column[t], column[s])] = rng.random::<f64>();
    }
    if spec.topology == Topology::Cyclic {
        for i in 0..d {
            phi1[(i, i)] = spec.autocorr;
        }
        let radius = spectral_radius(&phi1);
        if radius > CYCLIC_RADIUS {
            phi1 *= CYCLIC_RADIUS / radius;
        }
    }
    let mut roles = vec![NodeRole::Intermediary; d];
    for &s in &lay.sources {
        roles[column[s]] = NodeRole::Source;
    }
    for &s in &lay.sinks {
        roles[column[s]] = NodeRole::Sink;
    }
    let truth = GroundTruth {
        labels: default_labels(d),
        roles,
        dynamics: Dynamics::Var1 {
            phi0: vec![0.0; d],
            phi1,
            sigma_a: spec.error.covariance(d)?,
        },
    };
    let radius = spectral_radius(truth.phi1().expect("linear truth"));
    if radius >= 1.0 {
        return Err(BsgError::NonStationary { max_modulus: radius });
    }
    Ok(truth)
}
