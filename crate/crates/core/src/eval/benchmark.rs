//! Node-ranking benchmark: BSG influence/vulnerability against VAR
//! centrality baselines over simulated networks.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::centrality::{centralities, CentralityKind};
use super::ndcg::ndcg;
use super::ngc::fit_ngc;
use crate::error::{BsgError, Result};
use crate::graph::{build_graphs, network_measures, DEFAULT_HPDI_MASS};
use crate::mts::{format_float, Mts};
use crate::posterior::{fit, sample_posterior};
use crate::simulate::{
    derive_seed, generate_network, simulate_lotka_volterra, simulate_var, GroundTruth, LvConfig,
    NetworkSpec, Task, DEFAULT_BURN_IN,
};

/// Where a benchmark column's data comes from. The seed inside the spec is
/// replaced per replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    Network(NetworkSpec),
    LotkaVolterra(LvConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub scenarios: Vec<Scenario>,
    /// Observations per replicate.
    pub t: usize,
    pub burn_in: usize,
    pub replicates: usize,
    pub horizons: Vec<usize>,
    /// Posterior draws per BSG fit.
    pub m: usize,
    /// VAR lag order for both BSG and the baseline.
    pub p: usize,
    pub fdr_q: f64,
    pub seed: u64,
    /// NDCG cutoff; `None` ranks all nodes.
    pub cutoff: Option<usize>,
    pub zscore: bool,
}

impl BenchmarkConfig {
    pub fn new(scenarios: Vec<Scenario>, seed: u64) -> Self {
        BenchmarkConfig {
            scenarios,
            t: 500,
            burn_in: DEFAULT_BURN_IN,
            replicates: 5,
            horizons: vec![1, 5, 10],
            m: 200,
            p: 1,
            fdr_q: 0.05,
            seed,
            cutoff: None,
            zscore: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(BsgError::InvalidInput("no scenarios to benchmark".into()));
        }
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(BsgError::InvalidInput("scenario names must be distinct".into()));
        }
        if self.replicates == 0 || self.m < 2 || self.p == 0 {
            return Err(BsgError::InvalidInput(
                "need at least 1 replicate, 2 draws and lag order 1".into(),
            ));
        }
        if self.horizons.iter().any(|&h| h == 0) {
            return Err(BsgError::InvalidInput("horizons must be at least 1".into()));
        }
        if !(self.fdr_q > 0.0 && self.fdr_q < 1.0) {
            return Err(BsgError::InvalidInput(format!("FDR level {} outside (0, 1)", self.fdr_q)));
        }
        for s in &self.scenarios {
            if let ScenarioKind::Network(spec) = &s.kind {
                spec.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Bsg { h: usize },
    Var(CentralityKind),
    External(String),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Bsg { h } => format!("BSG, h={h}"),
            Method::Var(kind) => format!("VAR-{}", kind.name()),
            Method::External(name) => name.clone(),
        }
    }
}

/// One method's NDCG on one replicate and task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub scenario: String,
    pub replicate: usize,
    pub method: String,
    pub task: Task,
    pub ndcg: Option<f64>,
    /// The baseline graph had no cross edges.
    pub degenerate: bool,
    /// Every node received the same score.
    pub indistinguishable: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Marker {
    /// "---": degenerate baseline graph in most replicates.
    Degenerate,
    /// "†": scores tie across all nodes in most replicates.
    Indistinguishable,
}

impl Marker {
    pub fn symbol(self) -> &'static str {
        match self {
            Marker::Degenerate => "---",
            Marker::Indistinguishable => "\u{2020}",
        }
    }
}

/// Summary of one (method, scenario, task) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single replicate.
    pub sd: f64,
    /// Replicates with a score.
    pub n: usize,
    pub degenerate_count: usize,
    pub marker: Option<Marker>,
}

impl Cell {
    fn from_records(records: &[&ReplicateRecord]) -> Cell {
        let total = records.len();
        let scores: Vec<f64> = records.iter().filter_map(|r| r.ndcg).collect();
        let degenerate_count = records.iter().filter(|r| r.degenerate).count();
        let tied = records.iter().filter(|r| r.indistinguishable).count();
        let marker = if 2 * degenerate_count > total {
            Some(Marker::Degenerate)
        } else if 2 * tied > total {
            Some(Marker::Indistinguishable)
        } else {
            None
        };
        let n = scores.len();
        let mean = if n == 0 { f64::NAN } else { scores.iter().sum::<f64>() / n as f64 };
        let sd = if n < 2 {
            0.0
        } else {
            (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Cell {
            mean,
            sd,
            n,
            degenerate_count,
            marker,
        }
    }

    /// `"0.966 ± 0.041"`, the marker, or `"NA"` without scores.
    pub fn display(&self) -> String {
        match self.marker {
            Some(m) => m.symbol().to_string(),
            None if self.n == 0 => "NA".to_string(),
            None => format!("{:.3} \u{b1} {:.3}", self.mean, self.sd),
        }
    }
}

/// Scores supplied from outside, keyed by (method, scenario, replicate).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalScores {
    methods: Vec<String>,
    scores: BTreeMap<(String, String, usize), HashMap<String, f64>>,
}

#[derive(Debug, Deserialize)]
struct ExternalRow {
    method: String,
    network: String,
    replicate: usize,
    node_label: String,
    score: f64,
}

impl ExternalScores {
    /// CSV with header `method,network,replicate,node_label,score`.
    pub fn read_csv<R: Read>(reader: R) -> Result<ExternalScores> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut out = ExternalScores::default();
        for row in rdr.deserialize() {
            let row: ExternalRow = row?;
            if !row.score.is_finite() {
                return Err(BsgError::InvalidInput(format!(
                    "non-finite external score for {}",
                    row.node_label
                )));
            }
            if !out.methods.contains(&row.method) {
                out.methods.push(row.method.clone());
            }
            let slot = out
                .scores
                .entry((row.method, row.network, row.replicate))
                .or_default();
            if slot.insert(row.node_label.clone(), row.score).is_some() {
                return Err(BsgError::InvalidInput(format!(
                    "duplicate external score for {}",
                    row.node_label
                )));
            }
        }
        Ok(out)
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    fn lookup(&self, method: &str, scenario: &str, replicate: usize, labels: &[String]) -> Result<Vec<f64>> {
        let key = (method.to_string(), scenario.to_string(), replicate);
        let table = self.scores.get(&key).ok_or_else(|| {
            BsgError::InvalidInput(format!(
                "no external scores for {method} on {scenario} replicate {replicate}"
            ))
        })?;
        labels
            .iter()
            .map(|l| {
                table
                    .get(l)
                    .copied()
                    .ok_or_else(|| BsgError::InvalidInput(format!("external scores miss node {l}")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkResults {
    pub config: BenchmarkConfig,
    pub methods: Vec<String>,
    /// Sorted by scenario, replicate, method, task.
    pub records: Vec<ReplicateRecord>,
}

impl BenchmarkResults {
    pub fn cell(&self, method: &str, scenario: &str, task: Task) -> Cell {
        let rs: Vec<&ReplicateRecord> = self
            .records
            .iter()
            .filter(|r| r.method == method && r.scenario == scenario && r.task == task)
            .collect();
        Cell::from_records(&rs)
    }

    /// One row per method, source and sink columns per scenario.
    pub fn write_table<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut csv = csv::Writer::from_writer(&mut w);
        let mut header = vec!["method".to_string()];
        for s in &self.config.scenarios {
            for task in Task::ALL {
                header.push(format!("{} {}", s.name, task.name()));
            }
        }
        csv.write_record(&header)?;
        for method in &self.methods {
            let mut row = vec![method.clone()];
            for s in &self.config.scenarios {
                for task in Task::ALL {
                    row.push(self.cell(method, &s.name, task).display());
                }
            }
            csv.write_record(&row)?;
        }
        csv.flush()?;
        drop(csv);
        writeln!(w, "# --- baseline graph degenerate (no cross edges) in most replicates")?;
        writeln!(w, "# \u{2020} scores identical across nodes in most replicates")?;
        Ok(())
    }

    pub fn write_records<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut csv = csv::Writer::from_writer(&mut w);
        csv.write_record([
            "scenario",
            "replicate",
            "method",
            "task",
            "ndcg",
            "degenerate",
            "indistinguishable",
            "error",
        ])?;
        for r in &self.records {
            csv.write_record([
                r.scenario.clone(),
                r.replicate.to_string(),
                r.method.clone(),
                r.task.name().to_string(),
                r.ndcg.map(format_float).unwrap_or_default(),
                r.degenerate.to_string(),
                r.indistinguishable.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Generated data and truth for one replicate.
pub fn replicate_data(
    scenario: &Scenario,
    t: usize,
    burn_in: usize,
    seed: u64,
) -> Result<(Mts, GroundTruth)> {
    match &scenario.kind {
        ScenarioKind::Network(spec) => {
            let mut spec = spec.clone();
            spec.seed = derive_seed(seed, 0);
            let truth = generate_network(&spec)?;
            let x = simulate_var(&truth, t, burn_in, derive_seed(seed, 1))?;
            Ok((x, truth))
        }
        ScenarioKind::LotkaVolterra(cfg) => {
            let mut cfg = cfg.clone();
            cfg.t = t;
            cfg.seed = derive_seed(seed, 0);
            simulate_lotka_volterra(&cfg)
        }
    }
}

fn all_equal(scores: &[f64]) -> bool {
    scores.windows(2).all(|w| w[0] == w[1])
}

struct Job<'a> {
    scenario: &'a Scenario,
    replicate: usize,
    seed: u64,
}

fn score_record(
    job: &Job<'_>,
    method: &str,
    task: Task,
    relevance: &[f64],
    cutoff: usize,
    scores: Result<Vec<f64>>,
    degenerate: bool,
) -> ReplicateRecord {
    let (ndcg, indistinguishable, error) = match scores.and_then(|s| {
        let v = ndcg(&s, relevance, cutoff)?;
        Ok((v, all_equal(&s)))
    }) {
        Ok((v, tied)) => (Some(v), tied, None),
        Err(e) => (None, false, Some(e.to_string())),
    };
    ReplicateRecord {
        scenario: job.scenario.name.clone(),
        replicate: job.replicate,
        method: method.to_string(),
        task,
        ndcg,
        degenerate,
        indistinguishable,
        error,
    }
}

fn run_job(cfg: &BenchmarkConfig, methods: &[Method], external: &ExternalScores, job: &Job<'_>) -> Vec<ReplicateRecord> {
    let data = replicate_data(job.scenario, cfg.t, cfg.burn_in, job.seed)
        .map(|(x, truth)| (if cfg.zscore { x.zscore() } else { x }, truth));
    let (x, truth) = match data {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            log::warn!("{} replicate {}: {msg}", job.scenario.name, job.replicate);
            return methods
                .iter()
                .flat_map(|m| {
                    Task::ALL.map(|task| ReplicateRecord {
                        scenario: job.scenario.name.clone(),
                        replicate: job.replicate,
                        method: m.name(),
                        task,
                        ndcg: None,
                        degenerate: false,
                        indistinguishable: false,
                        error: Some(msg.clone()),
                    })
                })
                .collect();
        }
    };
    let labels = x.labels().to_vec();
    let cutoff = cfg.cutoff.unwrap_or(x.dim()).min(x.dim());

    // BSG: one posterior, one sweep over horizons
    let mut bsg_h: Vec<usize> = methods
        .iter()
        .filter_map(|m| match m {
            Method::Bsg { h } => Some(*h),
            _ => None,
        })
        .collect();
    bsg_h.sort_unstable();
    bsg_h.dedup();
    let bsg = if bsg_h.is_empty() {
        Ok(Vec::new())
    } else {
        fit(&x, cfg.p, None)
            .and_then(|post| sample_posterior(&post, cfg.m, derive_seed(job.seed, 2)))
            .and_then(|draws| build_graphs(&draws, &bsg_h, &labels))
            .and_then(|graphs| {
                graphs
                    .iter()
                    .map(|g| network_measures(g, DEFAULT_HPDI_MASS))
                    .collect::<Result<Vec<_>>>()
            })
            .map_err(|e| e.to_string())
    };
    let ngc = fit_ngc(&x, cfg.p, cfg.fdr_q).map(|g| centralities(&g)).map_err(|e| e.to_string());

    let mut out = Vec::with_capacity(methods.len() * 2);
    for method in methods {
        for task in Task::ALL {
            let relevance = truth.relevance(task);
            let (scores, degenerate) = match method {
                Method::Bsg { h } => {
                    let scores = match &bsg {
                        Ok(all) => {
                            let m = &all[bsg_h.iter().position(|x| x == h).expect("horizon listed")];
                            match task {
                                Task::Source => m
                                    .influence
                                    .as_ref()
                                    .map(|inf| inf.iter().map(|e| e.mean).collect())
                                    .ok_or_else(|| BsgError::InvalidInput("influence undefined: zero spillover".into())),
                                Task::Sink => Ok(m.vulnerability.iter().map(|e| e.mean).collect()),
                            }
                        }
                        Err(e) => Err(BsgError::InvalidInput(e.clone())),
                    };
                    (scores, false)
                }
                Method::Var(kind) => match &ngc {
                    Ok(c) => (Ok(c.score(*kind, task == Task::Sink).to_vec()), c.degenerate),
                    Err(e) => (Err(BsgError::InvalidInput(e.clone())), false),
                },
                Method::External(name) => (external.lookup(name, &job.scenario.name, job.replicate, &labels), false),
            };
            out.push(score_record(job, &method.name(), task, &relevance, cutoff, scores, degenerate));
        }
    }
    out
}

/// Runs every (scenario, replicate) job in parallel and collects per-replicate
/// NDCG for each method. Failures are recorded in the records, not returned.
pub fn run_benchmark(cfg: &BenchmarkConfig, external: Option<&ExternalScores>) -> Result<BenchmarkResults> {
    cfg.validate()?;
    let empty = ExternalScores::default();
    let external = external.unwrap_or(&empty);
    let mut methods: Vec<Method> = cfg.horizons.iter().map(|&h| Method::Bsg { h }).collect();
    methods.dedup();
    methods.extend(CentralityKind::ALL.map(Method::Var));
    methods.extend(external.methods().iter().cloned().map(Method::External));

    let jobs: Vec<Job<'_>> = cfg
        .scenarios
        .iter()
        .enumerate()
        .flat_map(|(si, scenario)| {
            let scenario_seed = derive_seed(cfg.seed, si as u64);
            (0..cfg.replicates).map(move |replicate| Job {
                scenario,
                replicate,
                seed: derive_seed(scenario_seed, replicate as u64),
            })
        })
        .collect();
    let records: Vec<ReplicateRecord> = jobs
        .par_iter()
        .map(|job| {
            let start = std::time::Instant::now();
            let r = run_job(cfg, &methods, external, job);
            log::info!(
                "{} replicate {} done in {:.1}s",
                job.scenario.name,
                job.replicate,
                start.elapsed().as_secs_f64()
            );
            r
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(BenchmarkResults {
        config: cfg.clone(),
        methods: methods.iter().map(Method::name).collect(),
        records,
    })
}
