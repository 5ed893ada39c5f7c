//! `bsg`: simulate series, fit Bayesian VARs, build spillover graphs and run
//! node-ranking benchmarks.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bsg_core::eval::{run_benchmark, BenchmarkConfig, ExternalScores, Scenario, ScenarioKind};
use bsg_core::graph::{
    rank_nodes, to_dot, GraphExport, DEFAULT_EDGE_PERCENTILE, DEFAULT_EPSILON, DEFAULT_HPDI_MASS,
    DEFAULT_H_MAX,
};
use bsg_core::pipeline::{analyze, analyze_draws, preprocess, Analysis, AnalyzeOptions, HorizonChoice};
use bsg_core::posterior::{fit, sample_posterior, DrawsFile};
use bsg_core::simulate::{
    chain_scenario, generate_network, simulate_lotka_volterra, simulate_var, ErrorSpec, LvConfig,
    NetworkSpec, Topology, DEFAULT_BURN_IN,
};
use bsg_core::{BsgError, Mts};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "bsg", version, about = "Bayesian spillover graphs")]
struct Cli {
    /// Log level when RUST_LOG is unset.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a ground-truth network and write the series and truth.
    Simulate(SimulateArgs),
    /// Fit the Bayesian VAR and save posterior draws.
    Fit(FitArgs),
    /// Build the spillover graph, node measures and stationarity report.
    Analyze(AnalyzeArgs),
    /// Rank source and sink nodes on simulated networks against VAR baselines.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// dag, cyclic, bipartite, lv or chain.
    #[arg(long, default_value = "dag")]
    topology: String,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "T", default_value_t = 500)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_source: Option<usize>,
    #[arg(long)]
    n_sink: Option<usize>,
    /// Error equicorrelation.
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Diagonal of phi1 for cyclic networks.
    #[arg(long, default_value_t = 0.5)]
    autocorr: f64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Writes `<out>.csv` and `<out>.truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Clone)]
struct FitOptions {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long = "M", default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// First-difference the series before fitting.
    #[arg(long)]
    difference: bool,
    /// Standardize each column before fitting.
    #[arg(long)]
    zscore: bool,
}

#[derive(Args, Serialize)]
struct FitArgs {
    #[command(flatten)]
    fit: FitOptions,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    /// Series CSV; not needed with --draws.
    #[arg(long, required_unless_present = "draws")]
    input: Option<PathBuf>,
    /// Reuse draws written by `fit` or `--save-draws`.
    #[arg(long, conflicts_with_all = ["p", "m", "difference", "zscore"])]
    draws: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed forecast horizon.
    #[arg(long, conflicts_with = "find_h_star")]
    h: Option<usize>,
    /// Pick the smallest h where mean edges move less than epsilon.
    #[arg(long)]
    find_h_star: bool,
    #[arg(long = "H-max", default_value_t = DEFAULT_H_MAX)]
    h_max: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_HPDI_MASS)]
    hpdi_mass: f64,
    #[arg(long)]
    difference: bool,
    #[arg(long)]
    zscore: bool,
    /// DOT keeps edges above this percentile of off-diagonal means.
    #[arg(long, default_value_t = DEFAULT_EDGE_PERCENTILE)]
    edge_percentile: f64,
    /// Also write the posterior draws to `draws.json`.
    #[arg(long)]
    save_draws: bool,
}

#[derive(Args, Serialize)]
struct BenchmarkArgs {
    /// Comma-separated: dag, cyclic, bipartite, lv.
    #[arg(long, value_delimiter = ',', default_value = "dag,cyclic,bipartite")]
    topology: Vec<String>,
    /// Comma-separated error equicorrelations.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long)]
    n_source: Option<usize>,
    #[arg(long)]
    n_sink: Option<usize>,
    #[arg(long = "T", default_value_t = 500)]
    t: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 5)]
    replicates: usize,
    /// Comma-separated BSG horizons.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    h: Vec<usize>,
    #[arg(long = "M", default_value_t = 200)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long, default_value_t = 0.05)]
    fdr_q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// NDCG cutoff; defaults to all nodes.
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    zscore: bool,
    /// CSV of method,network,replicate,node_label,score.
    #[arg(long)]
    external_scores: Option<PathBuf>,
    /// Table output.
    #[arg(long)]
    out: PathBuf,
    /// Per-replicate NDCG output.
    #[arg(long)]
    records: Option<PathBuf>,
}

/// Provenance written into every output.
#[derive(Serialize)]
struct RunConfig<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    args: &'a T,
}

impl<'a, T: Serialize> RunConfig<'a, T> {
    fn new(command: &'static str, args: &'a T) -> Self {
        RunConfig {
            tool: "bsg",
            version: VERSION,
            command,
            args,
        }
    }

    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    fn comment(&self) -> String {
        format!("config: {}", self.json())
    }
}

#[derive(Serialize)]
struct WithConfig<'a, T: Serialize> {
    config: serde_json::Value,
    #[serde(flatten)]
    body: &'a T,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, config: serde_json::Value, body: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &WithConfig { config, body })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_mts(path: &Path) -> Result<Mts> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Mts::read_csv(BufReader::new(f))?)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = RunConfig::new("simulate", args);
    let (x, truth) = match args.topology.to_ascii_lowercase().as_str() {
        "chain" => {
            if args.d.is_some_and(|d| d != 5) {
                bail!("the chain scenario has d = 5");
            }
            let truth = chain_scenario();
            (simulate_var(&truth, args.t, args.burn_in, args.seed)?, truth)
        }
        "lv" => simulate_lotka_volterra(&LvConfig::new(args.d.unwrap_or(20), args.t, args.seed))?,
        other => {
            let topology: Topology = other.parse()?;
            let mut spec = NetworkSpec::benchmark(topology, args.seed);
            if let Some(d) = args.d {
                spec.d = d;
                let (src, snk) = default_ends(topology, d);
                spec.n_source = src;
                spec.n_sink = snk;
            }
            spec.n_source = args.n_source.unwrap_or(spec.n_source);
            spec.n_sink = args.n_sink.unwrap_or(spec.n_sink);
            spec.autocorr = args.autocorr;
            spec.error = ErrorSpec {
                sigma_diag: 1.0,
                rho: args.rho,
            };
            let truth = generate_network(&spec)?;
            let x = simulate_var(&truth, args.t, args.burn_in, bsg_core::simulate::derive_seed(args.seed, 1))?;
            (x, truth)
        }
    };
    let mut w = create(&with_suffix(&args.out, ".csv"))?;
    x.write_csv(&mut w, &[cfg.comment()])?;
    w.flush()?;
    write_json(&with_suffix(&args.out, ".truth.json"), cfg.json(), &truth)?;
    Ok(())
}

/// Sources and sinks when only `d` is given: a quarter each, half each for
/// bipartite networks.
fn default_ends(topology: Topology, d: usize) -> (usize, usize) {
    match topology {
        Topology::Bipartite => (d / 2, d - d / 2),
        _ => ((d / 4).max(1), (d / 4).max(1)),
    }
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let cfg = RunConfig::new("fit", args);
    let o = &args.fit;
    let x = preprocess(&read_mts(&o.input)?, o.difference, o.zscore)?;
    let post = fit(&x, o.p, None)?;
    let draws = sample_posterior(&post, o.m, o.seed)?;
    let file = DrawsFile::from_draws(&draws, Some(x.labels().to_vec()), Some(cfg.json()));
    let mut w = create(&args.out)?;
    serde_json::to_writer(&mut w, &file)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GraphOutput<'a> {
    graph: GraphExport,
    stationarity: &'a bsg_core::StationarityReport,
    h_star: Option<HStar>,
}

#[derive(Serialize)]
struct HStar {
    h_star: usize,
    converged: bool,
    epsilon: f64,
    max_changes: Vec<f64>,
}

fn pct(v: f64) -> String {
    format!("{v:.1}")
}

fn write_measures(path: &Path, a: &Analysis, comment: &str) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# {comment}")?;
    let labels = &a.graph.labels;
    let d = labels.len();
    let vul: Vec<f64> = a.measures.vulnerability.iter().map(|e| e.mean).collect();
    let mut vul_rank = vec![0; d];
    for (r, i) in rank_nodes(&vul, labels).into_iter().enumerate() {
        vul_rank[i] = r + 1;
    }
    let mut inf_rank = vec![None; d];
    if let Some(inf) = &a.measures.influence {
        let scores: Vec<f64> = inf.iter().map(|e| e.mean).collect();
        for (r, i) in rank_nodes(&scores, labels).into_iter().enumerate() {
            inf_rank[i] = Some(r + 1);
        }
    }
    let mut csv = csv::Writer::from_writer(&mut w);
    csv.write_record([
        "label",
        "influence",
        "influence_hpdi_lo",
        "influence_hpdi_hi",
        "influence_rank",
        "vulnerability",
        "vulnerability_hpdi_lo",
        "vulnerability_hpdi_hi",
        "vulnerability_rank",
    ])?;
    for i in 0..d {
        let inf = a.measures.influence.as_ref().map(|v| v[i]);
        let v = a.measures.vulnerability[i];
        let blank = String::new;
        csv.write_record([
            labels[i].clone(),
            inf.map_or_else(blank, |e| pct(e.mean)),
            inf.map_or_else(blank, |e| pct(e.hpdi_lo)),
            inf.map_or_else(blank, |e| pct(e.hpdi_hi)),
            inf_rank[i].map_or_else(blank, |r| r.to_string()),
            pct(v.mean),
            pct(v.hpdi_lo),
            pct(v.hpdi_hi),
            vul_rank[i].to_string(),
        ])?;
    }
    csv.flush()?;
    drop(csv);
    w.flush()?;
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let cfg = RunConfig::new("analyze", args);
    let horizon = match (args.h, args.find_h_star) {
        (Some(h), _) => HorizonChoice::Fixed { h },
        (None, true) => HorizonChoice::Search {
            h_max: args.h_max,
            epsilon: args.epsilon,
        },
        (None, false) => bail!("pass either --h N or --find-h-star"),
    };
    if !(args.hpdi_mass > 0.0 && args.hpdi_mass <= 1.0) {
        bail!("--hpdi-mass must be in (0, 1]");
    }
    if !(0.0..=100.0).contains(&args.edge_percentile) {
        bail!("--edge-percentile must be in [0, 100]");
    }
    let opts = AnalyzeOptions {
        p: args.p.unwrap_or(1),
        m: args.m.unwrap_or(500),
        seed: args.seed,
        horizon,
        hpdi_mass: args.hpdi_mass,
        difference: args.difference,
        zscore: args.zscore,
        prior: None,
    };
    let analysis = match &args.draws {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let file: DrawsFile = serde_json::from_reader(BufReader::new(f))
                .map_err(BsgError::from)
                .with_context(|| format!("reading {}", path.display()))?;
            let labels = match (&file.labels, &args.input) {
                (Some(l), _) => l.clone(),
                (None, Some(input)) => read_mts(input)?.labels().to_vec(),
                (None, None) => bsg_core::mts::default_labels(file.d),
            };
            analyze_draws(file.into_draws()?, &labels, &opts)?
        }
        None => {
            let input = args.input.as_ref().expect("clap requires --input");
            analyze(&read_mts(input)?, &opts)?
        }
    };
    if !analysis.stationarity.is_stationary && !args.difference {
        log::warn!("posterior-mean fit is not stationary; consider --difference");
    }

    let dir = &args.out_dir;
    let output = GraphOutput {
        graph: GraphExport::new(&analysis.graph, &analysis.measures)?,
        stationarity: &analysis.stationarity,
        h_star: analysis.trace.as_ref().map(|t| HStar {
            h_star: t.h_star,
            converged: t.converged,
            epsilon: t.epsilon,
            max_changes: t.max_changes.clone(),
        }),
    };
    write_json(&dir.join("graph.json"), cfg.json(), &output)?;
    write_json(&dir.join("stationarity.json"), cfg.json(), &analysis.stationarity)?;
    let dot = to_dot(&analysis.graph, args.edge_percentile, &[cfg.comment()]);
    let mut w = create(&dir.join("graph.dot"))?;
    w.write_all(dot.as_bytes())?;
    w.flush()?;
    write_measures(&dir.join("measures.csv"), &analysis, &cfg.comment())?;
    if args.save_draws {
        let file = DrawsFile::from_draws(&analysis.draws, Some(analysis.graph.labels.clone()), Some(cfg.json()));
        let mut w = create(&dir.join("draws.json"))?;
        serde_json::to_writer(&mut w, &file)?;
        writeln!(w)?;
        w.flush()?;
    }
    if let Some(t) = &analysis.trace {
        eprintln!("h* = {}{}", t.h_star, if t.converged { "" } else { " (not converged)" });
    }
    Ok(())
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    let cfg = RunConfig::new("benchmark", args);
    let mut scenarios = Vec::new();
    for topo in &args.topology {
        for &rho in &args.rho {
            let name = if args.rho.len() > 1 { format!("{topo} rho={rho}") } else { topo.clone() };
            let kind = if topo.eq_ignore_ascii_case("lv") {
                ScenarioKind::LotkaVolterra(LvConfig::new(args.d, args.t, 0))
            } else {
                let topology: Topology = topo.parse()?;
                let (src, snk) = default_ends(topology, args.d);
                let mut spec = NetworkSpec::new(
                    topology,
                    args.d,
                    args.n_source.unwrap_or(src),
                    args.n_sink.unwrap_or(snk),
                    0,
                );
                spec.error = ErrorSpec { sigma_diag: 1.0, rho };
                ScenarioKind::Network(spec)
            };
            scenarios.push(Scenario { name, kind });
        }
    }
    let external = match &args.external_scores {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Some(ExternalScores::read_csv(BufReader::new(f))?)
        }
        None => None,
    };
    let mut bench = BenchmarkConfig::new(scenarios, args.seed);
    bench.t = args.t;
    bench.burn_in = args.burn_in;
    bench.replicates = args.replicates;
    bench.horizons = args.h.clone();
    bench.m = args.m;
    bench.p = args.p;
    bench.fdr_q = args.fdr_q;
    bench.cutoff = args.cutoff;
    bench.zscore = args.zscore;
    let results = run_benchmark(&bench, external.as_ref())?;
    let comments = [cfg.comment()];
    let mut w = create(&args.out)?;
    results.write_table(&mut w, &comments)?;
    w.flush()?;
    if let Some(path) = &args.records {
        let mut w = create(path)?;
        results.write_records(&mut w, &comments)?;
        w.flush()?;
    }
    let failed = results.records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} cells failed", results.records.len());
    }
    if failed == results.records.len() {
        bail!(BsgError::InvalidInput("every benchmark cell failed".into()));
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .filter_map(|e| e.downcast_ref::<BsgError>())
        .any(BsgError::is_numeric);
    if numeric {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log_level)).init();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
