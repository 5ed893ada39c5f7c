//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use bsg_core::eval::{run_benchmark, BenchmarkConfig, BenchmarkResults, Scenario, ScenarioKind};
use bsg_core::graph::build_graphs;
use bsg_core::pipeline::{analyze, AnalyzeOptions, HorizonChoice};
use bsg_core::posterior::fit;
use bsg_core::simulate::{
    chain_scenario, derive_seed, generate_network, simulate_params, simulate_var, ErrorSpec,
    NetworkSpec, Task, Topology,
};
use bsg_core::{
    build_graph, check_stationarity, fevd, find_h_star, hpdi, sample_posterior, VarParams,
};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_stationary_var1(d: usize, rng: &mut ChaCha8Rng) -> VarParams {
    let mut phi = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let norm = phi.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max);
    phi *= rng.random_range(0.1..0.95) / norm;
    let l = DMatrix::from_fn(d, d, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => rng.random_range(0.3..1.5),
        std::cmp::Ordering::Greater => rng.random_range(-1.0..1.0),
        std::cmp::Ordering::Less => 0.0,
    });
    VarParams::var1(phi, &l * l.transpose()).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(2..=10);
        let params = random_stationary_var1(d, &mut rng);
        for h in [1, 5, 20] {
            let f = fevd(&params, h).unwrap();
            for row in f.normalized.row_iter() {
                worst = worst.max((row.sum() - 1.0).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && secs < 30.0,
        format!("max |row sum - 1| = {worst:.1e}, {secs:.2} s"),
    )
}

/// Empirical generalized decomposition: the share of target `i`'s h-step
/// forecast error explained by regressing it on the full shock history of
/// variable `j`, from simulated forecast-error paths.
fn monte_carlo_fevd(phi: &DMatrix<f64>, sigma: &DMatrix<f64>, h: usize, paths: usize, seed: u64) -> DMatrix<f64> {
    let d = phi.nrows();
    let chol = Cholesky::new(sigma.clone()).unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xtx = vec![DMatrix::<f64>::zeros(h, h); d];
    let mut xty = vec![vec![DVector::<f64>::zeros(h); d]; d];
    let mut yy = vec![0.0; d];
    let mut shocks = DMatrix::zeros(h, d);
    for _ in 0..paths {
        let mut z = DVector::zeros(d);
        for s in 0..h {
            let eps = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let a = &chol * eps;
            z = phi * z + &a;
            shocks.row_mut(s).copy_from(&a.transpose());
        }
        for j in 0..d {
            let col = shocks.column(j);
            xtx[j] += &col * col.transpose();
            for i in 0..d {
                xty[i][j] += col * z[i];
            }
        }
        for i in 0..d {
            yy[i] += z[i] * z[i];
        }
    }
    let mut theta = DMatrix::from_fn(d, d, |i, j| {
        let b = xtx[j].clone().cholesky().unwrap().solve(&xty[i][j]);
        b.dot(&xty[i][j]) / yy[i]
    });
    for mut row in theta.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    theta
}

fn criterion_2() -> Outcome {
    let phi = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, -0.2, 0.4]);
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
    let params = VarParams::var1(phi.clone(), sigma.clone()).unwrap();
    let mut worst = 0.0f64;
    for (k, h) in [1, 3, 10].into_iter().enumerate() {
        let analytic = fevd(&params, h).unwrap().normalized;
        let empirical = monte_carlo_fevd(&phi, &sigma, h, 1_000_000, 20 + k as u64);
        worst = worst.max((analytic - empirical).amax());
    }
    outcome(worst <= 0.02, format!("max |analytic - empirical| = {worst:.4} over 1e6 paths"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_modulus = 0.0f64;
    let mut worst_diag = 0.0f64;
    for k in 0..50 {
        let d = rng.random_range(6..=25);
        let n_end = rng.random_range(1..=d / 3);
        let spec = NetworkSpec::new(Topology::Dag, d, n_end, n_end, derive_seed(3, k));
        let truth = generate_network(&spec).unwrap();
        let phi = truth.phi1().unwrap();
        worst_diag = worst_diag.max(phi.diagonal().amax());
        let report = check_stationarity(std::slice::from_ref(phi)).unwrap();
        worst_modulus = worst_modulus.max(report.max_modulus);
    }
    outcome(
        worst_modulus <= 1e-10 && worst_diag == 0.0,
        format!("max modulus {worst_modulus:.1e}, max |diagonal| {worst_diag:.1e}"),
    )
}

fn criterion_4() -> Outcome {
    let d = 3;
    let phi = DMatrix::from_row_slice(d, d, &[0.5, 0.1, 0.0, 0.2, 0.3, -0.1, 0.0, 0.3, 0.4]);
    let sigma = DMatrix::from_row_slice(d, d, &[1.0, 0.4, 0.2, 0.4, 1.5, 0.3, 0.2, 0.3, 0.8]);
    let params = VarParams::var1(phi, sigma).unwrap();
    let labels = bsg_core::mts::default_labels(d);
    let x = simulate_params(&params, labels, 40, 100, 4).unwrap();
    let post = fit(&x, 1, None).unwrap();
    let m = 5000;
    let draws = sample_posterior(&post, m, 44).unwrap();

    let analytic = post.sigma_mean().unwrap();
    let sigma_bar = draws.draws.iter().fold(DMatrix::zeros(d, d), |a, v| a + &v.sigma_a) / m as f64;
    let sigma_err = DMatrix::from_fn(d, d, |i, j| {
        (sigma_bar[(i, j)] - analytic[(i, j)]).abs() / (analytic[(i, i)] * analytic[(j, j)]).sqrt()
    })
    .amax();

    let betas: Vec<DMatrix<f64>> = draws.draws.iter().map(VarParams::to_beta).collect();
    let beta_bar = betas.iter().fold(DMatrix::zeros(d + 1, d), |a, b| a + b) / m as f64;
    let beta_var = betas
        .iter()
        .fold(DMatrix::zeros(d + 1, d), |a, b| a + (b - &beta_bar).map(|v| v * v))
        / (m - 1) as f64;
    let beta_z = DMatrix::from_fn(d + 1, d, |i, j| {
        (beta_bar[(i, j)] - post.beta_tilde[(i, j)]).abs() / (beta_var[(i, j)] / m as f64).sqrt()
    })
    .amax();
    outcome(
        sigma_err <= 0.05 && beta_z <= 3.0,
        format!("Sigma mean error {:.2}% of scale, beta max |z| = {beta_z:.2}", 100.0 * sigma_err),
    )
}

fn criterion_5() -> Outcome {
    let d = 3;
    let phi = DMatrix::from_row_slice(d, d, &[0.4, 0.2, 0.1, 0.15, 0.3, 0.2, -0.2, 0.1, 0.35]);
    let sigma = DMatrix::from_row_slice(d, d, &[1.0, 0.3, 0.3, 0.3, 1.0, 0.3, 0.3, 0.3, 1.0]);
    let params = VarParams::var1(phi, sigma).unwrap();
    let h = 5;
    let truth = fevd(&params, h).unwrap().normalized.transpose() * 100.0;
    let labels = bsg_core::mts::default_labels(d);
    let datasets = 200;
    let mut covered = DMatrix::<f64>::zeros(d, d);
    for k in 0..datasets {
        let x = simulate_params(&params, labels.clone(), 400, 100, derive_seed(5, k)).unwrap();
        let post = fit(&x, 1, None).unwrap();
        let draws = sample_posterior(&post, 400, derive_seed(55, k)).unwrap();
        let g = build_graph(&draws, h, &labels).unwrap();
        for s in 0..d {
            for t in (0..d).filter(|&t| t != s) {
                let samples: Vec<f64> = g.edge_samples.iter().map(|e| e[(s, t)]).collect();
                let (lo, hi) = hpdi(&samples, 0.95).unwrap();
                if (lo..=hi).contains(&truth[(s, t)]) {
                    covered[(s, t)] += 1.0;
                }
            }
        }
    }
    let rates: Vec<f64> = (0..d)
        .flat_map(|s| (0..d).filter(move |&t| t != s).map(move |t| (s, t)))
        .map(|(s, t)| covered[(s, t)] / datasets as f64)
        .collect();
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(0.0, f64::max);
    outcome(
        lo >= 0.90 && hi <= 0.99,
        format!("coverage of 6 edges over {datasets} datasets in [{lo:.3}, {hi:.3}]"),
    )
}

fn network(name: &str, spec: NetworkSpec) -> Scenario {
    Scenario {
        name: name.to_string(),
        kind: ScenarioKind::Network(spec),
    }
}

const VAR_METHODS: [&str; 4] = ["VAR-Between", "VAR-Closeness", "VAR-Degree", "VAR-Eigen"];

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let cfg = BenchmarkConfig::new(
        vec![
            network("dag", NetworkSpec::benchmark(Topology::Dag, 0)),
            network("bipartite", NetworkSpec::benchmark(Topology::Bipartite, 0)),
        ],
        1,
    );
    let res = run_benchmark(&cfg, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let dag_src = res.cell("BSG, h=10", "dag", Task::Source);
    let dag_sink = res.cell("BSG, h=10", "dag", Task::Sink);
    let bip: Vec<_> = Task::ALL.iter().map(|&t| res.cell("BSG, h=5", "bipartite", t)).collect();
    let mut losses = Vec::new();
    for (scenario, bsg) in [("dag", "BSG, h=10"), ("bipartite", "BSG, h=5")] {
        for task in Task::ALL {
            let ours = res.cell(bsg, scenario, task).mean;
            for m in VAR_METHODS {
                let theirs = res.cell(m, scenario, task).mean;
                if theirs > ours {
                    losses.push(format!("{m} {scenario} {} {theirs:.3} > {ours:.3}", task.name()));
                }
            }
        }
    }
    let pass = dag_src.mean >= 0.92
        && dag_sink.mean >= 0.99
        && bip.iter().all(|c| c.mean >= 0.99)
        && losses.is_empty()
        && secs < 600.0;
    outcome(
        pass,
        format!(
            "DAG h=10 source {}, sink {}; bipartite h=5 source {}, sink {}; losses to VAR: {}; {secs:.0} s",
            dag_src.display(),
            dag_sink.display(),
            bip[0].display(),
            bip[1].display(),
            if losses.is_empty() { "none".to_string() } else { losses.join("; ") },
        ),
    )
}

fn rho_spec(topology: Topology, rho: f64) -> NetworkSpec {
    let mut spec = NetworkSpec::new(topology, 24, 8, 8, 0);
    spec.error = ErrorSpec { sigma_diag: 1.0, rho };
    spec
}

fn degenerate_replicates(res: &BenchmarkResults, scenario: &str) -> usize {
    res.cell("VAR-Degree", scenario, Task::Source).degenerate_count
}

fn criterion_7() -> Outcome {
    let mut cfg = BenchmarkConfig::new(vec![network("dag rho=0.5", rho_spec(Topology::Dag, 0.5))], 1);
    cfg.horizons = vec![5];
    let res = run_benchmark(&cfg, None).unwrap();
    let degenerate = degenerate_replicates(&res, "dag rho=0.5");
    let sink = res.cell("BSG, h=5", "dag rho=0.5", Task::Sink);
    outcome(
        degenerate >= 4 && sink.mean >= 0.98,
        format!("VAR graph degenerate in {degenerate}/5 replicates; BSG h=5 sink {}", sink.display()),
    )
}

fn criterion_8() -> Outcome {
    let truth = chain_scenario();
    let x = simulate_var(&truth, 500, 200, 3).unwrap();
    let post = fit(&x, 1, None).unwrap();
    let draws = sample_posterior(&post, 500, 8).unwrap();
    let horizons: Vec<usize> = (1..=10).collect();
    let graphs = build_graphs(&draws, &horizons, x.labels()).unwrap();
    let e35: Vec<f64> = graphs.iter().map(|g| g.mean_edges[(2, 4)]).collect();
    let e45: Vec<f64> = graphs.iter().map(|g| g.mean_edges[(3, 4)]).collect();
    let increasing = e35[1..].windows(2).all(|w| w[1] > w[0]);
    let peak = (0..e45.len()).max_by(|&a, &b| e45[a].total_cmp(&e45[b])).unwrap();
    let declines = peak + 1 <= 4 && e45[peak..].windows(2).all(|w| w[1] < w[0]);
    let trace = find_h_star(&draws, 50, 0.1).unwrap();
    let pass = e35[0] < 5.0 && increasing && trace.converged && trace.h_star <= 25 && declines;
    outcome(
        pass,
        format!(
            "3->5 at h=1 {:.2}, h=10 {:.1}, increasing on 2..10: {increasing}; 4->5 peaks at h={} ({:.1}) then falls to {:.1}; h* = {}",
            e35[0],
            e35[9],
            peak + 1,
            e45[peak],
            e45[9],
            trace.h_star
        ),
    )
}

fn criterion_9() -> Outcome {
    let rhos = [0.1, 0.5, 0.9];
    let scenarios = rhos
        .iter()
        .map(|&rho| network(&format!("cyclic rho={rho}"), rho_spec(Topology::Cyclic, rho)))
        .collect();
    let mut cfg = BenchmarkConfig::new(scenarios, 1);
    cfg.horizons = vec![1, 5, 6, 7, 8, 9, 10];
    let res = run_benchmark(&cfg, None).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for rho in rhos {
        let name = format!("cyclic rho={rho}");
        let at = |h: usize| res.cell(&format!("BSG, h={h}"), &name, Task::Source).mean;
        let base = at(1);
        let worst = (5..=10).map(at).fold(f64::INFINITY, f64::min);
        pass &= worst >= base;
        parts.push(format!("rho={rho}: h=1 {base:.3}, min over 5..10 {worst:.3}"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let truth = generate_network(&NetworkSpec::benchmark(Topology::Dag, 10)).unwrap();
    let x = simulate_var(&truth, 500, 200, 10).unwrap();
    let opts = AnalyzeOptions {
        m: 500,
        horizon: HorizonChoice::Search { h_max: 50, epsilon: 0.1 },
        ..AnalyzeOptions::default()
    };
    let start = Instant::now();
    let a = analyze(&x, &opts).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        secs < 60.0,
        format!(
            "d=20, T=500, M=500, H=50: {secs:.1} s on {} thread(s), h* = {}",
            rayon::current_num_threads(),
            a.graph.h
        ),
    )
}

fn main() {
    // `cargo test` passes harness flags such as --nocapture; a name filter
    // other than "acceptance" skips the suite.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("row-stochastic FEVD", criterion_1),
        ("Monte-Carlo FEVD oracle", criterion_2),
        ("nilpotent DAG dynamics", criterion_3),
        ("posterior sampler calibration", criterion_4),
        ("HPDI coverage", criterion_5),
        ("source/sink benchmark", criterion_6),
        ("degenerate VAR baseline", criterion_7),
        ("chain spillover evolution", criterion_8),
        ("horizon ablation", criterion_9),
        ("analyze runtime", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
