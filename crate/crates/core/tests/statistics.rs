use bsg_core::eval::fit_ngc;
use bsg_core::posterior::fit;
use bsg_core::simulate::{simulate_params, ErrorSpec};
use bsg_core::{hpdi, Mts, VarParams};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

fn noise(t: usize, d: usize, seed: u64) -> Mts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mts::with_default_labels(DMatrix::from_fn(t, d, |_, _| StandardNormal.sample(&mut rng))).unwrap()
}

#[test]
fn hpdi_of_normal_sample_matches_central_quantiles() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = Normal::new(2.0, 3.0).unwrap();
    let xs: Vec<f64> = (0..200_000).map(|_| n.sample(&mut rng)).collect();
    let z = NormalDist::new(0.0, 1.0).unwrap().inverse_cdf(0.975);
    let (lo, hi) = hpdi(&xs, 0.95).unwrap();
    assert!((lo - (2.0 - 3.0 * z)).abs() < 0.05, "lo {lo}");
    assert!((hi - (2.0 + 3.0 * z)).abs() < 0.05, "hi {hi}");
}

#[test]
fn noiseless_var_is_recovered_exactly() {
    // deterministic oscillating VAR(2) path; the posterior mean with a
    // vague prior reduces to least squares
    let phi1 = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.3, 0.4]);
    let phi2 = DMatrix::from_row_slice(2, 2, &[-0.2, 0.1, 0.05, -0.1]);
    let phi0 = DVector::from_vec(vec![0.3, -0.1]);
    let t = 80;
    let mut z = DMatrix::zeros(t, 2);
    z[(0, 0)] = 1.0;
    z[(1, 1)] = -2.0;
    z[(1, 0)] = 0.5;
    for i in 2..t {
        // small deterministic perturbation keeps the design full rank
        let kick = DVector::from_vec(vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]) * 0.5;
        let next = &phi0 + &phi1 * z.row(i - 1).transpose() + &phi2 * z.row(i - 2).transpose();
        z.row_mut(i).copy_from(&(next + kick).transpose());
    }
    // refit the exact model of what was generated: the kick is known, so
    // regress z_t - kick_t on its lags
    let mut target = z.clone();
    for i in 2..t {
        target[(i, 0)] -= 0.5 * (i as f64 * 0.7).sin();
        target[(i, 1)] -= 0.5 * (i as f64 * 1.3).cos();
    }
    let design = bsg_core::build_design(&Mts::with_default_labels(z).unwrap(), 2).unwrap();
    let zt = target.rows(2, t - 2).into_owned();
    let prior = bsg_core::NiwPrior::vague(2, 2, 1e12);
    let post = bsg_core::compute_posterior(&zt, &design.x, &prior).unwrap();
    let params = VarParams::from_beta(&post.beta_tilde, DMatrix::identity(2, 2)).unwrap();
    assert!((params.phi0 - phi0).amax() < 1e-6);
    assert!((&params.phis[0] - phi1).amax() < 1e-6);
    assert!((&params.phis[1] - phi2).amax() < 1e-6);
}

#[test]
fn posterior_scale_tracks_true_covariance() {
    let d = 3;
    let phi1 = DMatrix::from_row_slice(d, d, &[0.4, 0.0, 0.1, 0.2, 0.3, 0.0, 0.0, -0.2, 0.5]);
    let sigma = DMatrix::from_row_slice(d, d, &[1.0, 0.3, 0.1, 0.3, 2.0, -0.4, 0.1, -0.4, 0.5]);
    let params = VarParams::var1(phi1, sigma.clone()).unwrap();
    let x = simulate_params(&params, bsg_core::mts::default_labels(d), 3000, 200, 4).unwrap();
    let post = fit(&x, 1, None).unwrap();
    let est = &post.v_post / (post.n_post - d as f64 - 1.0);
    for i in 0..d {
        for j in 0..d {
            let tol = 0.15 * (sigma[(i, i)] * sigma[(j, j)]).sqrt();
            assert!((est[(i, j)] - sigma[(i, j)]).abs() < tol, "({i},{j}) {}", est[(i, j)]);
        }
    }
}

#[test]
fn random_walk_differences_to_white_noise() {
    let steps = noise(2001, 2, 8);
    let walk = steps.cumulative_sum_from(&[10.0, -3.0]).unwrap();
    let back = walk.first_difference().unwrap();
    assert!((back.values() - steps.values()).amax() < 1e-9);
    let levels = fit(&walk, 1, None).unwrap().mean_params().unwrap();
    let diffs = fit(&back, 1, None).unwrap().mean_params().unwrap();
    // unit root in levels, none after differencing
    let r_levels = bsg_core::check_stationarity(&levels.phis).unwrap().max_modulus;
    let r_diffs = bsg_core::check_stationarity(&diffs.phis).unwrap().max_modulus;
    assert!(r_levels > 0.98, "levels {r_levels}");
    assert!(r_diffs < 0.2, "differences {r_diffs}");
}

#[test]
fn bh_controls_false_discoveries_under_the_null() {
    let reps = 60;
    let q = 0.05;
    let mut any_discovery = 0;
    for r in 0..reps {
        let g = fit_ngc(&noise(300, 5, 100 + r), 1, q).unwrap();
        if g.edge_count() > 0 {
            any_discovery += 1;
        }
    }
    // all nulls true: FDR equals the chance of any discovery, at most q
    // in expectation; allow binomial slack over 60 replicates
    let rate = any_discovery as f64 / reps as f64;
    assert!(rate <= q + 2.0 * (q * (1.0 - q) / reps as f64).sqrt(), "rate {rate}");
}

#[test]
fn strong_single_edge_is_detected() {
    let d = 4;
    let mut phi1 = DMatrix::zeros(d, d);
    phi1[(2, 0)] = 0.8;
    let params = VarParams::var1(phi1, ErrorSpec::default().covariance(d).unwrap()).unwrap();
    let mut spurious = 0;
    for seed in 0..10 {
        let x = simulate_params(&params, bsg_core::mts::default_labels(d), 500, 100, seed).unwrap();
        let g = fit_ngc(&x, 1, 0.05).unwrap();
        assert!(g.adjacency[0][2], "seed {seed}");
        spurious += g.edge_count() - 1;
    }
    assert!(spurious <= 3, "{spurious} spurious edges");
}
