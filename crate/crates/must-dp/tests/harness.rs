mod common;

use common::bootstrap_scales;
use must_dp::amplification::{amplify_delta, amplify_epsilon, eta};
use must_dp::harness::{
    derive_seed, fit_ols, make_synthetic, noise_scale, run_bootstrap, run_dpsgd, run_dpsgd_linear, run_experiment1,
    run_experiment2, BootstrapConfig, Dataset, Experiment1Config, Experiment2Config, Model, SensitivityDenominator,
    SgdConfig, SyntheticKind, TRUE_BETA,
};
use must_dp::{Calibration, Error, MechanismSpec, SamplingScheme};

fn sgd(scheme: SamplingScheme) -> SgdConfig {
    SgdConfig {
        scheme,
        eps_prime_per_iter: 0.01,
        delta_base: 1e-3,
        clip_c: 3.0,
        learning_rate: 0.04,
        iterations: 200,
        seed: 5,
        calibration: Calibration::Classical,
        sensitivity_denominator: SensitivityDenominator::N,
        sigma_override: None,
    }
}

#[test]
fn gaussian_data_has_unit_moments() {
    let n = 300;
    let d = make_synthetic(SyntheticKind::GaussianUnivariate, n, 42).unwrap();
    let mean = d.y.iter().sum::<f64>() / n as f64;
    let var = d.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "{mean}");
    // sd of the sample variance is about sqrt(2/n)
    assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{var}");
}

#[test]
fn ols_recovers_the_generating_coefficients() {
    let n = 5000;
    let d = make_synthetic(SyntheticKind::LinearRegression, n, 1).unwrap();
    let beta = fit_ols(&d).unwrap();
    // unit-variance regressors and noise: se ≈ 1/sqrt(n)
    for (b, t) in beta.iter().zip(TRUE_BETA) {
        assert!((b - t).abs() < 3.5 / (n as f64).sqrt(), "{beta:?}");
    }
    assert!((must_dp::harness::rmse(&d, &beta) - 1.0).abs() < 0.05);
}

#[test]
fn logistic_data_is_balanced_enough_and_learnable() {
    let d = make_synthetic(SyntheticKind::Logistic2Class, 2000, 3).unwrap();
    let pos = d.y.iter().filter(|&&y| y == 1.0).count();
    assert!(d.y.iter().all(|&y| y == 0.0 || y == 1.0));
    assert!(pos > 400 && pos < 1600, "{pos}");
    let mut c = sgd(SamplingScheme::Wor { n: 2000, m: 200 });
    c.sigma_override = Some(0.0);
    c.learning_rate = 0.5;
    let run = run_dpsgd(&c, &d, Model::Logistic).unwrap();
    assert!(run.loss_trace.last().unwrap() < &run.loss_trace[0]);
    assert!(must_dp::harness::accuracy(&d, &run.beta_hat) > 0.7);
}

#[test]
fn noiseless_full_batch_is_plain_gradient_descent() {
    let n = 200;
    let data = make_synthetic(SyntheticKind::LinearRegression, n, 9).unwrap();
    let mut c = sgd(SamplingScheme::Wor { n: n as u64, m: n as u64 });
    c.sigma_override = Some(0.0);
    c.clip_c = 1e12;
    c.iterations = 50;
    let run = run_dpsgd_linear(&c, &data).unwrap();

    let mut beta = vec![0.0; 3];
    for it in 0..c.iterations {
        let mut sum = vec![0.0; 3];
        for (row, &y) in data.x.iter().zip(&data.y) {
            let z: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            for (s, x) in sum.iter_mut().zip(row) {
                *s += 2.0 * (z - y) * x;
            }
        }
        for (b, s) in beta.iter_mut().zip(&sum) {
            *b -= c.learning_rate * (s / n as f64);
        }
        assert_eq!(run.loss_trace[it], Model::Linear.mean_loss(&data, &beta), "iteration {it}");
    }
    assert_eq!(run.beta_hat, beta);
}

#[test]
fn privacy_bookkeeping_is_consistent() {
    let data = make_synthetic(SyntheticKind::LinearRegression, 1000, 2).unwrap();
    for s in Experiment2Config::standard(0.01, 1, 0).schemes() {
        let mut c = sgd(s);
        c.iterations = 3;
        let run = run_dpsgd_linear(&c, &data).unwrap();
        let e = eta(&s).unwrap();
        assert!((amplify_epsilon(e, run.eps_base).unwrap() - 0.01).abs() < 1e-10, "{s}");
        assert!((run.eps_prime - 0.01).abs() < 1e-10);
        let mech = MechanismSpec::gaussian(3.0 / 1000.0 / run.sigma_used).unwrap();
        assert_eq!(run.delta_prime_per_iter, amplify_delta(&s, &mech, run.eps_base).unwrap());
    }
}

#[test]
fn bootstrap_noise_scales_match_reference() {
    let delta = 1.0 / bootstrap_scales::N as f64;
    let width = bootstrap_scales::BOUNDS.1 - bootstrap_scales::BOUNDS.0;
    for (name, b, mean_sigma, var_sigma) in bootstrap_scales::entries() {
        let s = SamplingScheme::from_parts(name, Some(bootstrap_scales::N), b, Some(bootstrap_scales::M), None).unwrap();
        let n = bootstrap_scales::N as f64;
        let a = noise_scale(&s, bootstrap_scales::EPS_PRIME, delta, width / n, Calibration::Classical).unwrap();
        let v = noise_scale(&s, bootstrap_scales::EPS_PRIME, delta, width * width / n, Calibration::Classical).unwrap();
        assert!((a.sigma - mean_sigma).abs() <= 0.01, "{s}: {} vs {mean_sigma}", a.sigma);
        assert!((v.sigma - var_sigma).abs() <= 0.01, "{s}: {} vs {var_sigma}", v.sigma);
    }
}

#[test]
fn sgd_noise_ordering() {
    let rows = run_experiment2(&Experiment2Config { iterations: 2, ..Experiment2Config::standard(0.01, 1, 1) }).unwrap();
    let sigma = |name: &str| rows.iter().find(|r| r.scheme.name() == name).unwrap().sigma;
    assert_eq!(sigma("poisson"), sigma("wor"));
    assert_eq!(sigma("wr"), sigma("mustwo"));
    assert!(sigma("mustww") < sigma("mustow"));
    assert!(sigma("mustow") < sigma("wr"));
    assert!(sigma("wr") < sigma("wor"));
    for (name, want) in [("poisson", 0.118), ("wor", 0.118), ("wr", 0.113), ("mustow", 0.094), ("mustww", 0.091)] {
        assert!((sigma(name) - want).abs() < 0.001, "{name}: {}", sigma(name));
    }
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let p = (1..=100).map(|k| {
        let k = k as f64;
        2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
    });
    (d, p.sum::<f64>().clamp(0.0, 1.0))
}

#[test]
fn ks_helper_sanity() {
    let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
    let b: Vec<f64> = (0..100).map(|i| i as f64 + 0.5).collect();
    let c: Vec<f64> = (0..100).map(|i| i as f64 + 60.0).collect();
    assert!(ks_two_sample(&a, &b).1 > 0.9);
    assert!(ks_two_sample(&a, &c).1 < 1e-6);
}

#[test]
fn mustwo_training_is_indistinguishable_from_wr() {
    let (n, b, m) = (1000, 200, 100);
    let data = make_synthetic(SyntheticKind::LinearRegression, n as usize, 77).unwrap();
    let losses = |s: SamplingScheme, stream: u64| -> Vec<f64> {
        (0..50)
            .map(|r| {
                let mut c = sgd(s);
                c.seed = derive_seed(2024, stream, r);
                *run_dpsgd_linear(&c, &data).unwrap().loss_trace.last().unwrap()
            })
            .collect()
    };
    let wr = losses(SamplingScheme::Wr { n, m }, 1);
    let wo = losses(SamplingScheme::MustWo { n, b, m }, 2);
    let (d, p) = ks_two_sample(&wr, &wo);
    assert!(p > 0.01, "KS D = {d}, p = {p}");
}

#[test]
fn bootstrap_without_much_noise_tracks_the_sample() {
    let n = 300;
    let data = make_synthetic(SyntheticKind::GaussianUnivariate, n, 8).unwrap();
    let mean = data.y.iter().sum::<f64>() / n as f64;
    let var = data.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let cfg = BootstrapConfig {
        scheme: SamplingScheme::Wor { n: n as u64, m: 30 },
        t_boot: 2000,
        bounds: (-4.0, 4.0),
        eps_prime: 0.99,
        delta_base: 0.1,
        seed: 4,
        calibration: Calibration::Classical,
        sensitivity_denominator: SensitivityDenominator::N,
    };
    let run = run_bootstrap(&cfg, &data.y).unwrap();
    assert!((run.pp_mean - mean).abs() < 0.02, "{} vs {mean}", run.pp_mean);
    assert!((run.pp_var - var).abs() < 0.05, "{} vs {var}", run.pp_var);
    assert!(run.sigma_var > run.sigma_mean);
}

#[test]
fn bootstrap_variance_is_biased_down_for_small_first_stage() {
    let mut cfg = Experiment1Config::standard(6, 3);
    cfg.b_values = vec![10];
    let rows = run_experiment1(&cfg).unwrap();
    let avg = |name: &str| {
        let v: Vec<f64> = rows.iter().filter(|r| r.scheme.name() == name).map(|r| r.run.pp_var).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    // A first stage of 10 records shrinks the spread by about (b − 1)/b.
    assert!(avg("mustow") < 0.95, "{}", avg("mustow"));
    assert!(avg("wor") > 0.85, "{}", avg("wor"));
    for r in &rows {
        assert!(r.run.pp_mean.abs() < 0.3);
    }
}

#[test]
fn experiments_are_reproducible() {
    let cfg = Experiment2Config { iterations: 20, ..Experiment2Config::standard(0.01, 2, 9) };
    assert_eq!(run_experiment2(&cfg).unwrap(), run_experiment2(&cfg).unwrap());
    let mut e1 = Experiment1Config::standard(2, 9);
    e1.t_boot = 50;
    assert_eq!(run_experiment1(&e1).unwrap(), run_experiment1(&e1).unwrap());
}

#[test]
fn mismatched_data_and_divergence_are_reported() {
    let data = make_synthetic(SyntheticKind::LinearRegression, 50, 1).unwrap();
    let c = sgd(SamplingScheme::Wor { n: 60, m: 10 });
    assert!(run_dpsgd_linear(&c, &data).unwrap_err().is_validation());
    let mut c = sgd(SamplingScheme::Wor { n: 50, m: 10 });
    c.sigma_override = Some(0.0);
    c.clip_c = 1e12;
    c.learning_rate = 50.0;
    assert!(matches!(run_dpsgd_linear(&c, &data), Err(Error::Diverged { .. })));
    let empty = Dataset { x: vec![vec![]; 50], y: vec![0.0; 50] };
    assert!(run_dpsgd_linear(&sgd(SamplingScheme::Wor { n: 50, m: 10 }), &empty).is_err());
}
