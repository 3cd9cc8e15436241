//! Desk-scale utility experiments: subsampling bootstrap and DP-SGD.
//!
//! Both follow the same privacy bookkeeping. A per-query budget `ε′` is
//! fixed *after* subsampling; the base `ε` is recovered with
//! [`deamplify_epsilon`], and the Gaussian noise scale is calibrated for
//! `(ε, δ)` with sensitivity `C/n` (or `C/m`, see
//! [`SensitivityDenominator`]).

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplification::{amplify_delta, amplify_epsilon, deamplify_epsilon, eta};
use crate::error::{check_open_unit, check_positive, Error, Result};
use crate::mechanisms::{calibrate_sigma, Calibration, Family, MechanismSpec};
use crate::sampling::{draw_with, trial_rng};
use crate::scheme::SamplingScheme;

/// Which dataset size divides the sensitivity.
///
/// The standard protocol divides by the full data size `n` even though
/// each query sees only `m` records; `M` is offered to study the difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensitivityDenominator {
    #[default]
    N,
    M,
}

impl SensitivityDenominator {
    fn value(self, scheme: &SamplingScheme) -> f64 {
        match self {
            SensitivityDenominator::N => scheme.n() as f64,
            SensitivityDenominator::M => scheme.expected_size(),
        }
    }
}

/// Base `ε` and noise scale for one sanitized query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseScale {
    pub eps_base: f64,
    pub sigma: f64,
    /// `δ′` of the subsampled Gaussian mechanism at `eps_base`.
    pub delta_prime: f64,
}

/// Noise scale for a query with sensitivity `sensitivity` so that the
/// subsampled release is `(eps_prime, ·)`-DP with base `delta`.
pub fn noise_scale(
    scheme: &SamplingScheme,
    eps_prime: f64,
    delta: f64,
    sensitivity: f64,
    calibration: Calibration,
) -> Result<NoiseScale> {
    let eta_value = eta(scheme)?;
    let eps_base = deamplify_epsilon(eta_value, eps_prime)?;
    let sigma = calibrate_sigma(Family::Gaussian, delta, eps_base, sensitivity, calibration)?;
    let mech = MechanismSpec::gaussian(sensitivity / sigma)?;
    let delta_prime = amplify_delta(scheme, &mech, eps_base)?;
    Ok(NoiseScale { eps_base, sigma, delta_prime })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// `x ~ N(0, 1)`, stored in `y`.
    GaussianUnivariate,
    /// `y = 1 + 0.5x₁ + 0.2x₂ + N(0, 1)`.
    LinearRegression,
    /// `P(y = 1) = sigmoid(−0.5 + 2x₁ − 1.5x₂)`.
    Logistic2Class,
}

/// Rows of features (with a leading intercept column for the regression
/// kinds) and a response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

pub const TRUE_BETA: [f64; 3] = [1.0, 0.5, 0.2];
const LOGISTIC_BETA: [f64; 3] = [-0.5, 2.0, -1.5];

pub fn make_synthetic(kind: SyntheticKind, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    let mut rng = trial_rng(seed, 0);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    match kind {
        SyntheticKind::GaussianUnivariate => {
            for _ in 0..n {
                x.push(Vec::new());
                y.push(z());
            }
        }
        SyntheticKind::LinearRegression => {
            for _ in 0..n {
                let row = vec![1.0, z(), z()];
                y.push(dot(&row, &TRUE_BETA) + z());
                x.push(row);
            }
        }
        SyntheticKind::Logistic2Class => {
            let mut rng = trial_rng(seed, 1);
            for _ in 0..n {
                let row = vec![1.0, z(), z()];
                let p = sigmoid(dot(&row, &LOGISTIC_BETA));
                y.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
                x.push(row);
            }
        }
    }
    Ok(Dataset { x, y })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Ordinary least squares via the normal equations (non-private baseline).
pub fn fit_ols(data: &Dataset) -> Result<Vec<f64>> {
    let d = data.x.first().map(Vec::len).unwrap_or(0);
    if d == 0 {
        return Err(Error::param("data", "needs at least one feature column"));
    }
    let mut a = vec![vec![0.0; d + 1]; d];
    for (row, &y) in data.x.iter().zip(&data.y) {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += row[i] * row[j];
            }
            a[i][d] += row[i] * y;
        }
    }
    // Gauss–Jordan with partial pivoting.
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).expect("rows");
        if a[piv][col].abs() < 1e-12 {
            return Err(Error::param("data", "design matrix is singular"));
        }
        a.swap(col, piv);
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot[col];
                for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    Ok((0..d).map(|i| a[i][d] / a[i][i]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Squared error `(xᵀβ − y)²`.
    Linear,
    /// Cross-entropy with a logistic link.
    Logistic,
}

impl Model {
    fn loss(self, row: &[f64], y: f64, beta: &[f64]) -> f64 {
        let z = dot(row, beta);
        match self {
            Model::Linear => (z - y).powi(2),
            Model::Logistic => {
                // log(1 + e^z) − yz, stably
                let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                softplus - y * z
            }
        }
    }

    fn gradient(self, row: &[f64], y: f64, beta: &[f64], out: &mut [f64]) {
        let z = dot(row, beta);
        let r = match self {
            Model::Linear => 2.0 * (z - y),
            Model::Logistic => sigmoid(z) - y,
        };
        for (o, x) in out.iter_mut().zip(row) {
            *o = r * x;
        }
    }

    pub fn mean_loss(self, data: &Dataset, beta: &[f64]) -> f64 {
        data.x.iter().zip(&data.y).map(|(r, &y)| self.loss(r, y, beta)).sum::<f64>() / data.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub scheme: SamplingScheme,
    pub eps_prime_per_iter: f64,
    pub delta_base: f64,
    pub clip_c: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    #[serde(default = "classical")]
    pub calibration: Calibration,
    #[serde(default)]
    pub sensitivity_denominator: SensitivityDenominator,
    /// Use this noise scale instead of calibrating one (e.g. 0 for plain SGD).
    #[serde(default)]
    pub sigma_override: Option<f64>,
}

fn classical() -> Calibration {
    Calibration::Classical
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        check_positive("eps_prime_per_iter", self.eps_prime_per_iter)?;
        check_open_unit("delta_base", self.delta_base)?;
        check_positive("clip_c", self.clip_c)?;
        check_positive("learning_rate", self.learning_rate)?;
        if self.iterations == 0 {
            return Err(Error::param("iterations", "must be at least 1"));
        }
        if let Some(s) = self.sigma_override {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::param("sigma_override", format!("must be finite and nonnegative, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgdRun {
    pub beta_hat: Vec<f64>,
    /// Full-data training loss after each iteration.
    pub loss_trace: Vec<f64>,
    pub sigma_used: f64,
    pub eps_base: f64,
    /// `ε′` recomputed from `eps_base`; equals the configured budget.
    pub eps_prime: f64,
    pub delta_base: f64,
    pub delta_prime_per_iter: f64,
    pub calibration: Calibration,
}

const DIVERGENCE: f64 = 1e6;

/// DP-SGD on a linear model with squared loss.
pub fn run_dpsgd_linear(config: &SgdConfig, data: &Dataset) -> Result<SgdRun> {
    run_dpsgd(config, data, Model::Linear)
}

/// DP-SGD: subsample, clip per-record gradients to norm `C`, add
/// `(|Y|/m)·N(0, (mσ)²I)` to their sum, divide by `|Y|`, step.
pub fn run_dpsgd(config: &SgdConfig, data: &Dataset, model: Model) -> Result<SgdRun> {
    config.validate()?;
    let scheme = &config.scheme;
    if data.len() as u64 != scheme.n() {
        return Err(Error::param("data", format!("has {} rows but the scheme expects n = {}", data.len(), scheme.n())));
    }
    let d = data.x.first().map(Vec::len).unwrap_or(0);
    if d == 0 {
        return Err(Error::param("data", "needs at least one feature column"));
    }
    let eta_value = eta(scheme)?;
    let eps_base = deamplify_epsilon(eta_value, config.eps_prime_per_iter)?;
    let sensitivity = config.clip_c / config.sensitivity_denominator.value(scheme);
    let sigma = match config.sigma_override {
        Some(s) => s,
        None => calibrate_sigma(Family::Gaussian, config.delta_base, eps_base, sensitivity, config.calibration)?,
    };
    let delta_prime = if sigma > 0.0 {
        amplify_delta(scheme, &MechanismSpec::gaussian(sensitivity / sigma)?, eps_base)?
    } else {
        1.0
    };
    let m_nominal = scheme.expected_size();
    let mut rng = trial_rng(config.seed, 0);
    let mut beta = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut sum = vec![0.0; d];
    let mut loss_trace = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let ms = draw_with(scheme, &mut rng);
        sum.iter_mut().for_each(|s| *s = 0.0);
        for &(i, count) in ms.entries() {
            model.gradient(&data.x[i], data.y[i], &beta, &mut grad);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            let scale = (norm / config.clip_c).max(1.0);
            for (s, g) in sum.iter_mut().zip(&grad) {
                let clipped = g / scale;
                *s += count as f64 * clipped;
            }
            debug_assert!(norm / scale <= config.clip_c * (1.0 + 1e-12));
        }
        let size = ms.total() as f64;
        for (b, s) in beta.iter_mut().zip(&sum) {
            let z: f64 = StandardNormal.sample(&mut rng);
            let step = if size > 0.0 {
                let noise = (size / m_nominal) * (m_nominal * sigma * z);
                (s + noise) / size
            } else {
                sigma * z
            };
            *b -= config.learning_rate * step;
        }
        let loss = model.mean_loss(data, &beta);
        if loss.is_nan() || loss > DIVERGENCE {
            return Err(Error::Diverged { iteration: it, loss });
        }
        loss_trace.push(loss);
    }
    Ok(SgdRun {
        beta_hat: beta,
        loss_trace,
        sigma_used: sigma,
        eps_base,
        eps_prime: amplify_epsilon(eta_value, eps_base)?,
        delta_base: config.delta_base,
        delta_prime_per_iter: delta_prime,
        calibration: config.calibration,
    })
}

/// Root mean squared prediction error of a linear model.
pub fn rmse(data: &Dataset, beta: &[f64]) -> f64 {
    (Model::Linear.mean_loss(data, beta)).sqrt()
}

/// Classification accuracy of a logistic model at threshold ½.
pub fn accuracy(data: &Dataset, beta: &[f64]) -> f64 {
    let hits = data.x.iter().zip(&data.y).filter(|(r, &y)| (dot(r, beta) > 0.0) == (y > 0.5)).count();
    hits as f64 / data.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub scheme: SamplingScheme,
    /// Number of bootstrap subsamples.
    pub t_boot: usize,
    /// Data are clamped to `[lower, upper]` before any statistic is taken.
    pub bounds: (f64, f64),
    pub eps_prime: f64,
    pub delta_base: f64,
    pub seed: u64,
    #[serde(default = "classical")]
    pub calibration: Calibration,
    #[serde(default)]
    pub sensitivity_denominator: SensitivityDenominator,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.t_boot == 0 {
            return Err(Error::param("t_boot", "must be at least 1"));
        }
        let (l, u) = self.bounds;
        if !(l.is_finite() && u.is_finite() && l < u) {
            return Err(Error::param("bounds", format!("need finite lower < upper, got ({l}, {u})")));
        }
        check_positive("eps_prime", self.eps_prime)?;
        check_open_unit("delta_base", self.delta_base)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapRun {
    /// Average of the sanitized subsample means.
    pub pp_mean: f64,
    /// Average of the sanitized subsample variances.
    pub pp_var: f64,
    pub sigma_mean: f64,
    pub sigma_var: f64,
    pub eps_base: f64,
    pub delta_prime_mean: f64,
    pub delta_prime_var: f64,
}

/// Privacy-preserving mean and variance by subsampling bootstrap.
///
/// Sensitivities are `(U − L)/d` for the mean and `(U − L)²/d` for the
/// variance, with `d` chosen by `sensitivity_denominator`.
pub fn run_bootstrap(config: &BootstrapConfig, data: &[f64]) -> Result<BootstrapRun> {
    config.validate()?;
    let scheme = &config.scheme;
    if data.len() as u64 != scheme.n() {
        return Err(Error::param("data", format!("has {} values but the scheme expects n = {}", data.len(), scheme.n())));
    }
    let (lo, hi) = config.bounds;
    let clamped: Vec<f64> = data.iter().map(|x| x.clamp(lo, hi)).collect();
    let denom = config.sensitivity_denominator.value(scheme);
    let width = hi - lo;
    let mean_scale = noise_scale(scheme, config.eps_prime, config.delta_base, width / denom, config.calibration)?;
    let var_scale = noise_scale(scheme, config.eps_prime, config.delta_base, width * width / denom, config.calibration)?;
    let mut rng = trial_rng(config.seed, 0);
    let (mut mean_acc, mut var_acc) = (0.0, 0.0);
    for _ in 0..config.t_boot {
        let ms = draw_with(scheme, &mut rng);
        let size = ms.total() as f64;
        let (mean, var) = if size == 0.0 {
            (0.5 * (lo + hi), 0.0)
        } else {
            let mean = ms.entries().iter().map(|&(i, c)| c as f64 * clamped[i]).sum::<f64>() / size;
            let ss = ms.entries().iter().map(|&(i, c)| c as f64 * (clamped[i] - mean).powi(2)).sum::<f64>();
            (mean, if size > 1.0 { ss / (size - 1.0) } else { 0.0 })
        };
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        mean_acc += mean + mean_scale.sigma * z1;
        var_acc += var + var_scale.sigma * z2;
    }
    let t = config.t_boot as f64;
    Ok(BootstrapRun {
        pp_mean: mean_acc / t,
        pp_var: var_acc / t,
        sigma_mean: mean_scale.sigma,
        sigma_var: var_scale.sigma,
        eps_base: mean_scale.eps_base,
        delta_prime_mean: mean_scale.delta_prime,
        delta_prime_var: var_scale.delta_prime,
    })
}

/// Seed for sub-task `(a, b)` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut rng = trial_rng(seed, a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b);
    rng.next_u64()
}

/// Experiment 1: repeated bootstrap estimation on fresh `N(0, 1)` data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment1Config {
    pub n: u64,
    pub m: u64,
    /// Stage-one sizes for the two-stage schemes.
    pub b_values: Vec<u64>,
    pub t_boot: usize,
    pub bounds: (f64, f64),
    pub eps_prime: f64,
    /// Defaults to `1/n`.
    #[serde(default)]
    pub delta_base: Option<f64>,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default = "classical")]
    pub calibration: Calibration,
    #[serde(default)]
    pub sensitivity_denominator: SensitivityDenominator,
}

impl Experiment1Config {
    /// The standard desk-scale setting with `repeats` repetitions.
    pub fn standard(repeats: usize, seed: u64) -> Self {
        Self {
            n: 300,
            m: 30,
            b_values: vec![10, 20, 30, 50, 100],
            t_boot: 500,
            bounds: (-4.0, 4.0),
            eps_prime: 0.1,
            delta_base: None,
            repeats,
            seed,
            calibration: Calibration::Classical,
            sensitivity_denominator: SensitivityDenominator::N,
        }
    }

    pub fn schemes(&self) -> Vec<SamplingScheme> {
        let (n, m) = (self.n, self.m);
        let mut s = vec![
            SamplingScheme::Poisson { n, gamma: m as f64 / n as f64 },
            SamplingScheme::Wor { n, m },
            SamplingScheme::Wr { n, m },
        ];
        s.extend(self.b_values.iter().map(|&b| SamplingScheme::MustOw { n, b, m }));
        s.extend(self.b_values.iter().map(|&b| SamplingScheme::MustWw { n, b, m }));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment1Row {
    pub repeat: usize,
    pub scheme: SamplingScheme,
    pub run: BootstrapRun,
}

pub fn run_experiment1(cfg: &Experiment1Config) -> Result<Vec<Experiment1Row>> {
    let schemes = cfg.schemes();
    let delta = cfg.delta_base.unwrap_or(1.0 / cfg.n as f64);
    let jobs: Vec<(usize, usize)> = (0..cfg.repeats).flat_map(|r| (0..schemes.len()).map(move |s| (r, s))).collect();
    jobs.par_iter()
        .map(|&(repeat, si)| {
            let data = make_synthetic(SyntheticKind::GaussianUnivariate, cfg.n as usize, derive_seed(cfg.seed, 1, repeat as u64))?;
            let bc = BootstrapConfig {
                scheme: schemes[si],
                t_boot: cfg.t_boot,
                bounds: cfg.bounds,
                eps_prime: cfg.eps_prime,
                delta_base: delta,
                seed: derive_seed(cfg.seed, 2 + si as u64, repeat as u64),
                calibration: cfg.calibration,
                sensitivity_denominator: cfg.sensitivity_denominator,
            };
            Ok(Experiment1Row { repeat, scheme: schemes[si], run: run_bootstrap(&bc, &data.y)? })
        })
        .collect()
}

/// Experiment 2: DP-SGD linear regression on fresh synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment2Config {
    pub n: u64,
    pub b: u64,
    pub m: u64,
    pub clip_c: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub eps_prime: f64,
    /// Defaults to `1/n`.
    #[serde(default)]
    pub delta_base: Option<f64>,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default = "classical")]
    pub calibration: Calibration,
    #[serde(default)]
    pub sensitivity_denominator: SensitivityDenominator,
}

impl Experiment2Config {
    pub fn standard(eps_prime: f64, repeats: usize, seed: u64) -> Self {
        Self {
            n: 1000,
            b: 200,
            m: 100,
            clip_c: 3.0,
            learning_rate: 0.04,
            iterations: 200,
            eps_prime,
            delta_base: None,
            repeats,
            seed,
            calibration: Calibration::Classical,
            sensitivity_denominator: SensitivityDenominator::N,
        }
    }

    pub fn schemes(&self) -> Vec<SamplingScheme> {
        let (n, b, m) = (self.n, self.b, self.m);
        vec![
            SamplingScheme::Poisson { n, gamma: m as f64 / n as f64 },
            SamplingScheme::Wor { n, m },
            SamplingScheme::Wr { n, m },
            SamplingScheme::MustWo { n, b, m },
            SamplingScheme::MustOw { n, b, m },
            SamplingScheme::MustWw { n, b, m },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment2Row {
    pub repeat: usize,
    pub scheme: SamplingScheme,
    pub sigma: f64,
    pub delta_prime: f64,
    pub final_loss: f64,
    /// Prediction RMSE on an independent test set of the same size.
    pub rmse: f64,
    pub beta_hat: Vec<f64>,
}

pub fn run_experiment2(cfg: &Experiment2Config) -> Result<Vec<Experiment2Row>> {
    let schemes = cfg.schemes();
    let delta = cfg.delta_base.unwrap_or(1.0 / cfg.n as f64);
    let jobs: Vec<(usize, usize)> = (0..cfg.repeats).flat_map(|r| (0..schemes.len()).map(move |s| (r, s))).collect();
    jobs.par_iter()
        .map(|&(repeat, si)| {
            let r = repeat as u64;
            let train = make_synthetic(SyntheticKind::LinearRegression, cfg.n as usize, derive_seed(cfg.seed, 1, r))?;
            let test = make_synthetic(SyntheticKind::LinearRegression, cfg.n as usize, derive_seed(cfg.seed, 2, r))?;
            let sc = SgdConfig {
                scheme: schemes[si],
                eps_prime_per_iter: cfg.eps_prime,
                delta_base: delta,
                clip_c: cfg.clip_c,
                learning_rate: cfg.learning_rate,
                iterations: cfg.iterations,
                seed: derive_seed(cfg.seed, 3 + si as u64, r),
                calibration: cfg.calibration,
                sensitivity_denominator: cfg.sensitivity_denominator,
                sigma_override: None,
            };
            let run = run_dpsgd_linear(&sc, &train)?;
            Ok(Experiment2Row {
                repeat,
                scheme: schemes[si],
                sigma: run.sigma_used,
                delta_prime: run.delta_prime_per_iter,
                final_loss: *run.loss_trace.last().expect("at least one iteration"),
                rmse: rmse(&test, &run.beta_hat),
                beta_hat: run.beta_hat,
            })
        })
        .collect()
}
