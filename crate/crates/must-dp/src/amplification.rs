//! Closed-form privacy amplification by subsampling.
//!
//! A scheme turns an `(ε, δ)`-DP mechanism into an `(ε′, δ′)`-DP one with
//! `ε′ = log(1 + η(e^ε − 1))`, where `η` is the probability that a fixed
//! record ends up in the subsample. For schemes that can repeat a record,
//! `δ′` mixes group profiles `δ_u` with the multiplicity weights `w_u`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::mechanisms::{group_profile, profile, MechanismSpec};
use crate::numerics::binomial::{ln_binom_pmf, ln_hyper_pmf};
use crate::numerics::sum::NeumaierSum;
use crate::scheme::{Neighboring, SamplingScheme};

/// `1 − (1 − p)^k`, accurate for tiny `p`.
fn one_minus_pow(p: f64, k: u64) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    -((k as f64) * (-p).ln_1p()).exp_m1()
}

/// Visits `(j, Bin(j; b, 1/n))` for `j = 1..=b`, stopping once past the mode
/// when the terms fall below 1e-18 of what has been seen.
fn stage_one_wr_weights(n: u64, b: u64, mut visit: impl FnMut(u64, f64)) {
    let p = 1.0 / n as f64;
    let q = (n - 1) as f64 / n as f64;
    let mode = ((b + 1) as f64 * p).floor() as u64;
    let mut seen = 0.0;
    for j in 1..=b {
        let w = ln_binom_pmf(j, b, p, q).exp();
        seen += w;
        if j > mode && w < 1e-18 * seen {
            break;
        }
        if w > 0.0 {
            visit(j, w);
        }
    }
}

/// Probability that a given record appears in the subsample.
pub fn eta(scheme: &SamplingScheme) -> Result<f64> {
    scheme.validate()?;
    Ok(match *scheme {
        SamplingScheme::Poisson { gamma, .. } => gamma,
        SamplingScheme::Wor { n, m } => m as f64 / n as f64,
        SamplingScheme::Wr { n, m } => one_minus_pow(1.0 / n as f64, m),
        SamplingScheme::MustOw { n, b, m } => b as f64 / n as f64 * one_minus_pow(1.0 / b as f64, m),
        SamplingScheme::MustWw { n, b, m } => {
            let mut acc = NeumaierSum::default();
            stage_one_wr_weights(n, b, |j, w| acc.add(w * one_minus_pow(j as f64 / b as f64, m)));
            acc.value()
        }
        SamplingScheme::MustWo { n, b, m } => {
            // Stage two misses all j copies with probability C(b−j, m)/C(b, m).
            let mut acc = NeumaierSum::default();
            stage_one_wr_weights(n, b, |j, w| {
                let miss = ln_hyper_pmf(0, j, b - j, m).exp();
                acc.add(w * (1.0 - miss));
            });
            acc.value()
        }
    })
}

/// `w_u` = probability that a given record appears exactly `u` times,
/// for `u = 1..=m` (index 0 holds `u = 1`).
///
/// The MUSTwo weights are computed from the two-stage (binomial ×
/// hypergeometric) expression, not from the equivalent WR closed form, so
/// that the equivalence can be tested.
pub fn multiplicity_weights(scheme: &SamplingScheme) -> Result<Vec<f64>> {
    scheme.validate()?;
    let mut w = match *scheme {
        SamplingScheme::Poisson { .. } | SamplingScheme::Wor { .. } => {
            return Err(Error::Unsupported {
                scheme: scheme.name(),
                reason: "records appear at most once, so there are no multiplicity weights",
            })
        }
        SamplingScheme::Wr { n, m } => {
            let (p, q) = (1.0 / n as f64, (n - 1) as f64 / n as f64);
            (1..=m).map(|u| ln_binom_pmf(u, m, p, q).exp()).collect::<Vec<_>>()
        }
        SamplingScheme::MustOw { n, b, m } => {
            let (p, q) = (1.0 / b as f64, (b - 1) as f64 / b as f64);
            let lead = (b as f64 / n as f64).ln();
            (1..=m).map(|u| (lead + ln_binom_pmf(u, m, p, q)).exp()).collect()
        }
        SamplingScheme::MustWw { n, b, m } => {
            let mut acc = vec![NeumaierSum::default(); m as usize];
            stage_one_wr_weights(n, b, |j, wj| {
                let (p, q) = (j as f64 / b as f64, (b - j) as f64 / b as f64);
                let lwj = wj.ln();
                for u in 1..=m {
                    acc[(u - 1) as usize].add((lwj + ln_binom_pmf(u, m, p, q)).exp());
                }
            });
            acc.iter().map(NeumaierSum::value).collect()
        }
        SamplingScheme::MustWo { n, b, m } => {
            let mut acc = vec![NeumaierSum::default(); m as usize];
            stage_one_wr_weights(n, b, |j, wj| {
                let lwj = wj.ln();
                for u in 1..=m.min(j) {
                    acc[(u - 1) as usize].add((lwj + ln_hyper_pmf(u, j, b - j, m)).exp());
                }
            });
            acc.iter().map(NeumaierSum::value).collect()
        }
    };
    for x in &mut w {
        *x = x.clamp(0.0, 1.0);
    }
    Ok(w)
}

fn check_eta(eta_value: f64) -> Result<()> {
    check_positive("eta", eta_value)?;
    if eta_value > 1.0 {
        return Err(Error::param("eta", format!("must not exceed 1, got {eta_value}")));
    }
    Ok(())
}

/// `ε′ = log(1 + η(e^ε − 1))`.
pub fn amplify_epsilon(eta_value: f64, epsilon: f64) -> Result<f64> {
    check_eta(eta_value)?;
    check_nonnegative("epsilon", epsilon)?;
    if eta_value == 1.0 {
        return Ok(epsilon);
    }
    Ok((eta_value * epsilon.exp_m1()).ln_1p())
}

/// Inverse of [`amplify_epsilon`]: the base `ε` that amplifies to `ε′`.
pub fn deamplify_epsilon(eta_value: f64, eps_prime: f64) -> Result<f64> {
    check_eta(eta_value)?;
    check_nonnegative("eps_prime", eps_prime)?;
    if eta_value == 1.0 {
        return Ok(eps_prime);
    }
    Ok((eps_prime.exp_m1() / eta_value).ln_1p())
}

/// `δ′` of the subsampled mechanism at the base `ε`.
pub fn amplify_delta(scheme: &SamplingScheme, mech: &MechanismSpec, epsilon: f64) -> Result<f64> {
    check_nonnegative("epsilon", epsilon)?;
    if !scheme.produces_multisets() {
        return Ok((eta(scheme)? * profile(mech, epsilon)?).clamp(0.0, 1.0));
    }
    let w = multiplicity_weights(scheme)?;
    weighted_group_delta(&w, mech, epsilon)
}

fn weighted_group_delta(w: &[f64], mech: &MechanismSpec, epsilon: f64) -> Result<f64> {
    let mut acc = NeumaierSum::default();
    for (i, &wu) in w.iter().enumerate() {
        if wu > 0.0 {
            acc.add(wu * group_profile(mech, i as u64 + 1, epsilon)?);
        }
    }
    Ok(acc.value().clamp(0.0, 1.0))
}

/// Quadrant of the aligned privacy profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PaClass {
    /// ε shrinks and δ shrinks.
    Strong,
    /// ε shrinks, δ grows.
    WeakI,
    /// ε grows, δ shrinks.
    WeakII,
    /// Both grow.
    Dilution,
}

impl PaClass {
    pub fn name(self) -> &'static str {
        match self {
            PaClass::Strong => "strong",
            PaClass::WeakI => "weak_i",
            PaClass::WeakII => "weak_ii",
            PaClass::Dilution => "dilution",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaClassification {
    pub class: PaClass,
    /// Set when a coordinate was within 1e-15 of its boundary and was
    /// resolved towards the favourable side.
    pub on_boundary: bool,
}

const BOUNDARY_TOL: f64 = 1e-15;

/// Classify a point `(ε′/ε, δ′ − δ)` into its amplification quadrant.
pub fn classify_pa(eps_ratio: f64, delta_gap: f64) -> PaClassification {
    let eps_edge = (eps_ratio - 1.0).abs() <= BOUNDARY_TOL;
    let delta_edge = delta_gap.abs() <= BOUNDARY_TOL;
    let eps_shrinks = eps_ratio < 1.0 || eps_edge;
    let delta_shrinks = delta_gap < 0.0 || delta_edge;
    let class = match (eps_shrinks, delta_shrinks) {
        (true, true) => PaClass::Strong,
        (true, false) => PaClass::WeakI,
        (false, true) => PaClass::WeakII,
        (false, false) => PaClass::Dilution,
    };
    PaClassification { class, on_boundary: eps_edge || delta_edge }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedPoint {
    pub epsilon: f64,
    pub eps_prime: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub eps_ratio: f64,
    pub delta_gap: f64,
    pub pa_class: PaClass,
    pub on_boundary: bool,
    pub neighboring: Neighboring,
}

/// Evaluate the aligned privacy profile on an increasing grid of base `ε`.
pub fn aligned_profile(scheme: &SamplingScheme, mech: &MechanismSpec, eps_grid: &[f64]) -> Result<Vec<AlignedPoint>> {
    for (i, &e) in eps_grid.iter().enumerate() {
        check_positive("eps_grid", e)?;
        if i > 0 && e <= eps_grid[i - 1] {
            return Err(Error::param("eps_grid", "must be strictly increasing"));
        }
    }
    let eta_value = eta(scheme)?;
    let weights = if scheme.produces_multisets() { Some(multiplicity_weights(scheme)?) } else { None };
    eps_grid
        .par_iter()
        .map(|&epsilon| {
            let eps_prime = amplify_epsilon(eta_value, epsilon)?;
            let delta = profile(mech, epsilon)?;
            let delta_prime = match &weights {
                Some(w) => weighted_group_delta(w, mech, epsilon)?,
                None => (eta_value * delta).clamp(0.0, 1.0),
            };
            let eps_ratio = eps_prime / epsilon;
            let delta_gap = delta_prime - delta;
            let c = classify_pa(eps_ratio, delta_gap);
            Ok(AlignedPoint {
                epsilon,
                eps_prime,
                delta,
                delta_prime,
                eps_ratio,
                delta_gap,
                pa_class: c.class,
                on_boundary: c.on_boundary,
                neighboring: scheme.neighboring(),
            })
        })
        .collect()
}

/// One cell of an `(b, m)` sweep at fixed `n` and base `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourCell {
    pub b: u64,
    pub m: u64,
    pub eta: f64,
    pub eps_ratio: f64,
    pub delta_gap: f64,
}

/// Sweep a two-stage scheme family over `b ∈ b_range`, `m ∈ m_range`.
/// `make` builds the scheme for a given `(b, m)`. Cells come back in
/// row-major order (`b` outer).
pub fn contour(
    make: impl Fn(u64, u64) -> SamplingScheme + Sync,
    b_range: std::ops::RangeInclusive<u64>,
    m_range: std::ops::RangeInclusive<u64>,
    mech: &MechanismSpec,
    epsilon: f64,
) -> Result<Vec<ContourCell>> {
    let cells: Vec<(u64, u64)> = b_range.flat_map(|b| m_range.clone().map(move |m| (b, m))).collect();
    let delta = profile(mech, epsilon)?;
    cells
        .par_iter()
        .map(|&(b, m)| {
            let s = make(b, m);
            let e = eta(&s)?;
            let eps_prime = amplify_epsilon(e, epsilon)?;
            let delta_prime = amplify_delta(&s, mech, epsilon)?;
            Ok(ContourCell { b, m, eta: e, eps_ratio: eps_prime / epsilon, delta_gap: delta_prime - delta })
        })
        .collect()
}
