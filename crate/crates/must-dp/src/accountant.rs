//! Fourier accountant: `k`-fold composition of a discretized PLD.
//!
//! The `k`-fold PLD is the `k`-fold convolution of the single-release PLD.
//! On the periodic grid this is one FFT, an elementwise `k`-th power and an
//! inverse FFT. Running the same pipeline on the lower and upper masses
//! `c⁻`, `c⁺` gives strict bounds on `δ(ε)` (up to the approximation of the
//! interval extrema, see [`PldDiagnostics`](crate::pld::PldDiagnostics)).
//!
//! For Gaussian base mechanisms the PLD has no atom at `+∞`, so the usual
//! `1 − (1 − δ(∞))^k` term vanishes and is not computed.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{check_nonnegative, Error, Result};
use crate::numerics::sum::NeumaierSum;
use crate::pld::DiscretizedPld;

/// Negative FFT outputs above this fraction of the maximum are round-off.
const ROUNDOFF_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AccountantDiagnostics {
    pub grid_r: usize,
    pub trunc_l: f64,
    /// `1 − Σ c_i` of the single-release PLD.
    pub mass_defect: f64,
    /// Total magnitude of negative intensities set to zero after the inverse
    /// FFT (all three pipelines).
    pub floored_mass: f64,
    /// Negative intensities larger than round-off (`> 1e-14·max`); nonzero
    /// values point at an ill-conditioned grid.
    pub large_negative_count: usize,
    pub nonfinite_flag: bool,
    /// Set when rounding left the bounds out of order and they were widened
    /// to contain the approximation.
    pub bounds_widened: bool,
    pub extrema: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccountantResult {
    pub epsilon: f64,
    pub k: u64,
    pub delta_lower: f64,
    pub delta_approx: f64,
    pub delta_upper: f64,
    pub diagnostics: AccountantDiagnostics,
}

/// The `k`-fold composed masses, reusable across many `ε`.
#[derive(Debug, Clone)]
pub struct ComposedPld {
    pub k: u64,
    pub trunc_l: f64,
    pub dx: f64,
    pub u: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    diagnostics: AccountantDiagnostics,
}

/// Exchange the front and back halves (the `H` permutation).
fn half_swap<T: Copy>(v: &[T]) -> Vec<T> {
    let h = v.len() / 2;
    v[h..].iter().chain(&v[..h]).copied().collect()
}

struct Convolved {
    u: Vec<f64>,
    floored: f64,
    large_negative: usize,
}

fn self_convolve(c: &[f64], k: u64, planner: &mut FftPlanner<f64>) -> Result<Convolved> {
    let r = c.len();
    let mut buf: Vec<Complex<f64>> = half_swap(c).into_iter().map(|x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(r).process(&mut buf);
    let kf = k as f64;
    for z in &mut buf {
        // Polar form keeps the phase error linear in k.
        let (mag, arg) = z.to_polar();
        *z = Complex::from_polar(mag.powf(kf), arg * kf);
    }
    planner.plan_fft_inverse(r).process(&mut buf);
    let scale = 1.0 / r as f64;
    let mut u: Vec<f64> = buf.iter().map(|z| z.re * scale).collect();
    if let Some(i) = u.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { stage: "k-fold convolution", index: i });
    }
    u = half_swap(&u);
    let max = u.iter().copied().fold(0.0, f64::max);
    let mut floored = 0.0;
    let mut large_negative = 0;
    for x in &mut u {
        if *x < 0.0 {
            if -*x > ROUNDOFF_FLOOR * max {
                large_negative += 1;
            }
            floored -= *x;
            *x = 0.0;
        }
    }
    Ok(Convolved { u, floored, large_negative })
}

impl ComposedPld {
    /// Convolve `pld` with itself `k` times.
    pub fn new(pld: &DiscretizedPld, k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if let Some(i) = pld.diagnostics.first_nonfinite {
            return Err(Error::NonFinite { stage: "PLD masses", index: i });
        }
        let mut planner = FftPlanner::new();
        let a = self_convolve(&pld.c, k, &mut planner)?;
        let lo = self_convolve(&pld.c_minus, k, &mut planner)?;
        let hi = self_convolve(&pld.c_plus, k, &mut planner)?;
        let diagnostics = AccountantDiagnostics {
            grid_r: pld.grid_r,
            trunc_l: pld.trunc_l,
            mass_defect: pld.diagnostics.mass_defect,
            floored_mass: a.floored + lo.floored + hi.floored,
            large_negative_count: a.large_negative + lo.large_negative + hi.large_negative,
            nonfinite_flag: false,
            bounds_widened: false,
            extrema: pld.diagnostics.extrema,
        };
        Ok(Self { k, trunc_l: pld.trunc_l, dx: pld.dx, u: a.u, u_minus: lo.u, u_plus: hi.u, diagnostics })
    }

    fn grid_point(&self, i: usize) -> f64 {
        -self.trunc_l + i as f64 * self.dx
    }

    /// First index whose grid point exceeds `ε`.
    fn tail_start(&self, epsilon: f64) -> usize {
        let mut i = ((epsilon + self.trunc_l) / self.dx).floor().max(0.0) as usize;
        while i < self.u.len() && self.grid_point(i) <= epsilon {
            i += 1;
        }
        while i > 0 && self.grid_point(i - 1) > epsilon {
            i -= 1;
        }
        i
    }

    fn tail(&self, u: &[f64], start: usize, epsilon: f64) -> f64 {
        let mut acc = NeumaierSum::default();
        for (j, &x) in u.iter().enumerate().skip(start) {
            acc.add(-(epsilon - self.grid_point(j)).exp_m1() * x);
        }
        acc.value().clamp(0.0, 1.0)
    }

    /// `δ(ε)` with bounds after `k` compositions.
    pub fn delta(&self, epsilon: f64) -> Result<AccountantResult> {
        check_nonnegative("epsilon", epsilon)?;
        let limit = self.trunc_l - self.dx;
        if epsilon >= limit {
            return Err(Error::EpsilonBeyondGrid { epsilon, limit });
        }
        let start = self.tail_start(epsilon);
        let approx = self.tail(&self.u, start, epsilon);
        let mut lower = self.tail(&self.u_minus, start, epsilon);
        let mut upper = self.tail(&self.u_plus, start, epsilon);
        let mut diagnostics = self.diagnostics.clone();
        if lower > approx || upper < approx {
            diagnostics.bounds_widened = true;
            lower = lower.min(approx);
            upper = upper.max(approx);
        }
        Ok(AccountantResult { epsilon, k: self.k, delta_lower: lower, delta_approx: approx, delta_upper: upper, diagnostics })
    }
}

/// `δ(ε)` and its bounds after `k`-fold composition of `pld`.
pub fn compose(pld: &DiscretizedPld, k: u64, epsilon: f64) -> Result<AccountantResult> {
    if epsilon >= pld.trunc_l - pld.dx {
        return Err(Error::EpsilonBeyondGrid { epsilon, limit: pld.trunc_l - pld.dx });
    }
    ComposedPld::new(pld, k)?.delta(epsilon)
}

/// Evaluate every `(k, ε)` cell; rows follow `k_list`, columns `eps_grid`.
/// The convolution is shared across the `ε` of a row. Failures stay in
/// their cell.
pub fn compose_many(pld: &DiscretizedPld, k_list: &[u64], eps_grid: &[f64]) -> Vec<Vec<Result<AccountantResult>>> {
    use rayon::prelude::*;
    k_list
        .par_iter()
        .map(|&k| match ComposedPld::new(pld, k) {
            Ok(composed) => eps_grid.iter().map(|&e| composed.delta(e)).collect(),
            Err(e) => eps_grid.iter().map(|_| Err(e.clone())).collect(),
        })
        .collect()
}
