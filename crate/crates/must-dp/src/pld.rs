//! Privacy loss distributions of subsampled Gaussian mechanisms.
//!
//! Every model here compares two Gaussian mixtures with common scale `σ`
//! (sensitivity-1 units): `f_X = Σ a_i N(μ_i, σ²)` and
//! `f_X′ = Σ a′_j N(μ′_j, σ²)`. The privacy loss of an output `t` is
//! `L(t) = log f_X(t)/f_X′(t)`, strictly increasing in `t`, and the PLD is
//! the law of `L(T)` for `T ~ f_X`, with density
//! `ω(s) = f_X(L⁻¹(s))·(L⁻¹)′(s)`.
//!
//! | scheme            | `f_X`                         | `f_X′`                         |
//! |-------------------|-------------------------------|--------------------------------|
//! | Poisson(q)        | `qN(1) + (1−q)N(0)`           | `N(0)`                         |
//! | WOR, `q = m/n`    | `qN(1) + (1−q)N(0)`           | `qN(−1) + (1−q)N(0)`           |
//! | WR, MUST          | `Σ_l w_l N(l)`                | `Σ_l w_l N(−l)`                |
//!
//! where `w_l` is the probability that the differing record appears `l`
//! times. Poisson and WOR invert in closed form; the multiset schemes use a
//! safeguarded Newton iteration.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::amplification::{eta, multiplicity_weights};
use crate::error::{check_finite, check_positive, Error, Result};
use crate::numerics::binomial::ln_binom_pmf;
use crate::numerics::quad::integrate_pieces;
use crate::numerics::sum::NeumaierSum;
use crate::report::fmt_g;
use crate::scheme::SamplingScheme;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// Mixture components lighter than `max − TRUNCATE` (in log-weight) are dropped.
const TRUNCATE: f64 = 60.0;
const NEWTON_MAX_ITER: usize = 200;
const NEWTON_TOL: f64 = 1e-12;
/// Grid points per warm-started Newton chunk. Fixed so that results do not
/// depend on the number of worker threads.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Inverse {
    Poisson { q: f64 },
    Wor { q: f64 },
    Newton,
}

/// A subsampled Gaussian mechanism viewed through its privacy loss.
#[derive(Debug, Clone)]
pub struct PrivacyLossModel {
    scheme: SamplingScheme,
    sigma: f64,
    inverse: Inverse,
    /// `(μ_i, ln a_i)` of `f_X`.
    num: Vec<(f64, f64)>,
    /// `(μ′_j, ln a′_j)` of `f_X′`.
    den: Vec<(f64, f64)>,
    /// Image of `L`: `(lim_{t→−∞} L, lim_{t→∞} L)`.
    image: (f64, f64),
    m_eff: f64,
}

fn truncate(mut comps: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let max = comps.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    comps.retain(|c| c.1.is_finite() && c.1 >= max - TRUNCATE);
    comps
}

/// Limits of `L` at ±∞ for the given mixtures.
fn image_of(num: &[(f64, f64)], den: &[(f64, f64)]) -> (f64, f64) {
    let top = |c: &[(f64, f64)], hi: bool| {
        c.iter()
            .copied()
            .reduce(|a, b| if (b.0 > a.0) == hi && b.0 != a.0 { b } else { a })
            .expect("nonempty mixture")
    };
    let (nh, dh) = (top(num, true), top(den, true));
    let (nl, dl) = (top(num, false), top(den, false));
    let upper = if nh.0 > dh.0 { f64::INFINITY } else { nh.1 - dh.1 };
    let lower = if dl.0 < nl.0 { f64::NEG_INFINITY } else { nl.1 - dl.1 };
    (lower, upper)
}

impl PrivacyLossModel {
    /// Build the loss model of `scheme` composed with a Gaussian mechanism of
    /// noise scale `sigma` (sensitivity 1).
    pub fn new(scheme: SamplingScheme, sigma: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        scheme.validate()?;
        let (inverse, num, den) = match scheme {
            SamplingScheme::Poisson { gamma: q, .. } => {
                (Inverse::Poisson { q }, vec![(0.0, (-q).ln_1p()), (1.0, q.ln())], vec![(0.0, 0.0)])
            }
            SamplingScheme::Wor { n, m } => {
                let q = m as f64 / n as f64;
                if q == 1.0 {
                    (Inverse::Wor { q }, vec![(1.0, 0.0)], vec![(-1.0, 0.0)])
                } else {
                    let l0 = (-q).ln_1p();
                    (Inverse::Wor { q }, vec![(0.0, l0), (1.0, q.ln())], vec![(0.0, l0), (-1.0, q.ln())])
                }
            }
            _ => {
                let m = scheme.m().expect("fixed-size scheme");
                let ln_w: Vec<f64> = match scheme {
                    // Direct log-space weights avoid underflow in the far tail.
                    SamplingScheme::Wr { n, .. } | SamplingScheme::MustWo { n, .. } => {
                        let (p, q) = (1.0 / n as f64, (n - 1) as f64 / n as f64);
                        (0..=m).map(|l| ln_binom_pmf(l, m, p, q)).collect()
                    }
                    SamplingScheme::MustOw { n, b, .. } => {
                        let (p, q) = (1.0 / b as f64, (b - 1) as f64 / b as f64);
                        let lead = (b as f64 / n as f64).ln();
                        let absent = (-eta(&scheme)?).ln_1p();
                        std::iter::once(absent).chain((1..=m).map(|l| lead + ln_binom_pmf(l, m, p, q))).collect()
                    }
                    _ => {
                        let absent = (-eta(&scheme)?).ln_1p();
                        let w = multiplicity_weights(&scheme)?;
                        std::iter::once(absent).chain(w.iter().map(|x| x.ln())).collect()
                    }
                };
                let comps: Vec<(f64, f64)> = ln_w.iter().enumerate().map(|(l, &lw)| (l as f64, lw)).collect();
                let num = truncate(comps);
                let den = num.iter().map(|&(mu, lw)| (-mu, lw)).collect();
                (Inverse::Newton, num, den)
            }
        };
        Ok(Self::from_parts(scheme, sigma, inverse, num, den))
    }

    fn from_parts(scheme: SamplingScheme, sigma: f64, inverse: Inverse, num: Vec<(f64, f64)>, den: Vec<(f64, f64)>) -> Self {
        let image = image_of(&num, &den);
        let (mut s1, mut s0) = (NeumaierSum::default(), NeumaierSum::default());
        for &(mu, lw) in num.iter().filter(|c| c.0 > 0.0) {
            s1.add(mu * lw.exp());
            s0.add(lw.exp());
        }
        let m_eff = if s0.value() > 0.0 { s1.value() / s0.value() } else { 1.0 };
        Self { scheme, sigma, inverse, num, den, image, m_eff }
    }

    /// The model with the roles of the two datasets exchanged, expressed in
    /// the mirrored output `u = −t` so that its loss is again increasing.
    /// Its PLD is the law of `log f_X′(T′)/f_X(T′)` for `T′ ~ f_X′`.
    pub fn reversed(&self) -> Self {
        let mirror = |c: &[(f64, f64)]| c.iter().map(|&(mu, lw)| (-mu, lw)).collect::<Vec<_>>();
        let num = mirror(&self.den);
        let den = mirror(&self.num);
        let inverse = match self.inverse {
            // Mirroring a WOR pair gives back the same pair.
            Inverse::Wor { q } => Inverse::Wor { q },
            _ => Inverse::Newton,
        };
        Self::from_parts(self.scheme, self.sigma, inverse, num, den)
    }

    pub fn scheme(&self) -> &SamplingScheme {
        &self.scheme
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of mixture components kept after truncation, `(f_X, f_X′)`.
    pub fn components(&self) -> (usize, usize) {
        (self.num.len(), self.den.len())
    }

    /// `(inf L, sup L)`; Poisson has a finite lower end `log(1 − q)`.
    pub fn image(&self) -> (f64, f64) {
        self.image
    }

    fn log_mix(&self, comps: &[(f64, f64)], t: f64) -> (f64, f64) {
        // log Σ a exp((2tμ − μ²)/(2σ²)) and the softmax mean of μ.
        let s2 = self.sigma * self.sigma;
        let mut max = f64::NEG_INFINITY;
        for &(mu, lw) in comps {
            max = max.max(lw + (2.0 * t * mu - mu * mu) / (2.0 * s2));
        }
        let (mut z, mut zm) = (0.0, 0.0);
        for &(mu, lw) in comps {
            let e = (lw + (2.0 * t * mu - mu * mu) / (2.0 * s2) - max).exp();
            z += e;
            zm += e * mu;
        }
        (max + z.ln(), zm / z)
    }

    /// `L(t) = log f_X(t)/f_X′(t)`.
    pub fn loss_at(&self, t: f64) -> f64 {
        if let Inverse::Poisson { q } = self.inverse {
            if self.num.len() == 2 && self.den.len() == 1 {
                // log(q·e^{(2t−1)/(2σ²)} + 1 − q)
                let x = (2.0 * t - 1.0) / (2.0 * self.sigma * self.sigma);
                return if x > 0.0 {
                    x + q.ln() + ((1.0 - q) / q * (-x).exp()).ln_1p()
                } else {
                    (q * x.exp_m1()).ln_1p()
                };
            }
        }
        self.log_mix(&self.num, t).0 - self.log_mix(&self.den, t).0
    }

    /// `L′(t)`, analytically: `(E_num[μ] − E_den[μ′])/σ²`.
    pub fn loss_derivative(&self, t: f64) -> f64 {
        (self.log_mix(&self.num, t).1 - self.log_mix(&self.den, t).1) / (self.sigma * self.sigma)
    }

    fn ln_density(comps: &[(f64, f64)], sigma: f64, t: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for &(mu, lw) in comps {
            let z = (t - mu) / sigma;
            max = max.max(lw - 0.5 * z * z);
        }
        if max == f64::NEG_INFINITY {
            return max;
        }
        let mut acc = 0.0;
        for &(mu, lw) in comps {
            let z = (t - mu) / sigma;
            acc += (lw - 0.5 * z * z - max).exp();
        }
        max + acc.ln() - LN_SQRT_2PI - sigma.ln()
    }

    /// Output density under the dataset containing the record.
    pub fn density_x(&self, t: f64) -> f64 {
        Self::ln_density(&self.num, self.sigma, t).exp()
    }

    /// Output density under the neighbouring dataset.
    pub fn density_x_prime(&self, t: f64) -> f64 {
        Self::ln_density(&self.den, self.sigma, t).exp()
    }

    fn check_image(&self, s: f64) -> Result<()> {
        check_finite("s", s)?;
        let (lo, hi) = self.image;
        if s <= lo || s >= hi {
            let bound = if s <= lo { lo } else { hi };
            return Err(Error::OutOfDomain { s, lower: bound });
        }
        Ok(())
    }

    /// `t = L⁻¹(s)`.
    pub fn invert_loss(&self, s: f64) -> Result<f64> {
        self.check_image(s)?;
        match self.inverse {
            Inverse::Poisson { q } => Ok(self.poisson_inverse(q, s).0),
            Inverse::Wor { q } => Ok(self.wor_inverse(q, s).0),
            Inverse::Newton => self.newton(s, None),
        }
    }

    /// `L⁻¹(s)` by the generic safeguarded Newton iteration, even when a
    /// closed form exists. Used to cross-check the closed forms.
    pub fn invert_loss_newton(&self, s: f64) -> Result<f64> {
        self.check_image(s)?;
        self.newton(s, None)
    }

    fn poisson_inverse(&self, q: f64, s: f64) -> (f64, f64) {
        let s2 = self.sigma * self.sigma;
        let em1 = s.exp_m1();
        let t = s2 * ((em1 + q) / q).ln() + 0.5;
        let dt = s2 * s.exp() / (em1 + q);
        (t, dt)
    }

    fn wor_inverse(&self, q: f64, s: f64) -> (f64, f64) {
        let s2 = self.sigma * self.sigma;
        let c = (-1.0 / (2.0 * s2)).exp();
        let es = s.exp();
        // q c y² + B y − q c eˢ = 0 with y = e^{t/σ²}
        let b = (1.0 - q) * (-s.exp_m1());
        let d = 4.0 * q * q * c * c * es;
        let root = (b * b + d).sqrt();
        let y = if b > 0.0 { 2.0 * q * c * es / (b + root) } else { (root - b) / (2.0 * q * c) };
        let t = s2 * y.ln();
        let dt = s2 * es * ((1.0 - q) * y + q * c) / (y * root);
        (t, dt)
    }

    fn newton(&self, s: f64, guess: Option<f64>) -> Result<f64> {
        let s2 = self.sigma * self.sigma;
        let f = |t: f64| self.loss_at(t) - s;
        let (mut lo, mut hi) = (-10.0 * s2, 10.0 * s2);
        let mut expand = 0;
        while f(lo) > 0.0 {
            lo *= 2.0;
            expand += 1;
            if expand > 60 {
                return Err(Error::NoConvergence { s, iterations: 0, t: lo, residual: f(lo) });
            }
        }
        while f(hi) < 0.0 {
            hi *= 2.0;
            expand += 1;
            if expand > 120 {
                return Err(Error::NoConvergence { s, iterations: 0, t: hi, residual: f(hi) });
            }
        }
        let tol = NEWTON_TOL * s.abs().max(1.0);
        let mut t = guess.unwrap_or(s2 * s / self.m_eff + 0.5);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let mut r = f(t);
        for _ in 0..NEWTON_MAX_ITER {
            if r.abs() <= tol {
                return Ok(t);
            }
            if r < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
                return Ok(t);
            }
            let step = r / self.loss_derivative(t);
            let mut next = t - step;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            t = next;
            r = f(t);
        }
        if r.abs() <= tol {
            return Ok(t);
        }
        Err(Error::NoConvergence { s, iterations: NEWTON_MAX_ITER, t, residual: r })
    }

    /// PLD density `ω(s)`.
    ///
    /// For the Newton-inverted models the derivative of `L⁻¹` is a central
    /// difference with step `max(1e-6, 1e-6·|s|)`; [`discretize`] uses the
    /// grid spacing instead.
    ///
    /// [`discretize`]: PrivacyLossModel::discretize
    pub fn pld_density(&self, s: f64) -> Result<f64> {
        self.check_image(s)?;
        let (t, dt) = match self.inverse {
            Inverse::Poisson { q } => self.poisson_inverse(q, s),
            Inverse::Wor { q } => self.wor_inverse(q, s),
            Inverse::Newton => {
                let h = (1e-6f64).max(1e-6 * s.abs());
                let t = self.newton(s, None)?;
                let (lo, hi) = self.image;
                let up = if s + h < hi { Some(self.newton(s + h, Some(t))?) } else { None };
                let down = if s - h > lo { Some(self.newton(s - h, Some(t))?) } else { None };
                let dt = match (down, up) {
                    (Some(a), Some(b)) => (b - a) / (2.0 * h),
                    (None, Some(b)) => (b - t) / h,
                    (Some(a), None) => (t - a) / h,
                    (None, None) => return Err(Error::OutOfDomain { s, lower: lo }),
                };
                (t, dt)
            }
        };
        Ok((Self::ln_density(&self.num, self.sigma, t) + dt.ln()).exp().max(0.0))
    }

    /// `∫ [f_X − e^ε f_X′]₊ dt` by adaptive quadrature in output space.
    ///
    /// The integrand is positive exactly right of `t_ε = L⁻¹(ε)`, located
    /// here by plain bisection on [`loss_at`](Self::loss_at), so the result
    /// does not depend on the inversion code used by the grid.
    pub fn tight_delta(&self, epsilon: f64) -> Result<f64> {
        check_finite("epsilon", epsilon)?;
        let (lo_img, hi_img) = self.image;
        if epsilon >= hi_img {
            return Ok(0.0);
        }
        let span = 40.0 * self.sigma;
        let mu_min = self.num.iter().chain(&self.den).map(|c| c.0).fold(f64::INFINITY, f64::min);
        let mu_max = self.num.iter().chain(&self.den).map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
        let upper = mu_max + span;
        let t_eps = if epsilon <= lo_img {
            mu_min - span
        } else {
            let (mut a, mut b) = (-10.0 * self.sigma * self.sigma, 10.0 * self.sigma * self.sigma);
            while self.loss_at(a) > epsilon {
                a *= 2.0;
            }
            while self.loss_at(b) < epsilon {
                b *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if self.loss_at(mid) < epsilon {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            (0.5 * (a + b)).max(mu_min - span)
        };
        if t_eps >= upper {
            return Ok(0.0);
        }
        let sigma = self.sigma;
        let integrand = |t: f64| {
            let a = Self::ln_density(&self.num, sigma, t);
            let b = epsilon + Self::ln_density(&self.den, sigma, t);
            // a ≥ b on the integration range; −expm1 keeps the digits.
            if a > b {
                a.exp() * -(b - a).exp_m1()
            } else {
                0.0
            }
        };
        let mut breaks = vec![t_eps];
        let mut mus: Vec<f64> = self.num.iter().map(|c| c.0).filter(|&m| m > t_eps && m < upper).collect();
        mus.sort_by(f64::total_cmp);
        mus.dedup();
        breaks.extend(mus);
        breaks.push(upper);
        Ok(integrate_pieces(integrand, &breaks, 1e-16, 1e-11)?.value.clamp(0.0, 1.0))
    }

    /// Discretize the PLD on `s_i = −L + iΔx`, `i = 0..r`, `Δx = 2L/r`.
    pub fn discretize(&self, trunc_l: f64, grid_r: usize) -> Result<DiscretizedPld> {
        check_positive("trunc_l", trunc_l)?;
        if grid_r < 2 || grid_r % 2 != 0 {
            return Err(Error::param("grid_r", format!("must be an even integer >= 2, got {grid_r}")));
        }
        let dx = 2.0 * trunc_l / grid_r as f64;
        // Half-grid h_k = −L + kΔx/2. Even k are grid points, odd k midpoints.
        let omega: Vec<f64> = match self.inverse {
            Inverse::Poisson { .. } | Inverse::Wor { .. } => (0..=2 * grid_r)
                .into_par_iter()
                .map(|k| {
                    let s = -trunc_l + k as f64 * dx / 2.0;
                    if s <= self.image.0 {
                        0.0
                    } else {
                        self.pld_density(s).unwrap_or(f64::NAN)
                    }
                })
                .collect(),
            Inverse::Newton => self.omega_by_difference(trunc_l, dx, grid_r)?,
        };
        let mut c = Vec::with_capacity(grid_r);
        let mut c_minus = Vec::with_capacity(grid_r);
        let mut c_plus = Vec::with_capacity(grid_r);
        let mut diag = PldDiagnostics {
            derivative: match self.inverse {
                Inverse::Newton => "central difference, h = dx",
                _ => "closed form",
            },
            extrema: "endpoints + midpoint",
            ..PldDiagnostics::default()
        };
        for i in 0..grid_r {
            let (a, mid, b) = (omega[2 * i], omega[2 * i + 1], omega[2 * i + 2]);
            for (k, v) in [(2 * i, a), (2 * i + 1, mid)] {
                if !v.is_finite() {
                    diag.nonfinite_count += 1;
                    diag.first_nonfinite.get_or_insert(k / 2);
                }
            }
            c.push(dx * a);
            c_minus.push(dx * a.min(mid).min(b));
            c_plus.push(dx * a.max(mid).max(b));
        }
        diag.mass = c.iter().copied().filter(|x| x.is_finite()).collect::<NeumaierSum>().value();
        diag.mass_defect = 1.0 - diag.mass;
        Ok(DiscretizedPld { trunc_l, grid_r, dx, c, c_minus, c_plus, diagnostics: diag })
    }

    fn omega_by_difference(&self, trunc_l: f64, dx: f64, grid_r: usize) -> Result<Vec<f64>> {
        // t at k = −2..=2r+2 so every needed point has both neighbours at ±Δx.
        let count = 2 * grid_r + 5;
        let h = |k: usize| -trunc_l + (k as f64 - 2.0) * dx / 2.0;
        let chunks: Vec<Result<Vec<f64>>> = (0..count.div_ceil(CHUNK))
            .into_par_iter()
            .map(|ci| {
                let mut out = Vec::with_capacity(CHUNK);
                let mut guess = None;
                for k in ci * CHUNK..((ci + 1) * CHUNK).min(count) {
                    let t = self.newton(h(k), guess)?;
                    guess = Some(t);
                    out.push(t);
                }
                Ok(out)
            })
            .collect();
        let mut t = Vec::with_capacity(count);
        for c in chunks {
            t.extend(c?);
        }
        Ok((0..=2 * grid_r)
            .into_par_iter()
            .map(|k| {
                let j = k + 2;
                let dt = (t[j + 2] - t[j - 2]) / (2.0 * dx);
                (Self::ln_density(&self.num, self.sigma, t[j]) + dt.ln()).exp()
            })
            .collect())
    }
}

/// How a discretization was produced and whether anything went wrong.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PldDiagnostics {
    /// Grid cells whose density evaluation was NaN or infinite.
    pub nonfinite_count: usize,
    pub first_nonfinite: Option<usize>,
    /// `Σ c_i`.
    pub mass: f64,
    /// `1 − Σ c_i`: truncation to `[−L, L]` plus discretization error.
    pub mass_defect: f64,
    pub derivative: &'static str,
    /// The interval extrema behind `c⁻`/`c⁺` are approximated, not exact.
    pub extrema: &'static str,
}

/// A PLD on the accountant grid: masses `c`, lower `c⁻` and upper `c⁺`.
#[derive(Debug, Clone)]
pub struct DiscretizedPld {
    pub trunc_l: f64,
    pub grid_r: usize,
    pub dx: f64,
    pub c: Vec<f64>,
    pub c_minus: Vec<f64>,
    pub c_plus: Vec<f64>,
    pub diagnostics: PldDiagnostics,
}

impl DiscretizedPld {
    /// `s_i = −L + iΔx`.
    pub fn grid_point(&self, i: usize) -> f64 {
        -self.trunc_l + i as f64 * self.dx
    }

    pub fn is_finite(&self) -> bool {
        self.diagnostics.nonfinite_count == 0
    }

    /// Dump `(s_i, c_i, c⁻_i, c⁺_i)` as CSV.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# schema=1")?;
        writeln!(w, "s,c,c_minus,c_plus")?;
        for i in 0..self.grid_r {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_g(self.grid_point(i)),
                fmt_g(self.c[i]),
                fmt_g(self.c_minus[i]),
                fmt_g(self.c_plus[i])
            )?;
        }
        Ok(())
    }
}
