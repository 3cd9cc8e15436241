//! Privacy profiles of the Laplace and Gaussian mechanisms.
//!
//! A mechanism is described only by its family and the ratio
//! `θ = sensitivity / scale`; the profile `δ(ε)` depends on nothing else.
//! Group profiles for datasets that differ in `j` records are obtained by
//! substituting `jθ` for `θ`.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_nonnegative, check_open_unit, check_positive, Error, Result};
use crate::numerics::quad::integrate_pieces;
use crate::numerics::special::{ln_norm_cdf, mills_ratio, norm_cdf, norm_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Laplace,
    Gaussian,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Laplace => "laplace",
            Family::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "laplace" => Ok(Family::Laplace),
            "gaussian" | "gauss" | "normal" => Ok(Family::Gaussian),
            other => Err(Error::param("family", format!("unknown family `{other}`"))),
        }
    }
}

/// A base mechanism: Laplace with `θ = Δ₁/b` or Gaussian with `θ = Δ₂/σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    family: Family,
    theta: f64,
}

impl MechanismSpec {
    pub fn new(family: Family, theta: f64) -> Result<Self> {
        check_positive("theta", theta)?;
        Ok(Self { family, theta })
    }

    pub fn laplace(theta: f64) -> Result<Self> {
        Self::new(Family::Laplace, theta)
    }

    pub fn gaussian(theta: f64) -> Result<Self> {
        Self::new(Family::Gaussian, theta)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The same mechanism seen by datasets that differ in `j` records.
    pub fn group(&self, j: u64) -> Result<Self> {
        if j == 0 {
            return Err(Error::param("j", "group size must be at least 1"));
        }
        Self::new(self.family, self.theta * j as f64)
    }
}

/// An `(ε, δ)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyPoint {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyPoint {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        check_nonnegative("epsilon", epsilon)?;
        check_finite("delta", delta)?;
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::param("delta", format!("must lie in [0, 1], got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }
}

pub(crate) fn laplace_delta(theta: f64, epsilon: f64) -> f64 {
    if epsilon >= theta {
        0.0
    } else {
        (-((epsilon - theta) / 2.0).exp_m1()).clamp(0.0, 1.0)
    }
}

pub(crate) fn gaussian_delta(theta: f64, epsilon: f64) -> f64 {
    let a = theta / 2.0 - epsilon / theta;
    let b = -theta / 2.0 - epsilon / theta;
    let delta = if a > -1.0 {
        norm_cdf(a) - (epsilon + ln_norm_cdf(b)).exp()
    } else {
        // e^ε φ(b) = φ(a), so both terms share the factor φ(a) and the
        // difference reduces to one of Mills ratios.
        norm_pdf(a) * (mills_ratio(-a) - mills_ratio(-b))
    };
    delta.clamp(0.0, 1.0)
}

fn delta_for(family: Family, theta: f64, epsilon: f64) -> f64 {
    match family {
        Family::Laplace => laplace_delta(theta, epsilon),
        Family::Gaussian => gaussian_delta(theta, epsilon),
    }
}

/// Tight `δ(ε)` of the mechanism.
pub fn profile(mech: &MechanismSpec, epsilon: f64) -> Result<f64> {
    check_nonnegative("epsilon", epsilon)?;
    Ok(delta_for(mech.family, mech.theta, epsilon))
}

/// `δ(ε)` for neighbours that differ in `j` records.
pub fn group_profile(mech: &MechanismSpec, j: u64, epsilon: f64) -> Result<f64> {
    let g = mech.group(j)?;
    profile(&g, epsilon)
}

/// Computes the group profile by integrating the hockey-stick divergence
/// `∫ [f(t) − e^ε f(t − jθ)]₊ dt` of the standardized output densities.
///
/// Shares no code with [`group_profile`] beyond the normal pdf, so it serves
/// as an independent check of the closed forms.
pub fn profile_numeric_oracle(mech: &MechanismSpec, j: u64, epsilon: f64) -> Result<f64> {
    check_nonnegative("epsilon", epsilon)?;
    let shift = mech.group(j)?.theta;
    let (ln_f, half_width): (fn(f64) -> f64, f64) = match mech.family {
        Family::Laplace => (|t: f64| -t.abs() - std::f64::consts::LN_2, 60.0),
        Family::Gaussian => (|t: f64| -0.5 * t * t - 0.918_938_533_204_672_8, 40.0),
    };
    let lo = -shift - half_width;
    let hi = shift + half_width;
    // The log-ratio is nonincreasing in t for both families, so the positive
    // part is a half-line whose boundary we locate by bisection.
    let g = |t: f64| ln_f(t) - epsilon - ln_f(t - shift);
    let upper = if g(lo) <= 0.0 {
        return Ok(0.0);
    } else if g(hi) > 0.0 {
        hi
    } else {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if g(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };
    let mut breaks = vec![lo];
    if mech.family == Family::Laplace {
        for k in [0.0, shift] {
            if k > lo && k < upper {
                breaks.push(k);
            }
        }
    }
    breaks.push(upper);
    let integrand = |t: f64| (ln_f(t).exp() - (epsilon + ln_f(t - shift)).exp()).max(0.0);
    let r = integrate_pieces(integrand, &breaks, 1e-14, 1e-12)?;
    Ok(r.value.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibration {
    /// `σ = Δ·√(2 log(1.25/δ))/ε`, valid for ε < 1.
    Classical,
    /// Smallest σ whose exact Gaussian profile meets the target.
    Exact,
}

impl Calibration {
    pub fn name(self) -> &'static str {
        match self {
            Calibration::Classical => "classical",
            Calibration::Exact => "exact",
        }
    }
}

/// Noise scale achieving `(ε, δ_target)` for the given sensitivity.
///
/// For the Laplace family the classical rule is the pure-DP scale `Δ/ε` and
/// the exact rule inverts the Laplace profile in closed form.
pub fn calibrate_sigma(
    family: Family,
    delta_target: f64,
    epsilon: f64,
    sensitivity: f64,
    method: Calibration,
) -> Result<f64> {
    check_open_unit("delta_target", delta_target)?;
    check_positive("epsilon", epsilon)?;
    check_positive("sensitivity", sensitivity)?;
    match (family, method) {
        (Family::Gaussian, Calibration::Classical) => {
            if epsilon >= 1.0 {
                static WARNED: std::sync::Once = std::sync::Once::new();
                WARNED.call_once(|| {
                    log::warn!("classical Gaussian calibration used outside ε < 1 (first seen at ε = {epsilon})")
                });
            }
            Ok(sensitivity * (2.0 * (1.25 / delta_target).ln()).sqrt() / epsilon)
        }
        (Family::Laplace, Calibration::Classical) => Ok(sensitivity / epsilon),
        (Family::Laplace, Calibration::Exact) => {
            // 1 − exp((ε − θ)/2) = δ  ⇔  θ = ε − 2 ln(1 − δ)
            let mut sigma = sensitivity / (epsilon - 2.0 * (-delta_target).ln_1p());
            // ε − θ cancels badly when δ ≪ ε; widen until the target holds.
            let mut step = f64::EPSILON;
            while laplace_delta(sensitivity / sigma, epsilon) > delta_target {
                sigma *= 1.0 + step;
                step *= 2.0;
            }
            Ok(sigma)
        }
        (Family::Gaussian, Calibration::Exact) => {
            let meets = |sigma: f64| gaussian_delta(sensitivity / sigma, epsilon) <= delta_target;
            let (mut lo, mut hi) = (1e-12 * sensitivity, 1e12 * sensitivity);
            if !meets(hi) {
                return Err(Error::Calibration(format!(
                    "no σ up to {hi:e} reaches δ = {delta_target:e} at ε = {epsilon}"
                )));
            }
            if meets(lo) {
                return Ok(lo);
            }
            // Bisect in log-space; the profile is monotone in σ.
            while hi / lo - 1.0 > 1e-12 {
                let mid = (lo * hi).sqrt();
                if meets(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}
