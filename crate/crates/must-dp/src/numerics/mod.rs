//! Numerical building blocks shared by the rest of the crate.
//!
//! None of this is privacy specific. It is exposed publicly because the
//! tests, the CLI `--verify` paths and the book all lean on the same
//! primitives the engine uses.

// Reference constants are kept at full reference precision.
#![allow(clippy::excessive_precision)]

pub mod binomial;
pub mod quad;
pub mod special;
pub mod sum;

pub use binomial::{ln_binom_pmf, ln_hyper_pmf};
pub use quad::{integrate, QuadResult};
pub use special::{erfc, erfcx, ln_norm_cdf, mills_ratio, norm_cdf, norm_pdf};
pub use sum::{neumaier_sum, NeumaierSum};

/// `log(Σ exp(x_i))` without overflow. Returns `-inf` for an empty or
/// all `-inf` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let mut acc = NeumaierSum::default();
    for x in xs {
        acc.add((x - max).exp());
    }
    max + acc.value().ln()
}
