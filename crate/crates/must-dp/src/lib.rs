//! Privacy amplification by multistage subsampling.
//!
//! The crate answers two questions about a mechanism run on a random
//! subsample of the data:
//!
//! * how much the subsampling amplifies a single release, in closed form
//!   ([`amplification`]), for Poisson sampling, sampling with or without
//!   replacement, and the two-stage MUST schemes;
//! * what `δ(ε)` looks like after `k` such releases, numerically, through
//!   privacy loss distributions ([`pld`]) composed with an FFT accountant
//!   ([`accountant`]).
//!
//! Every closed form has an executable counterpart: [`sampling`] draws real
//! subsamples for Monte-Carlo checks and [`harness`] runs small DP-SGD and
//! bootstrap experiments.
//!
//! ```
//! use must_dp::{amplification, MechanismSpec, SamplingScheme};
//!
//! let scheme = SamplingScheme::MustOw { n: 1000, b: 500, m: 400 };
//! let mech = MechanismSpec::laplace(1.0)?;
//! let eta = amplification::eta(&scheme)?;
//! let eps_prime = amplification::amplify_epsilon(eta, 1.0)?;
//! let delta_prime = amplification::amplify_delta(&scheme, &mech, 1.0)?;
//! assert!((eps_prime - 0.388).abs() < 5e-4);
//! assert!((delta_prime - 0.044).abs() < 5e-4);
//! # Ok::<(), must_dp::Error>(())
//! ```

pub mod accountant;
pub mod amplification;
mod error;
pub mod harness;
pub mod mechanisms;
pub mod numerics;
pub mod pld;
pub mod report;
pub mod sampling;
pub mod scheme;

pub use error::{Error, Result};
pub use mechanisms::{Calibration, Family, MechanismSpec, PrivacyPoint};
pub use scheme::{Neighboring, SamplingScheme};

// Book chapters are compiled as doctests so their snippets cannot rot.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/amplification.md")]
    mod amplification {}
    #[doc = include_str!("../../../book/src/multisets.md")]
    mod multisets {}
    #[doc = include_str!("../../../book/src/pld.md")]
    mod pld {}
    #[doc = include_str!("../../../book/src/accountant.md")]
    mod accountant {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
