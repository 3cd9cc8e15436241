//! Reference base-Gaussian scales for the bootstrap experiment
//! (n = 300, m = 30, ε′ = 0.1, δ = 1/300, data clamped to [−4, 4]).

pub const N: u64 = 300;
pub const M: u64 = 30;
pub const EPS_PRIME: f64 = 0.1;
pub const BOUNDS: (f64, f64) = (-4.0, 4.0);
pub const B_VALUES: [u64; 5] = [10, 20, 30, 50, 100];

/// (scheme, σ for the mean, σ for the variance)
pub const ONE_STAGE: [(&str, f64, f64); 3] = [("poisson", 0.13, 1.02), ("wor", 0.13, 1.02), ("wr", 0.12, 0.99)];

/// Indexed like `B_VALUES`.
pub const MUSTOW: ([f64; 5], [f64; 5]) = ([0.06, 0.08, 0.09, 0.11, 0.12], [0.50, 0.67, 0.75, 0.84, 0.93]);
pub const MUSTWW: ([f64; 5], [f64; 5]) = ([0.06, 0.08, 0.09, 0.10, 0.11], [0.50, 0.66, 0.74, 0.82, 0.90]);

/// Every reference entry as (scheme, b, σ_mean, σ_var).
pub fn entries() -> Vec<(&'static str, Option<u64>, f64, f64)> {
    let mut out: Vec<_> = ONE_STAGE.iter().map(|&(s, a, v)| (s, None, a, v)).collect();
    for (name, (means, vars)) in [("mustow", MUSTOW), ("mustww", MUSTWW)] {
        for (k, &b) in B_VALUES.iter().enumerate() {
            out.push((name, Some(b), means[k], vars[k]));
        }
    }
    out
}
