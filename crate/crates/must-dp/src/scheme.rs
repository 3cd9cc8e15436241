//! The six subsampling schemes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neighbouring relation under which an amplification result holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Neighboring {
    /// Replace one record (`≃_S`).
    #[serde(rename = "S")]
    Substitution,
    /// Remove or add one record (`≃_R`).
    #[serde(rename = "R")]
    RemoveAdd,
}

impl Neighboring {
    pub fn code(self) -> &'static str {
        match self {
            Neighboring::Substitution => "S",
            Neighboring::RemoveAdd => "R",
        }
    }
}

/// A subsampling scheme drawing from a dataset of `n` records.
///
/// The two-stage schemes first draw `b` records from the data and then `m`
/// records from that intermediate set; the suffix names the two stages
/// (`o` = without replacement, `w` = with replacement). So `MustOw` is
/// "without, then with".
///
/// `Poisson` carries `n` too: amplification only needs `γ`, but sampling
/// has to know how many records to flip coins for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum SamplingScheme {
    Poisson { n: u64, gamma: f64 },
    Wor { n: u64, m: u64 },
    Wr { n: u64, m: u64 },
    #[serde(rename = "mustwo")]
    MustWo { n: u64, b: u64, m: u64 },
    #[serde(rename = "mustow")]
    MustOw { n: u64, b: u64, m: u64 },
    #[serde(rename = "mustww")]
    MustWw { n: u64, b: u64, m: u64 },
}

/// Scheme names accepted by [`SamplingScheme::from_parts`].
pub const SCHEME_NAMES: [&str; 6] = ["poisson", "wor", "wr", "mustwo", "mustow", "mustww"];

impl SamplingScheme {
    /// Build and validate a scheme from loose parts, as a CLI would.
    pub fn from_parts(name: &str, n: Option<u64>, b: Option<u64>, m: Option<u64>, gamma: Option<f64>) -> Result<Self> {
        let need = |v: Option<u64>, flag: &'static str| {
            v.ok_or_else(|| Error::param(flag, format!("required for scheme `{name}`")))
        };
        let scheme = match name.to_ascii_lowercase().as_str() {
            "poisson" => SamplingScheme::Poisson {
                n: need(n, "n")?,
                gamma: match (gamma, m, n) {
                    (Some(g), _, _) => g,
                    (None, Some(m), Some(n)) if n > 0 => m as f64 / n as f64,
                    _ => return Err(Error::param("gamma", "required for scheme `poisson` (or give m)")),
                },
            },
            "wor" => SamplingScheme::Wor { n: need(n, "n")?, m: need(m, "m")? },
            "wr" => SamplingScheme::Wr { n: need(n, "n")?, m: need(m, "m")? },
            "mustwo" => SamplingScheme::MustWo { n: need(n, "n")?, b: need(b, "b")?, m: need(m, "m")? },
            "mustow" => SamplingScheme::MustOw { n: need(n, "n")?, b: need(b, "b")?, m: need(m, "m")? },
            "mustww" => SamplingScheme::MustWw { n: need(n, "n")?, b: need(b, "b")?, m: need(m, "m")? },
            other => {
                return Err(Error::param(
                    "scheme",
                    format!("unknown scheme `{other}` (expected one of {})", SCHEME_NAMES.join(", ")),
                ))
            }
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidScheme(format!("{}: {msg}", self.name())));
        let n = self.n();
        if n == 0 {
            return fail("n must be at least 1".into());
        }
        if let Some(m) = self.m() {
            if m == 0 {
                return fail("m must be at least 1".into());
            }
        }
        if let Some(b) = self.b() {
            if b == 0 {
                return fail("b must be at least 1".into());
            }
        }
        match *self {
            SamplingScheme::Poisson { gamma, .. } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return fail(format!("gamma must lie in (0, 1), got {gamma}"));
                }
            }
            SamplingScheme::Wor { n, m } if m > n => return fail(format!("requires m <= n, got m = {m} > n = {n}")),
            SamplingScheme::MustOw { n, b, .. } if b > n => {
                return fail(format!("requires b <= n, got b = {b} > n = {n}"))
            }
            SamplingScheme::MustWo { b, m, .. } if m > b => {
                return fail(format!("requires m <= b, got m = {m} > b = {b}"))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplingScheme::Poisson { .. } => "poisson",
            SamplingScheme::Wor { .. } => "wor",
            SamplingScheme::Wr { .. } => "wr",
            SamplingScheme::MustWo { .. } => "mustwo",
            SamplingScheme::MustOw { .. } => "mustow",
            SamplingScheme::MustWw { .. } => "mustww",
        }
    }

    pub fn n(&self) -> u64 {
        match *self {
            SamplingScheme::Poisson { n, .. }
            | SamplingScheme::Wor { n, .. }
            | SamplingScheme::Wr { n, .. }
            | SamplingScheme::MustWo { n, .. }
            | SamplingScheme::MustOw { n, .. }
            | SamplingScheme::MustWw { n, .. } => n,
        }
    }

    /// Final subsample size; `None` for Poisson where it is random.
    pub fn m(&self) -> Option<u64> {
        match *self {
            SamplingScheme::Poisson { .. } => None,
            SamplingScheme::Wor { m, .. }
            | SamplingScheme::Wr { m, .. }
            | SamplingScheme::MustWo { m, .. }
            | SamplingScheme::MustOw { m, .. }
            | SamplingScheme::MustWw { m, .. } => Some(m),
        }
    }

    /// Intermediate (stage-one) size of the two-stage schemes.
    pub fn b(&self) -> Option<u64> {
        match *self {
            SamplingScheme::MustWo { b, .. } | SamplingScheme::MustOw { b, .. } | SamplingScheme::MustWw { b, .. } => {
                Some(b)
            }
            _ => None,
        }
    }

    /// Expected subsample size (`γn` for Poisson).
    pub fn expected_size(&self) -> f64 {
        match *self {
            SamplingScheme::Poisson { n, gamma } => gamma * n as f64,
            _ => self.m().unwrap_or(0) as f64,
        }
    }

    /// Whether a record can appear more than once in a draw.
    pub fn produces_multisets(&self) -> bool {
        !matches!(self, SamplingScheme::Poisson { .. } | SamplingScheme::Wor { .. })
    }

    pub fn neighboring(&self) -> Neighboring {
        match self {
            SamplingScheme::Poisson { .. } => Neighboring::RemoveAdd,
            _ => Neighboring::Substitution,
        }
    }
}

impl std::fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            SamplingScheme::Poisson { n, gamma } => write!(f, "poisson(n={n}, gamma={gamma})"),
            SamplingScheme::Wor { n, m } | SamplingScheme::Wr { n, m } => write!(f, "{}(n={n}, m={m})", self.name()),
            SamplingScheme::MustWo { n, b, m } | SamplingScheme::MustOw { n, b, m } | SamplingScheme::MustWw { n, b, m } => {
                write!(f, "{}(n={n}, b={b}, m={m})", self.name())
            }
        }
    }
}
