//! Executable subsampling: draw actual multisets under each scheme.
//!
//! Used as a Monte-Carlo oracle for `η`, the multiplicity weights and the
//! number of distinct records per subsample. Trial `i` of a run with master
//! seed `s` always uses the ChaCha8 stream `(s, i)`, so statistics do not
//! depend on how trials are spread over threads.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scheme::SamplingScheme;

/// A subsample: sorted `(record index, multiplicity)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Multiset {
    entries: Vec<(usize, u32)>,
    total: u64,
}

impl Multiset {
    /// Build from a list of drawn indices, repeats allowed.
    pub fn from_indices(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        let mut entries: Vec<(usize, u32)> = Vec::with_capacity(idx.len());
        for i in idx {
            match entries.last_mut() {
                Some((j, c)) if *j == i => *c += 1,
                _ => entries.push((i, 1)),
            }
        }
        let total = entries.iter().map(|e| e.1 as u64).sum();
        Self { entries, total }
    }

    fn from_counts(mut entries: Vec<(usize, u32)>) -> Self {
        entries.retain(|e| e.1 > 0);
        entries.sort_unstable();
        let total = entries.iter().map(|e| e.1 as u64).sum();
        Self { entries, total }
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    /// Multiplicity of record `i` (0 when absent).
    pub fn count(&self, i: usize) -> u32 {
        self.entries.binary_search_by_key(&i, |e| e.0).map(|k| self.entries[k].1).unwrap_or(0)
    }

    /// Number of distinct records.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    /// Size counting multiplicity.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// The generator for trial `stream` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw one subsample with stream 0 of `seed`.
pub fn draw(scheme: &SamplingScheme, seed: u64) -> Result<Multiset> {
    scheme.validate()?;
    Ok(draw_with(scheme, &mut trial_rng(seed, 0)))
}

/// Draw one subsample from `rng`. The scheme must already be valid.
pub fn draw_with<R: Rng + ?Sized>(scheme: &SamplingScheme, rng: &mut R) -> Multiset {
    match *scheme {
        SamplingScheme::Poisson { n, gamma } => {
            // Gaps between included records are geometric, so only the
            // included indices are ever touched.
            let gap = Geometric::new(gamma).expect("gamma validated");
            let mut out = Vec::new();
            let mut next = gap.sample(rng);
            while next < n {
                out.push((next as usize, 1));
                next = next.saturating_add(1 + gap.sample(rng));
            }
            Multiset::from_counts(out)
        }
        SamplingScheme::Wor { n, m } => {
            Multiset::from_counts(index::sample(rng, n as usize, m as usize).into_iter().map(|i| (i, 1)).collect())
        }
        SamplingScheme::Wr { n, m } => Multiset::from_indices((0..m).map(|_| rng.random_range(0..n as usize)).collect()),
        SamplingScheme::MustOw { n, b, m } => {
            let stage_one = index::sample(rng, n as usize, b as usize).into_vec();
            // Multinomial(m, uniform over b) by sequential binomials.
            let mut left = m;
            let mut out = Vec::with_capacity(stage_one.len().min(m as usize));
            for (i, &rec) in stage_one.iter().enumerate() {
                if left == 0 {
                    break;
                }
                let cells = (stage_one.len() - i) as f64;
                let x = if cells == 1.0 {
                    left
                } else {
                    Binomial::new(left, 1.0 / cells).expect("valid binomial").sample(rng)
                };
                out.push((rec, x as u32));
                left -= x;
            }
            Multiset::from_counts(out)
        }
        SamplingScheme::MustWw { n, b, m } => {
            let stage_one: Vec<usize> = (0..b).map(|_| rng.random_range(0..n as usize)).collect();
            Multiset::from_indices((0..m).map(|_| stage_one[rng.random_range(0..b as usize)]).collect())
        }
        SamplingScheme::MustWo { n, b, m } => {
            let stage_one: Vec<usize> = (0..b).map(|_| rng.random_range(0..n as usize)).collect();
            Multiset::from_indices(index::sample(rng, b as usize, m as usize).into_iter().map(|p| stage_one[p]).collect())
        }
    }
}

/// Monte-Carlo summary of many independent draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub trials: u64,
    pub unique_min: u64,
    pub unique_mean: f64,
    pub unique_max: u64,
    /// Fraction of trials containing record 0.
    pub eta_hat: f64,
    /// Fraction of trials containing record `n − 1` (exchangeability check).
    pub eta_hat_last: f64,
    /// `weight_hat[u − 1]` = fraction of trials where record 0 appears
    /// exactly `u` times.
    pub weight_hat: Vec<f64>,
    pub size_mean: f64,
}

#[derive(Clone)]
struct Acc {
    unique_sum: u64,
    unique_min: u64,
    unique_max: u64,
    size_sum: u64,
    first: u64,
    last: u64,
    hist: Vec<u64>,
}

impl Acc {
    fn new(len: usize) -> Self {
        Self { unique_sum: 0, unique_min: u64::MAX, unique_max: 0, size_sum: 0, first: 0, last: 0, hist: vec![0; len] }
    }

    fn merge(mut self, o: Acc) -> Acc {
        self.unique_sum += o.unique_sum;
        self.unique_min = self.unique_min.min(o.unique_min);
        self.unique_max = self.unique_max.max(o.unique_max);
        self.size_sum += o.size_sum;
        self.first += o.first;
        self.last += o.last;
        for (a, b) in self.hist.iter_mut().zip(o.hist) {
            *a += b;
        }
        self
    }
}

/// Run `trials` independent draws and summarize them.
pub fn mc_stats(scheme: &SamplingScheme, trials: u64, seed: u64) -> Result<RunStats> {
    scheme.validate()?;
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let n = scheme.n() as usize;
    let hist_len = scheme.m().unwrap_or(1) as usize;
    const CHUNK: u64 = 1024;
    let acc = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Acc::new(hist_len);
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let ms = draw_with(scheme, &mut trial_rng(seed, t));
                let d = ms.distinct() as u64;
                acc.unique_sum += d;
                acc.unique_min = acc.unique_min.min(d);
                acc.unique_max = acc.unique_max.max(d);
                acc.size_sum += ms.total();
                let c0 = ms.count(0);
                if c0 > 0 {
                    acc.first += 1;
                    acc.hist[c0 as usize - 1] += 1;
                }
                if ms.count(n - 1) > 0 {
                    acc.last += 1;
                }
            }
            acc
        })
        .reduce(|| Acc::new(hist_len), Acc::merge);
    let tf = trials as f64;
    Ok(RunStats {
        trials,
        unique_min: acc.unique_min,
        unique_mean: acc.unique_sum as f64 / tf,
        unique_max: acc.unique_max,
        eta_hat: acc.first as f64 / tf,
        eta_hat_last: acc.last as f64 / tf,
        weight_hat: acc.hist.iter().map(|&h| h as f64 / tf).collect(),
        size_mean: acc.size_sum as f64 / tf,
    })
}
