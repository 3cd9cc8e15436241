mod common;

use std::collections::HashMap;

use common::distinct_counts::{ROWS, SCHEMES};
use must_dp::amplification::{eta, multiplicity_weights};
use must_dp::sampling::{draw, draw_with, mc_stats, trial_rng, Multiset};
use must_dp::SamplingScheme;
use proptest::prelude::*;

fn six(n: u64, b: u64, m: u64) -> Vec<SamplingScheme> {
    vec![
        SamplingScheme::Poisson { n, gamma: m as f64 / n as f64 },
        SamplingScheme::Wor { n, m },
        SamplingScheme::Wr { n, m },
        SamplingScheme::MustOw { n, b, m },
        SamplingScheme::MustWw { n, b, m },
        SamplingScheme::MustWo { n, b, m },
    ]
}

fn se(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[test]
fn same_seed_same_draw() {
    for s in six(40, 12, 8) {
        assert_eq!(draw(&s, 17).unwrap(), draw(&s, 17).unwrap(), "{s}");
        let a = mc_stats(&s, 5000, 3).unwrap();
        let b = mc_stats(&s, 5000, 3).unwrap();
        assert_eq!(a, b, "{s}");
    }
}

#[test]
fn stats_do_not_depend_on_thread_count() {
    let s = SamplingScheme::MustWw { n: 300, b: 50, m: 30 };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_stats(&s, 20_000, 11).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn full_wor_takes_everything_once() {
    for seed in 0..20 {
        let ms = draw(&SamplingScheme::Wor { n: 25, m: 25 }, seed).unwrap();
        assert_eq!(ms.entries(), (0..25).map(|i| (i, 1)).collect::<Vec<_>>().as_slice());
    }
}

#[test]
fn mustow_distinct_count_is_capped() {
    for (b, m) in [(5, 12), (12, 5), (9, 9)] {
        let s = SamplingScheme::MustOw { n: 40, b, m };
        for seed in 0..200 {
            let ms = draw(&s, seed).unwrap();
            assert!(ms.distinct() as u64 <= b.min(m));
            assert_eq!(ms.total(), m);
        }
    }
}

#[test]
fn inclusion_rate_matches_eta() {
    let trials = 100_000;
    for (n, b, m) in [(10, 5, 3), (300, 50, 30), (50, 50, 20)] {
        for s in six(n, b, m) {
            let st = mc_stats(&s, trials, 101).unwrap();
            let e = eta(&s).unwrap();
            let tol = 3.0 * se(e, trials);
            assert!((st.eta_hat - e).abs() <= tol, "{s}: {} vs {e}", st.eta_hat);
            // Exchangeability: the last record behaves like the first.
            assert!((st.eta_hat_last - e).abs() <= tol, "{s}: last {} vs {e}", st.eta_hat_last);
            // Expected number of distinct records is n·η.
            let d = n as f64 * e;
            assert!((st.unique_mean - d).abs() <= 0.02 * d + 0.05, "{s}: {} vs {d}", st.unique_mean);
        }
    }
}

#[test]
fn multiplicity_rates_match_weights() {
    let trials = 1_000_000;
    for s in &six(10, 5, 3)[2..] {
        let st = mc_stats(s, trials, 202).unwrap();
        let w = multiplicity_weights(s).unwrap();
        assert_eq!(st.weight_hat.len(), w.len());
        for (u, (&hat, &wu)) in st.weight_hat.iter().zip(&w).enumerate() {
            let tol = 3.0 * se(wu, trials).max(1.0 / trials as f64);
            assert!((hat - wu).abs() <= tol, "{s} u={}: {hat} vs {wu}", u + 1);
        }
    }
}

fn histogram(s: &SamplingScheme, trials: u64, seed: u64, key: impl Fn(&Multiset) -> Vec<u32>) -> HashMap<Vec<u32>, f64> {
    let mut h = HashMap::new();
    for t in 0..trials {
        *h.entry(key(&draw_with(s, &mut trial_rng(seed, t)))).or_insert(0.0) += 1.0 / trials as f64;
    }
    h
}

fn tv(a: &HashMap<Vec<u32>, f64>, b: &HashMap<Vec<u32>, f64>) -> f64 {
    let keys: std::collections::HashSet<_> = a.keys().chain(b.keys()).collect();
    0.5 * keys.into_iter().map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

#[test]
fn mustwo_draws_look_like_wr() {
    let trials = 1_000_000;
    let (n, b, m) = (10, 5, 3);
    let wr = SamplingScheme::Wr { n, m };
    let wo = SamplingScheme::MustWo { n, b, m };
    // Sorted multiplicity pattern, e.g. [1, 2] for one single and one pair.
    let pattern = |ms: &Multiset| {
        let mut c: Vec<u32> = ms.entries().iter().map(|e| e.1).collect();
        c.sort_unstable();
        c
    };
    let d = tv(&histogram(&wr, trials, 1, pattern), &histogram(&wo, trials, 2, pattern));
    assert!(d <= 0.005, "pattern TV {d}");
    let first = |ms: &Multiset| vec![ms.count(0)];
    let d = tv(&histogram(&wr, trials, 3, first), &histogram(&wo, trials, 4, first));
    assert!(d <= 0.005, "record-0 TV {d}");
    // Whole multisets on a tiny population.
    let (wr, wo) = (SamplingScheme::Wr { n: 4, m: 2 }, SamplingScheme::MustWo { n: 4, b: 3, m: 2 });
    let whole = |ms: &Multiset| ms.entries().iter().flat_map(|&(i, c)| [i as u32, c]).collect();
    let d = tv(&histogram(&wr, trials, 5, whole), &histogram(&wo, trials, 6, whole));
    assert!(d <= 0.005, "multiset TV {d}");
}

#[test]
fn reference_distinct_counts() {
    // The two smaller configurations; the large ones run in the acceptance target.
    for row in &ROWS[..2] {
        for (k, name) in SCHEMES.iter().enumerate() {
            let s = SamplingScheme::from_parts(name, Some(row.n), Some(row.b), Some(row.m), Some(row.m as f64 / row.n as f64))
                .unwrap();
            let st = mc_stats(&s, 10_000, 2024).unwrap();
            assert!((st.unique_mean - row.mean[k] as f64).abs() <= 1.0, "{s}: {}", st.unique_mean);
            assert!(st.unique_min <= st.unique_max);
        }
    }
}

#[test]
fn zero_trials_rejected() {
    assert!(mc_stats(&SamplingScheme::Wr { n: 5, m: 2 }, 0, 1).is_err());
    assert!(draw(&SamplingScheme::Wor { n: 5, m: 6 }, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn draws_stay_in_range(n in 1u64..60, b_frac in 0.0f64..1.0, m in 1u64..40, seed: u64) {
        let b = 1 + (b_frac * (n - 1) as f64) as u64;
        for s in six(n, b, m) {
            if s.validate().is_err() {
                continue;
            }
            let ms = draw(&s, seed).unwrap();
            prop_assert!(ms.entries().iter().all(|e| (e.0 as u64) < n && e.1 >= 1));
            prop_assert!(ms.entries().windows(2).all(|w| w[0].0 < w[1].0));
            if let Some(m) = s.m() {
                prop_assert_eq!(ms.total(), m);
            }
        }
    }
}
