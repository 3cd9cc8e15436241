use must_dp::amplification::{amplify_delta, amplify_epsilon, eta};
use must_dp::pld::PrivacyLossModel;
use must_dp::{Error, MechanismSpec, SamplingScheme};
use proptest::prelude::*;

fn model(s: SamplingScheme, sigma: f64) -> PrivacyLossModel {
    PrivacyLossModel::new(s, sigma).unwrap()
}

fn poisson() -> PrivacyLossModel {
    model(SamplingScheme::Poisson { n: 1000, gamma: 0.02 }, 2.0)
}

fn all_models() -> Vec<PrivacyLossModel> {
    vec![
        poisson(),
        model(SamplingScheme::Wor { n: 1000, m: 200 }, 4.0),
        model(SamplingScheme::Wr { n: 300, m: 30 }, 1.5),
        model(SamplingScheme::MustWo { n: 300, b: 50, m: 30 }, 1.5),
        model(SamplingScheme::MustOw { n: 300, b: 50, m: 30 }, 1.5),
        model(SamplingScheme::MustWw { n: 300, b: 50, m: 30 }, 1.5),
    ]
}

#[test]
fn poisson_loss_value() {
    let want = (0.02 * (1.0f64 / 8.0).exp() + 0.98).ln();
    assert!((poisson().loss_at(1.0) - want).abs() < 1e-15);
}

#[test]
fn symmetric_losses() {
    let wor = model(SamplingScheme::Wor { n: 1000, m: 200 }, 4.0);
    assert_eq!(wor.loss_at(0.0), 0.0);
    let ow = model(SamplingScheme::MustOw { n: 1000, b: 118, m: 200 }, 1.0);
    for t in [0.3, 1.7, 5.0, 40.0] {
        assert!((ow.loss_at(-t) + ow.loss_at(t)).abs() < 1e-12 * ow.loss_at(t).abs().max(1.0));
    }
}

#[test]
fn loss_is_strictly_increasing() {
    for m in all_models() {
        let s2 = m.sigma() * m.sigma();
        let ts: Vec<f64> = (0..1000).map(|i| -6.0 * s2 + 12.0 * s2 * i as f64 / 999.0).collect();
        let ls: Vec<f64> = ts.iter().map(|&t| m.loss_at(t)).collect();
        for w in ls.windows(2) {
            assert!(w[1] > w[0], "{}: {} then {}", m.scheme(), w[0], w[1]);
        }
        assert!(ts.iter().all(|&t| m.loss_derivative(t) > 0.0));
    }
}

#[test]
fn poisson_domain_boundary() {
    let s = (0.98f64).ln() - 0.1;
    assert!(matches!(poisson().invert_loss(s), Err(Error::OutOfDomain { .. })));
    assert!(poisson().pld_density(s).is_err());
}

#[test]
fn wor_closed_form_matches_newton() {
    let m = model(SamplingScheme::Wor { n: 1000, m: 200 }, 4.0);
    let a = m.invert_loss(0.05).unwrap();
    let b = m.invert_loss_newton(0.05).unwrap();
    assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    assert!((m.loss_at(a) - 0.05).abs() < 1e-14);
}

#[test]
fn mustow_at_full_first_stage_is_wr() {
    let (n, m, sigma) = (200, 30, 1.3);
    let ow = model(SamplingScheme::MustOw { n, b: n, m }, sigma);
    let wr = model(SamplingScheme::Wr { n, m }, sigma);
    for i in 0..200 {
        let t = -20.0 + 0.2 * i as f64;
        assert!((ow.loss_at(t) - wr.loss_at(t)).abs() <= 1e-10, "t={t}");
    }
}

/// The density of a pushforward integrates to one.
#[test]
fn density_normalizes() {
    let m = poisson();
    let (l, r) = (10.0, 100_000usize);
    let dx = 2.0 * l / r as f64;
    let lower = m.image().0;
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for i in 0..=r {
        let s = -l + i as f64 * dx;
        let w = if s <= lower { 0.0 } else { m.pld_density(s).unwrap() };
        if let Some(p) = prev {
            total += 0.5 * (p + w) * dx;
        }
        prev = Some(w);
    }
    // The density has an integrable singularity at log(1 − q), which the
    // trapezoid rule resolves only to about this level.
    assert!((total - 1.0).abs() < 1e-4, "{total}");
}

/// ω_{X/X′}(s) = e^s ω_{X′/X}(−s).
#[test]
fn density_exchange_identity() {
    for m in [model(SamplingScheme::Wor { n: 1000, m: 200 }, 4.0), model(SamplingScheme::Wor { n: 100, m: 7 }, 0.8)] {
        let r = m.reversed();
        for i in 0..50 {
            let s = -2.0 + 4.0 * i as f64 / 49.0;
            let a = m.pld_density(s).unwrap();
            let b = s.exp() * r.pld_density(-s).unwrap();
            assert!((a - b).abs() <= 1e-8 * a.max(1e-300), "s={s}: {a} vs {b}");
        }
    }
}

#[test]
fn symmetric_schemes_have_equal_tails() {
    for m in all_models().into_iter().skip(1) {
        let r = m.reversed();
        for e in [0.1, 0.5, 1.5] {
            let a = m.tight_delta(e).unwrap();
            let b = r.tight_delta(e).unwrap();
            assert!((a - b).abs() <= 1e-10 + 1e-8 * a, "{} ε={e}: {a} vs {b}", m.scheme());
        }
    }
}

/// The tight δ at ε′ can never exceed the generic amplification bound.
#[test]
fn tight_delta_below_amplification_bound() {
    for m in all_models() {
        // Substitution moves a record from +1 to −1, twice the remove/add shift.
        let shift = match m.scheme() {
            SamplingScheme::Poisson { .. } => 1.0,
            _ => 2.0,
        };
        let mech = MechanismSpec::gaussian(shift / m.sigma()).unwrap();
        let eta_value = eta(m.scheme()).unwrap();
        for e in [0.25, 1.0, 2.0] {
            let ep = amplify_epsilon(eta_value, e).unwrap();
            let bound = amplify_delta(m.scheme(), &mech, e).unwrap();
            let tight = m.tight_delta(ep).unwrap();
            assert!(tight <= bound * (1.0 + 1e-8) + 1e-15, "{} ε={e}: {tight} > {bound}", m.scheme());
        }
    }
}

#[test]
fn discretization_layout_and_mass() {
    let p = poisson().discretize(10.0, 100_000).unwrap();
    assert_eq!(p.grid_point(0), -10.0);
    assert!((p.grid_point(p.grid_r - 1) - (10.0 - p.dx)).abs() < 1e-12);
    let mass: f64 = p.c.iter().sum();
    assert!((mass - 1.0).abs() < 2e-3, "{mass}");
    assert!(p.is_finite());
    for i in 0..p.grid_r {
        assert!(p.c_minus[i] <= p.c[i] && p.c[i] <= p.c_plus[i], "i={i}");
        if p.grid_point(i) + p.dx <= (0.98f64).ln() {
            assert_eq!(p.c_plus[i], 0.0);
        }
    }
    assert!(poisson().discretize(10.0, 1001).is_err());
    assert!(poisson().discretize(-1.0, 1000).is_err());
}

#[test]
fn discretized_mixtures_bracket() {
    for m in all_models().into_iter().skip(2) {
        let p = m.discretize(10.0, 1 << 14).unwrap();
        assert!(p.is_finite());
        for i in 0..p.grid_r {
            assert!(p.c_minus[i] <= p.c[i] && p.c[i] <= p.c_plus[i]);
        }
        assert!(p.diagnostics.mass_defect.abs() < 1e-3, "{}: {}", m.scheme(), p.diagnostics.mass_defect);
    }
}

#[test]
fn pld_csv_dump() {
    let p = model(SamplingScheme::Wor { n: 10, m: 2 }, 1.0).discretize(5.0, 10).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# schema=1");
    assert_eq!(lines[1], "s,c,c_minus,c_plus");
    assert_eq!(lines.len(), 12);
    assert!(lines[2].starts_with("-5,"));
}

proptest! {
    #[test]
    fn inverse_round_trip(which in 0usize..6, u in 0.0f64..1.0) {
        let m = &all_models()[which];
        let s2 = m.sigma() * m.sigma();
        let t0 = -3.0 * s2 + 6.0 * s2 * u;
        let t = m.invert_loss(m.loss_at(t0)).unwrap();
        prop_assert!((t - t0).abs() <= 1e-9 * t0.abs().max(1.0), "{}: {} vs {}", m.scheme(), t, t0);
    }

    #[test]
    fn newton_agrees_with_closed_forms(q in 0.01f64..0.9, sigma in 0.5f64..5.0, u in -1.0f64..1.0) {
        let n = 1000u64;
        let m = ((q * n as f64).round() as u64).max(1);
        let pm = model(SamplingScheme::Wor { n, m }, sigma);
        let s = u * 2.0;
        let a = pm.invert_loss(s).unwrap();
        let b = pm.invert_loss_newton(s).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
    }
}
