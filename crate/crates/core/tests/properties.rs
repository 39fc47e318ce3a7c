//! Property tests for the boundary, statistic and martingale invariants.

use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use glrstop::boundary::{gamma, gamma_l, rho, BoundaryValue};
use glrstop::env::replication_rng;
use glrstop::linear::{glr_closed_form_known_variance, glr_statistic_linear, LinearState};
use glrstop::stats::PairStats;
use glrstop::unstructured::{certified_slack, glr_statistic};
use glrstop::validation::{
    endpoint_minimizer, endpoint_minimizer_linear, gaussian_mixture_martingale,
    linear_mixture_martingale,
};
use glrstop::{ActionId, ContextId, ContextSpace, LinearActionStats};

fn pair(samples: &[f64]) -> PairStats {
    PairStats::from_samples(samples)
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 2..40)
}

#[test]
fn activation_length_at_five_percent() {
    for t in 1..=4 {
        assert!(rho(t, 0.05) <= 0.0 && gamma(t, 0.05).is_infinite());
    }
    assert!(rho(5, 0.05) > 0.0 && gamma(5, 0.05).is_finite());
}

#[test]
fn active_boundaries_are_finite_and_positive() {
    for alpha in [0.5, 0.05, 0.005] {
        let mut t = 1u64;
        while t <= 100_000_000 {
            let g = gamma(t, alpha);
            if rho(t, alpha) > 0.0 {
                assert!(g.is_finite() && g > 0.0, "t={t} alpha={alpha}");
            }
            t = t * 3 / 2 + 1;
        }
    }
}

#[test]
fn gamma_matches_high_precision_reference() {
    // t^2/rho - t at t = 1e8, alpha = 0.005 in 60-digit arithmetic is
    // 29.0173199872451175346736150507721980302551322, rounded to double precision.
    let reference = 29.017_319_987_245_116_f64;
    let g = gamma(100_000_000, 0.005);
    assert!(
        (g - reference).abs() <= 1e-6 * reference,
        "{g} vs {reference}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gamma_decreases_in_alpha(t in 10u64..10_000_000, a1 in 0.001f64..0.9, a2 in 0.001f64..0.9) {
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        prop_assume!(hi - lo > 1e-6);
        let (g_lo, g_hi) = (gamma(t, lo), gamma(t, hi));
        prop_assume!(g_lo.is_finite());
        prop_assert!(g_lo >= g_hi);
    }

    #[test]
    fn linear_gamma_decreases_in_alpha(t in 10u64..1_000_000, d in 1usize..4, a1 in 0.001f64..0.9, a2 in 0.001f64..0.9) {
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        prop_assume!(hi - lo > 1e-6);
        let g_lo = gamma_l(t, t as f64, lo, d).unwrap();
        prop_assume!(g_lo.is_finite());
        prop_assert!(g_lo >= gamma_l(t, t as f64, hi, d).unwrap());
    }

    #[test]
    fn zero_slack_symmetry(a in samples(), b in samples()) {
        let (sa, sb) = (pair(&a), pair(&b));
        prop_assert_eq!(glr_statistic(&sa, &sb, 0.0).unwrap(), glr_statistic(&sb, &sa, 0.0).unwrap());
    }

    #[test]
    fn slack_inverts_statistic(a in samples(), b in samples(), phi in 0.5f64..200.0) {
        let (sa, sb) = (pair(&a), pair(&b));
        prop_assume!(sa.mean_variance().unwrap() + sb.mean_variance().unwrap() > 1e-6);
        let w = certified_slack(&sa, &sb, BoundaryValue::new(phi)).unwrap();
        prop_assume!(w > 1e-9 * (sa.mean - sb.mean).abs().max(1.0));
        let z = glr_statistic(&sa, &sb, w).unwrap();
        prop_assert!((z - phi).abs() <= 1e-9 * phi, "z={} phi={}", z, phi);
    }

    #[test]
    fn evidence_nondecreasing_in_slack(a in samples(), b in samples(), e1 in 0.0f64..50.0, e2 in 0.0f64..50.0) {
        let (sa, sb) = if pair(&a).mean >= pair(&b).mean { (pair(&a), pair(&b)) } else { (pair(&b), pair(&a)) };
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(glr_statistic(&sa, &sb, lo).unwrap() <= glr_statistic(&sa, &sb, hi).unwrap());
    }

    #[test]
    fn linear_statistic_matches_known_variance_form(seed in any::<u64>(), delta in 0.0f64..2.0) {
        let mut rng = replication_rng(seed, 0);
        let feats: Vec<Vec<f64>> = (0..4).map(|_| vec![1.0, rng.random_range(-1.0..1.0)]).collect();
        let space = ContextSpace::full(feats.clone(), &[1.0; 4], vec!["a".into(), "b".into()], 2).unwrap();
        let mut state = LinearState::new(Arc::new(space)).unwrap();
        for a in 0..2 {
            for i in 0..12 {
                let x = ContextId(i % 4);
                let y = feats[x.0][1] * (a as f64 + 1.0) + rng.sample::<f64, _>(StandardNormal);
                state.update(x, ActionId(a), y).unwrap();
            }
        }
        let (va, vb) = (state.fit(ActionId(0)).unwrap().s2, state.fit(ActionId(1)).unwrap().s2);
        for x in 0..4 {
            let x = ContextId(x);
            if let Ok(z) = glr_closed_form_known_variance(&state, x, ActionId(0), ActionId(1), delta, va, vb) {
                let feasible = glr_statistic_linear(&state, x, ActionId(0), ActionId(1), delta).unwrap();
                prop_assert!((z - feasible).abs() <= 1e-12 * z.abs().max(1.0));
            }
        }
    }

    #[test]
    fn martingale_threshold_matches_boundary(seed in any::<u64>(), mu in -1.0f64..1.0, beta in 0.001f64..0.5) {
        // The equivalence is exact with the maximum-likelihood variance.
        let mut rng = replication_rng(seed, 0);
        let ys: Vec<f64> = (0..300).map(|_| mu + 0.3 + rng.sample::<f64, _>(StandardNormal)).collect();
        let path = gaussian_mixture_martingale(&ys, mu, 1.0).unwrap();
        let mut st = PairStats::new();
        let mut compared = 0;
        for (i, &y) in ys.iter().enumerate() {
            st.push(y);
            let n = st.n as f64;
            let g = path.values[i];
            let threshold = 0.5 * gamma(st.n, beta);
            if i == 0 || !threshold.is_finite() {
                continue;
            }
            let v = n * (st.mean - mu).powi(2) / (2.0 * st.m2 / n);
            if ((g * beta) - 1.0).abs() > 1e-9 && (v - threshold).abs() > 1e-9 * threshold {
                prop_assert_eq!(g >= 1.0 / beta, v >= threshold, "stage {}", i + 1);
                compared += 1;
            }
        }
        prop_assert!(compared > 0);
    }

    #[test]
    fn linear_martingale_threshold_matches_boundary(seed in any::<u64>(), beta in 0.001f64..0.5) {
        let mut rng = replication_rng(seed, 0);
        let beta_true = [1.0, -0.5];
        let xs: Vec<Vec<f64>> = (0..200).map(|_| vec![1.0, rng.random_range(0.0..1.0)]).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x[0] * beta_true[0] + x[1] * beta_true[1] + 0.2 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let f = [1.0, 0.5];
        let path = linear_mixture_martingale(&xs, &ys, &f, &beta_true, 1.0).unwrap();
        let mut stats = LinearActionStats::new(2);
        let mut compared = 0;
        for (x, &y) in xs.iter().zip(&ys) {
            stats.update(x, y).unwrap();
            let Some(g) = path.at(stats.n) else { continue };
            let fit = stats.ols_solution();
            let sigma = stats.factor().unwrap().quadratic_inverse(&f);
            let dev = f[0] * (fit.beta_hat[0] - beta_true[0]) + f[1] * (fit.beta_hat[1] - beta_true[1]);
            let v = dev * dev / (2.0 * fit.s2 * sigma);
            let threshold = 0.5 * gamma_l(stats.n, 1.0 / sigma, beta, 2).unwrap();
            if !threshold.is_finite() {
                continue;
            }
            if ((g * beta) - 1.0).abs() > 1e-9 && (v - threshold).abs() > 1e-9 * threshold {
                prop_assert_eq!(g >= 1.0 / beta, v >= threshold, "stage {}", stats.n);
                compared += 1;
            }
        }
        prop_assert!(compared > 0);
    }

    #[test]
    fn product_minimized_at_an_endpoint(n1 in 2u64..500, n2 in 2u64..500, v in 0.01f64..50.0) {
        let i = endpoint_minimizer(n1, n2, v, 1001);
        prop_assert!(i <= 1 || i >= 999, "argmin index {}", i);
    }

    #[test]
    fn linear_product_minimized_at_an_endpoint(
        n1 in 4u64..500, n2 in 4u64..500, l1 in 0.5f64..1.0, l2 in 0.5f64..1.0, v in 0.01f64..50.0, d in 1usize..4,
    ) {
        let lambda = [l1 * n1 as f64, l2 * n2 as f64];
        let i = endpoint_minimizer_linear([n1, n2], lambda, d, v, 1001);
        prop_assert!(i <= 1 || i >= 999, "argmin index {}", i);
    }
}
