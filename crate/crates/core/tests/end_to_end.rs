//! Whole-pipeline checks through the experiment harness.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use glrstop::boundary::make_budget;
use glrstop::env::{replication_rng, standard_linear_env, EnvironmentFile};
use glrstop::harness::{BuiltinEnvironment, EnvironmentRef, Experiment, ExperimentConfig, Setting};
use glrstop::linear::{check_stop_p1_linear, check_stop_p2_linear, LinearState};
use glrstop::sampling::{StateView, StrategyConfig};
use glrstop::unstructured::{check_stop_p1, check_stop_p2, UnstructuredState};
use glrstop::{ActionId, ContextId, ContextSpace, Criterion};

/// Three contexts, three actions, gaps of 0.4 to 1.0 and unit-scale noise.
fn small_env() -> EnvironmentRef {
    let text = r#"{
        "type": "tabular",
        "contexts": [{"id": "low"}, {"id": "mid"}, {"id": "high"}],
        "actions": ["a", "b", "c"],
        "truth": [[0.0, 0.5, 1.0], [1.0, 0.6, 0.0], [0.2, 1.2, 0.7]],
        "noise": [[0.5, 0.7, 0.6], [0.6, 0.5, 0.8], [0.7, 0.6, 0.5]],
        "weights": [1, 2, 1]
    }"#;
    EnvironmentRef::Inline(serde_json::from_str::<EnvironmentFile>(text).unwrap())
}

fn small_config(criterion: Criterion, strategy: StrategyConfig) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(small_env(), Setting::Unstructured, criterion, 0.05, 0.1);
    c.strategy = strategy;
    c.replications = 200;
    c.seed = 21;
    c.t_max = 1_000_000;
    c
}

#[test]
fn worker_count_does_not_change_report() {
    let mut c = small_config(Criterion::P1, StrategyConfig::UniformRandom { n0: 5 });
    c.replications = 24;
    let exp = Experiment::new(c).unwrap();
    let one = exp.run(Some(1)).unwrap();
    let three = exp.run(Some(3)).unwrap();
    assert_eq!(one, three);
}

#[test]
fn every_strategy_meets_both_guarantees() {
    let floor = 0.95 - 3.0 * (0.05f64 * 0.95 / 200.0).sqrt();
    for strategy in [
        StrategyConfig::EqualAllocation { n0: 10 },
        StrategyConfig::UniformRandom { n0: 10 },
        StrategyConfig::GreedyChallenger { n0: 10 },
    ] {
        let p1 = Experiment::new(small_config(Criterion::P1, strategy))
            .unwrap()
            .run(None)
            .unwrap();
        let p2 = Experiment::new(small_config(Criterion::P2, strategy))
            .unwrap()
            .run(None)
            .unwrap();
        assert_eq!(p1.censor_count + p2.censor_count, 0, "{strategy:?}");
        assert!(
            p1.empirical_p1 >= floor,
            "{strategy:?}: P_I {}",
            p1.empirical_p1
        );
        assert!(
            p2.empirical_p2 >= floor,
            "{strategy:?}: P_II {}",
            p2.empirical_p2
        );
    }
}

#[test]
fn larger_slack_stops_no_later() {
    for criterion in [Criterion::P1, Criterion::P2] {
        for strategy in [
            StrategyConfig::EqualAllocation { n0: 5 },
            StrategyConfig::UniformRandom { n0: 5 },
        ] {
            for rep in 0..5 {
                let mut last = u64::MAX;
                for delta in [0.0, 0.05, 0.1, 0.3, 1.0] {
                    let mut c = small_config(criterion, strategy);
                    c.delta = delta;
                    let r = Experiment::new(c).unwrap().run_replication(rep).unwrap();
                    assert!(
                        r.stop_time <= last,
                        "{criterion:?} {strategy:?} rep {rep} delta {delta}"
                    );
                    last = r.stop_time;
                }
            }
        }
    }
}

#[test]
fn identical_seeds_replay_identically() {
    let c = small_config(Criterion::P2, StrategyConfig::GreedyChallenger { n0: 5 });
    let exp = Experiment::new(c.clone()).unwrap();
    let other = Experiment::new(c).unwrap();
    for rep in 0..4 {
        assert_eq!(
            exp.run_replication(rep).unwrap(),
            other.run_replication(rep).unwrap()
        );
    }
}

#[test]
fn weighted_regret_shrinks_on_standard_case() {
    let env = glrstop::env::Environment::from(standard_linear_env(10));
    let space = env.shared_space().clone();
    let design = env.design_points().to_vec();
    let budget = make_budget(&space, Criterion::P2, 0.05).unwrap();
    let strategy = StrategyConfig::EqualAllocation { n0: 10 };
    for rep in 0..20 {
        let mut rng = replication_rng(31, rep);
        let mut state = LinearState::new(space.clone()).unwrap();
        let mut first = None;
        loop {
            let view = StateView::Linear(&state, &design);
            let dec = strategy
                .decide(
                    view,
                    glrstop::sampling::Mode::Simulation,
                    &budget,
                    0.5,
                    &mut rng,
                )
                .unwrap();
            let y = env.sample(dec.context, dec.action, &mut rng).unwrap();
            state.update(dec.context, dec.action, y).unwrap();
            if !StateView::Linear(&state, &design).initialized(10) {
                continue;
            }
            let d = check_stop_p2_linear(&state, &budget, 0.5).unwrap();
            if first.is_none() && d.weighted_regret.is_finite() {
                first = Some(d.weighted_regret);
            }
            if d.stop {
                assert!(d.weighted_regret <= first.unwrap(), "rep {rep}");
                break;
            }
            assert!(state.t() < 100_000);
        }
    }
}

/// With one context of feature 1 and equal counts per action, the two
/// rules coincide exactly once the unstructured variances use divisor `n`.
#[test]
fn scalar_reduction_is_exact_with_matching_variance_divisor() {
    let k = 3usize;
    let space = Arc::new(
        ContextSpace::full(
            vec![vec![1.0]],
            &[1.0],
            (0..k).map(|i| format!("a{i}")).collect(),
            1,
        )
        .unwrap(),
    );
    let mut compared = 0;
    for seed in 0..20 {
        let mut rng = replication_rng(seed, 0);
        let means: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let sds: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
        for criterion in [Criterion::P1, Criterion::P2] {
            let budget = make_budget(&space, criterion, 0.05).unwrap();
            let mut tab = UnstructuredState::new(space.clone());
            let mut lin = LinearState::new(space.clone()).unwrap();
            let mut rng = replication_rng(seed, 1);
            for t in 1..=1500u64 {
                let a = ActionId(((t - 1) % k as u64) as usize);
                let y = means[a.0] + sds[a.0] * rng.sample::<f64, _>(StandardNormal);
                tab.update(ContextId(0), a, y).unwrap();
                lin.update(ContextId(0), a, y).unwrap();
                if t % k as u64 != 0 || !tab.all_ready() {
                    continue;
                }
                let mut ml = tab.clone();
                for b in 0..k {
                    let s = ml.stats_mut(ContextId(0), ActionId(b)).unwrap();
                    s.m2 *= (s.n - 1) as f64 / s.n as f64;
                }
                let (u, l) = match criterion {
                    Criterion::P1 => (
                        check_stop_p1(&ml, &budget, 0.1).unwrap(),
                        check_stop_p1_linear(&lin, &budget, 0.1).unwrap(),
                    ),
                    Criterion::P2 => (
                        check_stop_p2(&ml, &budget, 0.1).unwrap(),
                        check_stop_p2_linear(&lin, &budget, 0.1).unwrap(),
                    ),
                };
                assert_eq!(u.stop, l.stop, "seed {seed} stage {t} {criterion:?}");
                assert_eq!(u.policy, l.policy);
                compared += 1;
            }
        }
    }
    assert!(compared > 10_000);
}

#[test]
fn builtin_environments_run() {
    for env in [
        BuiltinEnvironment::DixonPrice { seed: 3 },
        BuiltinEnvironment::EcCase { case: 1 },
        BuiltinEnvironment::EcCase { case: 5 },
    ] {
        let setting = match env {
            BuiltinEnvironment::DixonPrice { .. } => Setting::Unstructured,
            _ => Setting::Linear,
        };
        let mut c = ExperimentConfig::new(
            EnvironmentRef::Builtin(env.clone()),
            setting,
            Criterion::P2,
            0.05,
            0.5,
        );
        c.replications = 3;
        c.t_max = 200_000;
        let r = Experiment::new(c).unwrap().run(Some(1)).unwrap();
        assert_eq!(r.censor_count, 0, "{env:?}");
        assert_eq!(r.results.len(), 3);
    }
}
