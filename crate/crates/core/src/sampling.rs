//! Sampling strategies. The stopping rules are valid for any sampler that
//! only looks at the past, so strategies are interchangeable; new ones only
//! need to map a read-only state view to a feasible decision.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::ErrorBudget;
use crate::error::{Error, Result};
use crate::linear::{evaluate_context_linear, LinearState};
use crate::space::{ActionId, ContextId, ContextSpace};
use crate::unstructured::{evaluate_context, UnstructuredState};

/// Read-only view of the learner's state handed to a strategy.
#[derive(Debug, Clone, Copy)]
pub enum StateView<'a> {
    Unstructured(&'a UnstructuredState),
    /// Linear state plus the design contexts (empty means all contexts).
    Linear(&'a LinearState, &'a [ContextId]),
}

impl StateView<'_> {
    pub fn space(&self) -> &ContextSpace {
        match self {
            StateView::Unstructured(s) => s.space(),
            StateView::Linear(s, _) => s.space(),
        }
    }

    fn pair_count(&self, x: ContextId, a: ActionId) -> u64 {
        match self {
            StateView::Unstructured(s) => s.stats(x, a).map_or(0, |p| p.n),
            StateView::Linear(s, _) => s.action_stats(a).n,
        }
    }

    /// Every sampling unit (pair, or action in the linear setting) has at
    /// least `n0` observations.
    pub fn initialized(&self, n0: u64) -> bool {
        match self {
            StateView::Unstructured(s) => s
                .space()
                .context_ids()
                .all(|x| s.context_stats(x).iter().all(|p| p.n >= n0)),
            StateView::Linear(s, _) => s
                .space()
                .used_actions()
                .iter()
                .all(|&a| s.action_stats(a).n >= n0),
        }
    }

    fn ready(&self) -> bool {
        match self {
            StateView::Unstructured(s) => s.all_ready(),
            StateView::Linear(s, _) => s.t0().is_some(),
        }
    }

    /// Design contexts where `a` is feasible.
    fn design_for(&self, a: ActionId) -> Vec<ContextId> {
        let space = self.space();
        let candidates: Vec<ContextId> = match self {
            StateView::Linear(_, design) if !design.is_empty() => design.to_vec(),
            _ => space.context_ids().collect(),
        };
        candidates
            .into_iter()
            .filter(|&x| space.is_feasible(x, a))
            .collect()
    }
}

/// Whether the learner picks the context too, or only the action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulation,
    Online(ContextId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingDecision {
    pub context: ContextId,
    pub action: ActionId,
}

/// Strategy choice as it appears in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum StrategyConfig {
    EqualAllocation {
        #[serde(default = "default_n0")]
        n0: u64,
    },
    UniformRandom {
        #[serde(default = "default_n0")]
        n0: u64,
    },
    GreedyChallenger {
        #[serde(default = "default_n0")]
        n0: u64,
    },
}

fn default_n0() -> u64 {
    10
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig::EqualAllocation { n0: default_n0() }
    }
}

impl StrategyConfig {
    pub fn n0(&self) -> u64 {
        match *self {
            StrategyConfig::EqualAllocation { n0 }
            | StrategyConfig::UniformRandom { n0 }
            | StrategyConfig::GreedyChallenger { n0 } => n0,
        }
    }

    pub fn decide<R: Rng + ?Sized>(
        &self,
        view: StateView<'_>,
        mode: Mode,
        budget: &ErrorBudget,
        delta: f64,
        rng: &mut R,
    ) -> Result<SamplingDecision> {
        match self {
            StrategyConfig::EqualAllocation { .. } => equal_allocation(view, mode),
            StrategyConfig::UniformRandom { n0 } => {
                if view.initialized(*n0) {
                    uniform_random(view, mode, rng)
                } else {
                    equal_allocation(view, mode)
                }
            }
            StrategyConfig::GreedyChallenger { n0 } => {
                if view.initialized(*n0) {
                    greedy_challenger(view, mode, budget, delta)
                } else {
                    equal_allocation(view, mode)
                }
            }
        }
    }
}

fn least_sampled(view: &StateView<'_>, x: ContextId) -> ActionId {
    let feasible = view.space().feasible(x);
    *feasible
        .iter()
        .min_by_key(|&&a| view.pair_count(x, a))
        .expect("nonempty feasible set")
}

/// Round robin. Unstructured simulation cycles the feasible pairs in
/// lexicographic order; linear simulation cycles actions and, per action,
/// its design contexts; online mode cycles the arriving context's actions.
pub fn equal_allocation(view: StateView<'_>, mode: Mode) -> Result<SamplingDecision> {
    match (mode, view) {
        (Mode::Online(x), _) => Ok(SamplingDecision {
            context: x,
            action: least_sampled(&view, x),
        }),
        (Mode::Simulation, StateView::Unstructured(s)) => {
            // The least-sampled pair, first in lexicographic order: pure
            // round robin when the learner chooses every stage, and it
            // rebalances after externally chosen stages.
            let mut best: Option<(u64, ContextId, ActionId)> = None;
            for x in s.space().context_ids() {
                for (&a, p) in s.space().feasible(x).iter().zip(s.context_stats(x)) {
                    if best.is_none_or(|(n, _, _)| p.n < n) {
                        best = Some((p.n, x, a));
                    }
                }
            }
            let (_, context, action) = best.expect("nonempty space");
            Ok(SamplingDecision { context, action })
        }
        (Mode::Simulation, StateView::Linear(s, _)) => {
            let used = s.space().used_actions();
            let action = *used
                .iter()
                .min_by_key(|&&a| s.action_stats(a).n)
                .expect("some action is feasible");
            let design = view.design_for(action);
            if design.is_empty() {
                return Err(Error::Config(format!(
                    "no design context for action {action}"
                )));
            }
            let n = s.action_stats(action).n as usize;
            Ok(SamplingDecision {
                context: design[n % design.len()],
                action,
            })
        }
    }
}

/// Uniform over feasible pairs (design contexts in the linear setting), or
/// over the arriving context's actions online.
pub fn uniform_random<R: Rng + ?Sized>(
    view: StateView<'_>,
    mode: Mode,
    rng: &mut R,
) -> Result<SamplingDecision> {
    let space = view.space();
    if let Mode::Online(x) = mode {
        let f = space.feasible(x);
        return Ok(SamplingDecision {
            context: x,
            action: f[rng.random_range(0..f.len())],
        });
    }
    let pairs: Vec<(ContextId, ActionId)> = match view {
        StateView::Linear(_, design) if !design.is_empty() => design
            .iter()
            .flat_map(|&x| space.feasible(x).iter().map(move |&a| (x, a)))
            .collect(),
        _ => space.pairs(),
    };
    let (context, action) = pairs[rng.random_range(0..pairs.len())];
    Ok(SamplingDecision { context, action })
}

/// Samples the member of the pair with the smallest certification margin
/// (statistic minus boundary) that has fewer observations. Behaves like
/// equal allocation until every unit is ready.
pub fn greedy_challenger(
    view: StateView<'_>,
    mode: Mode,
    budget: &ErrorBudget,
    delta: f64,
) -> Result<SamplingDecision> {
    if !view.ready() {
        return equal_allocation(view, mode);
    }
    let space = view.space();
    let contexts: Vec<ContextId> = match mode {
        Mode::Online(x) => vec![x],
        Mode::Simulation => space.context_ids().collect(),
    };
    let mut target: Option<(f64, ContextId, ActionId, ActionId)> = None;
    for x in contexts {
        let m = match view {
            StateView::Unstructured(s) => evaluate_context(s, budget, x, delta)?,
            StateView::Linear(s, _) => evaluate_context_linear(s, budget, x, delta)?,
        };
        let (Some(best), Some(challenger)) = (m.best, m.tightest) else {
            continue;
        };
        if m.certified {
            continue;
        }
        let mg = m.margin();
        if target.is_none_or(|(t, ..)| mg < t) {
            target = Some((mg, x, best, challenger));
        }
    }
    let Some((_, x, best, challenger)) = target else {
        return equal_allocation(view, mode);
    };
    let action = if view.pair_count(x, challenger) < view.pair_count(x, best) {
        challenger
    } else {
        best
    };
    let context = match (mode, view) {
        (Mode::Simulation, StateView::Linear(s, _)) => {
            let design = view.design_for(action);
            design[s.action_stats(action).n as usize % design.len()]
        }
        _ => x,
    };
    Ok(SamplingDecision { context, action })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{make_budget, Criterion};
    use crate::env::{replication_rng, standard_linear_env, toy_env, Environment};
    use std::collections::HashMap;

    #[test]
    fn equal_allocation_covers_pairs_once_per_cycle() {
        let env = Environment::from(toy_env());
        let mut st = UnstructuredState::new(env.shared_space().clone());
        let mut rng = replication_rng(0, 0);
        let mut seen = Vec::new();
        for _ in 0..100 {
            let d = equal_allocation(StateView::Unstructured(&st), Mode::Simulation).unwrap();
            seen.push((d.context, d.action));
            st.update(
                d.context,
                d.action,
                env.sample(d.context, d.action, &mut rng).unwrap(),
            )
            .unwrap();
        }
        assert_eq!(seen, env.space().pairs());
        for x in env.space().context_ids() {
            assert!(st.context_stats(x).iter().all(|p| p.n == 1));
        }
    }

    #[test]
    fn linear_equal_allocation_balances_actions() {
        let env = Environment::from(standard_linear_env(5));
        let mut st = LinearState::new(env.shared_space().clone()).unwrap();
        let mut rng = replication_rng(0, 0);
        let mut contexts: HashMap<ActionId, Vec<ContextId>> = HashMap::new();
        for _ in 0..(5 * 8) {
            let d = equal_allocation(
                StateView::Linear(&st, env.design_points()),
                Mode::Simulation,
            )
            .unwrap();
            contexts.entry(d.action).or_default().push(d.context);
            st.update(
                d.context,
                d.action,
                env.sample(d.context, d.action, &mut rng).unwrap(),
            )
            .unwrap();
        }
        for a in 0..5 {
            assert_eq!(st.action_stats(ActionId(a)).n, 8);
            let mut expected = env.design_points().to_vec();
            expected.extend_from_slice(env.design_points());
            assert_eq!(contexts[&ActionId(a)], expected);
        }
    }

    #[test]
    fn online_round_robin() {
        let env = Environment::from(toy_env());
        let mut st = UnstructuredState::new(env.shared_space().clone());
        let x = ContextId(4);
        for i in 0..20 {
            let d = equal_allocation(StateView::Unstructured(&st), Mode::Online(x)).unwrap();
            assert_eq!(
                d,
                SamplingDecision {
                    context: x,
                    action: ActionId(i % 10)
                }
            );
            st.update(d.context, d.action, 0.0).unwrap();
        }
    }

    #[test]
    fn uniform_random_frequencies() {
        let env = Environment::from(toy_env());
        let st = UnstructuredState::new(env.shared_space().clone());
        let mut rng = replication_rng(3, 0);
        let n = 100_000;
        let mut counts = vec![0u64; 100];
        for _ in 0..n {
            let d =
                uniform_random(StateView::Unstructured(&st), Mode::Simulation, &mut rng).unwrap();
            assert!(env.space().is_feasible(d.context, d.action));
            counts[d.context.0 * 10 + d.action.0] += 1;
        }
        let p = 0.01;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        // Bonferroni-style band across 100 cells.
        assert!(counts
            .iter()
            .all(|&c| (c as f64 - n as f64 * p).abs() < 4.5 * sd));
        let again: Vec<_> = {
            let mut r1 = replication_rng(5, 1);
            (0..10)
                .map(|_| {
                    uniform_random(StateView::Unstructured(&st), Mode::Simulation, &mut r1).unwrap()
                })
                .collect()
        };
        let mut r2 = replication_rng(5, 1);
        let twice: Vec<_> = (0..10)
            .map(|_| {
                uniform_random(StateView::Unstructured(&st), Mode::Simulation, &mut r2).unwrap()
            })
            .collect();
        assert_eq!(again, twice);
    }

    #[test]
    fn greedy_targets_the_tightest_challenger() {
        let env = Environment::from(toy_env());
        let space = env.shared_space().clone();
        let budget = make_budget(&space, Criterion::P1, 0.05).unwrap();
        let mut st = UnstructuredState::new(space.clone());
        // Pre-readiness: equal allocation.
        let d = greedy_challenger(StateView::Unstructured(&st), Mode::Simulation, &budget, 0.1)
            .unwrap();
        assert_eq!((d.context, d.action), (ContextId(0), ActionId(0)));
        for x in space.context_ids() {
            for &a in space.feasible(x) {
                let gap = if a.0 == 0 { 10.0 } else { 0.0 };
                *st.stats_mut(x, a).unwrap() = crate::stats::PairStats {
                    n: 400,
                    mean: gap,
                    m2: 399.0,
                };
            }
        }
        // One close challenger in context 3 with a sample deficit.
        *st.stats_mut(ContextId(3), ActionId(6)).unwrap() = crate::stats::PairStats {
            n: 20,
            mean: 9.9,
            m2: 19.0,
        };
        st.resync_stage();
        let d = greedy_challenger(StateView::Unstructured(&st), Mode::Simulation, &budget, 0.1)
            .unwrap();
        assert_eq!((d.context, d.action), (ContextId(3), ActionId(6)));
        let d = greedy_challenger(
            StateView::Unstructured(&st),
            Mode::Online(ContextId(3)),
            &budget,
            0.1,
        )
        .unwrap();
        assert_eq!(d.action, ActionId(6));
    }
}
