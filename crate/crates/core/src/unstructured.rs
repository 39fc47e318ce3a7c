//! Plug-in GLR evidence and stopping rules when every context-action pair
//! has its own unknown mean and variance.

use std::sync::Arc;

use crate::boundary::{boundary_unstructured, BoundaryValue, Criterion, ErrorBudget};
use crate::error::{Error, Result};
use crate::space::{ActionId, ContextId, ContextSpace};
use crate::stats::PairStats;

/// Denominators below this are treated as exactly zero.
pub(crate) const DENOMINATOR_FLOOR: f64 = 1e-300;

/// Streaming statistics for every feasible pair.
#[derive(Debug, Clone)]
pub struct UnstructuredState {
    space: Arc<ContextSpace>,
    /// Start of each context's block in `stats`; blocks follow `A(x)` order.
    offsets: Vec<usize>,
    stats: Vec<PairStats>,
    t: u64,
}

impl UnstructuredState {
    pub fn new(space: Arc<ContextSpace>) -> Self {
        let mut offsets = Vec::with_capacity(space.num_contexts() + 1);
        let mut total = 0;
        for x in space.context_ids() {
            offsets.push(total);
            total += space.feasible(x).len();
        }
        offsets.push(total);
        Self {
            space,
            offsets,
            stats: vec![PairStats::new(); total],
            t: 0,
        }
    }

    pub fn space(&self) -> &ContextSpace {
        &self.space
    }

    pub fn shared_space(&self) -> &Arc<ContextSpace> {
        &self.space
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    fn index(&self, x: ContextId, a: ActionId) -> Result<usize> {
        self.space
            .position(x, a)
            .map(|p| self.offsets[x.0] + p)
            .ok_or(Error::InfeasiblePair {
                context: x.0,
                action: a.0,
            })
    }

    pub fn update(&mut self, x: ContextId, a: ActionId, y: f64) -> Result<()> {
        let i = self.index(x, a)?;
        self.stats[i].push(y);
        self.t += 1;
        Ok(())
    }

    pub fn stats(&self, x: ContextId, a: ActionId) -> Result<&PairStats> {
        self.index(x, a).map(|i| &self.stats[i])
    }

    /// Statistics of context `x`, aligned with `space().feasible(x)`.
    pub fn context_stats(&self, x: ContextId) -> &[PairStats] {
        &self.stats[self.offsets[x.0]..self.offsets[x.0 + 1]]
    }

    /// Mutable access for constructing states directly in tests and tools.
    pub fn stats_mut(&mut self, x: ContextId, a: ActionId) -> Result<&mut PairStats> {
        let i = self.index(x, a)?;
        Ok(&mut self.stats[i])
    }

    /// Recomputes `t` after direct edits through [`Self::stats_mut`].
    pub fn resync_stage(&mut self) {
        self.t = self.stats.iter().map(|s| s.n).sum();
    }

    pub fn context_ready(&self, x: ContextId) -> bool {
        self.context_stats(x).iter().all(PairStats::is_ready)
    }

    pub fn all_ready(&self) -> bool {
        self.stats.iter().all(PairStats::is_ready)
    }
}

/// Arg-max of the sample means in context `x`; ties go to the lowest id.
pub fn empirical_best(state: &UnstructuredState, x: ContextId) -> Result<ActionId> {
    best_index(state.context_stats(x))
        .map(|i| state.space().feasible(x)[i])
        .ok_or_else(|| Error::NotReady(format!("context {x} has an unsampled action")))
}

fn best_index(stats: &[PairStats]) -> Option<usize> {
    if stats.iter().any(|s| s.n == 0) {
        return None;
    }
    let mut best = 0;
    for (i, s) in stats.iter().enumerate().skip(1) {
        if s.mean > stats[best].mean {
            best = i;
        }
    }
    Some(best)
}

fn pooled_variance(sa: &PairStats, sb: &PairStats) -> Result<f64> {
    match (sa.mean_variance(), sb.mean_variance()) {
        (Some(va), Some(vb)) => Ok(va + vb),
        _ => Err(Error::NotReady("need two samples per action".into())),
    }
}

/// Squared gap over twice a variance, with the zero-variance limits
/// `0` (zero gap) and `+inf`.
pub(crate) fn evidence(gap: f64, denom: f64) -> f64 {
    if denom < DENOMINATOR_FLOOR {
        if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        0.5 * gap * gap / denom
    }
}

/// Evidence that `a` beats `b` by at least `-eta`:
/// `(mean_a - mean_b + eta)^2 / (2 (S_a^2/n_a + S_b^2/n_b))`.
pub fn glr_statistic(sa: &PairStats, sb: &PairStats, eta: f64) -> Result<f64> {
    let denom = pooled_variance(sa, sb)?;
    Ok(evidence(sa.mean - sb.mean + eta, denom))
}

/// Smallest slack certified at level `phi`, i.e. the inverse of
/// [`glr_statistic`] in `eta`, clamped at zero.
pub fn certified_slack(sa: &PairStats, sb: &PairStats, phi: BoundaryValue) -> Result<f64> {
    let denom = pooled_variance(sa, sb)?;
    if !phi.is_active() {
        return Ok(f64::INFINITY);
    }
    Ok(((2.0 * phi.value * denom).sqrt() - (sa.mean - sb.mean)).max(0.0))
}

/// Per-context diagnostics of a stopping check.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextMargin {
    pub context: ContextId,
    pub best: Option<ActionId>,
    /// Challenger with the smallest `statistic - boundary`.
    pub tightest: Option<ActionId>,
    pub statistic: f64,
    pub boundary: f64,
    /// Certified slack of the tightest challenger.
    pub slack: f64,
    /// Largest certified slack over all challengers.
    pub regret: f64,
    /// Every challenger's statistic strictly exceeds its boundary.
    pub certified: bool,
}

impl ContextMargin {
    pub(crate) fn unready(context: ContextId) -> Self {
        Self {
            context,
            best: None,
            tightest: None,
            statistic: 0.0,
            boundary: f64::INFINITY,
            slack: f64::INFINITY,
            regret: f64::INFINITY,
            certified: false,
        }
    }

    pub(crate) fn singleton(context: ContextId, best: ActionId) -> Self {
        Self {
            context,
            best: Some(best),
            tightest: None,
            statistic: f64::INFINITY,
            boundary: 0.0,
            slack: 0.0,
            regret: 0.0,
            certified: true,
        }
    }

    /// `statistic - boundary`, ordered so inactive boundaries rank lowest.
    pub fn margin(&self) -> f64 {
        margin(self.statistic, self.boundary)
    }
}

pub(crate) fn margin(statistic: f64, boundary: f64) -> f64 {
    if boundary.is_infinite() {
        f64::NEG_INFINITY
    } else {
        statistic - boundary
    }
}

/// Outcome of a stopping check: the decision, the current empirical policy
/// (`None` where some action is unsampled) and per-context diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StopDecision {
    pub stop: bool,
    pub policy: Vec<Option<ActionId>>,
    pub margins: Vec<ContextMargin>,
    /// `sum_x p(x) r(x)`; `+inf` while any context is unready.
    pub weighted_regret: f64,
}

impl StopDecision {
    pub(crate) fn assemble(
        criterion: Criterion,
        delta: f64,
        margins: Vec<ContextMargin>,
        probs: &[f64],
    ) -> Self {
        let weighted_regret = weighted_regret(&margins, probs);
        let stop = match criterion {
            Criterion::P1 => margins.iter().all(|m| m.certified),
            Criterion::P2 => weighted_regret <= delta,
        };
        let policy = margins.iter().map(|m| m.best).collect();
        Self {
            stop,
            policy,
            margins,
            weighted_regret,
        }
    }
}

fn weighted_regret(margins: &[ContextMargin], probs: &[f64]) -> f64 {
    margins
        .iter()
        .zip(probs)
        .map(|(m, p)| if m.regret == 0.0 { 0.0 } else { p * m.regret })
        .sum()
}

/// Evaluates every challenger of the empirical best in context `x` at
/// slack `delta` and its boundary under `budget`.
pub fn evaluate_context(
    state: &UnstructuredState,
    budget: &ErrorBudget,
    x: ContextId,
    delta: f64,
) -> Result<ContextMargin> {
    let feasible = state.space().feasible(x);
    let Some(level) = budget.get(x) else {
        return Ok(ContextMargin::singleton(x, feasible[0]));
    };
    let stats = state.context_stats(x);
    if !stats.iter().all(PairStats::is_ready) {
        let mut m = ContextMargin::unready(x);
        m.best = best_index(stats).map(|i| feasible[i]);
        return Ok(m);
    }
    let bi = best_index(stats).expect("ready context has samples");
    let sb = &stats[bi];
    let mut out = ContextMargin {
        context: x,
        best: Some(feasible[bi]),
        tightest: None,
        statistic: f64::INFINITY,
        boundary: 0.0,
        slack: 0.0,
        regret: 0.0,
        certified: true,
    };
    let mut tightest = f64::INFINITY;
    for (j, sc) in stats.iter().enumerate() {
        if j == bi {
            continue;
        }
        let z = glr_statistic(sb, sc, delta)?;
        let phi = boundary_unstructured(sb.n, sc.n, level)?;
        let w = certified_slack(sb, sc, phi)?;
        out.certified &= z > phi.value;
        out.regret = out.regret.max(w);
        let mg = margin(z, phi.value);
        if out.tightest.is_none() || mg < tightest {
            tightest = mg;
            out.tightest = Some(feasible[j]);
            out.statistic = z;
            out.boundary = phi.value;
            out.slack = w;
        }
    }
    Ok(out)
}

/// Largest certified slack of the empirical best against its challengers.
pub fn context_regret(
    state: &UnstructuredState,
    budget: &ErrorBudget,
    x: ContextId,
) -> Result<f64> {
    if budget.get(x).is_some() && !state.context_ready(x) {
        return Err(Error::NotReady(format!("context {x} is not ready")));
    }
    Ok(evaluate_context(state, budget, x, 0.0)?.regret)
}

fn check(
    state: &UnstructuredState,
    budget: &ErrorBudget,
    delta: f64,
    want: Criterion,
) -> Result<StopDecision> {
    if budget.criterion != want {
        return Err(Error::Config(format!(
            "{want} rule given a {} budget",
            budget.criterion
        )));
    }
    let margins = state
        .space()
        .context_ids()
        .map(|x| evaluate_context(state, budget, x, delta))
        .collect::<Result<Vec<_>>>()?;
    let probs: Vec<f64> = state.space().contexts().iter().map(|c| c.prob).collect();
    Ok(StopDecision::assemble(want, delta, margins, &probs))
}

/// Stops once every challenger in every context is out-evidenced at slack `delta`.
pub fn check_stop_p1(
    state: &UnstructuredState,
    budget: &ErrorBudget,
    delta: f64,
) -> Result<StopDecision> {
    check(state, budget, delta, Criterion::P1)
}

/// Stops once the probability-weighted certified regret is at most `delta`.
pub fn check_stop_p2(
    state: &UnstructuredState,
    budget: &ErrorBudget,
    delta: f64,
) -> Result<StopDecision> {
    check(state, budget, delta, Criterion::P2)
}

/// Incremental stopping check: only contexts whose statistics changed since
/// the last call are re-evaluated. Decisions equal the full checks.
#[derive(Debug, Clone)]
pub struct StopTracker {
    budget: ErrorBudget,
    delta: f64,
    probs: Vec<f64>,
    cache: Vec<Option<ContextMargin>>,
}

impl StopTracker {
    pub fn new(space: &ContextSpace, budget: ErrorBudget, delta: f64) -> Self {
        Self {
            budget,
            delta,
            probs: space.contexts().iter().map(|c| c.prob).collect(),
            cache: vec![None; space.num_contexts()],
        }
    }

    pub fn invalidate(&mut self, x: ContextId) {
        self.cache[x.0] = None;
    }

    fn refresh(&mut self, state: &UnstructuredState) -> Result<()> {
        for (i, slot) in self.cache.iter_mut().enumerate() {
            if slot.is_none() {
                *slot = Some(evaluate_context(
                    state,
                    &self.budget,
                    ContextId(i),
                    self.delta,
                )?);
            }
        }
        Ok(())
    }

    fn margins(&self) -> impl Iterator<Item = &ContextMargin> {
        self.cache.iter().map(|m| m.as_ref().expect("refreshed"))
    }

    pub fn should_stop(&mut self, state: &UnstructuredState) -> Result<bool> {
        self.refresh(state)?;
        Ok(match self.budget.criterion {
            Criterion::P1 => self.margins().all(|m| m.certified),
            Criterion::P2 => {
                let mut sum = 0.0;
                for (m, p) in self.margins().zip(&self.probs) {
                    if m.regret != 0.0 {
                        sum += p * m.regret;
                    }
                }
                sum <= self.delta
            }
        })
    }

    pub fn decide(&mut self, state: &UnstructuredState) -> Result<StopDecision> {
        self.refresh(state)?;
        let margins = self.margins().cloned().collect();
        Ok(StopDecision::assemble(
            self.budget.criterion,
            self.delta,
            margins,
            &self.probs,
        ))
    }
}
