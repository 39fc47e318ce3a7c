//! Plug-in GLR evidence and stopping rules when each action's mean is linear
//! in the context features, `y(x, a) = f(x)^T beta(a)`, with an unknown
//! per-action noise variance.

use std::sync::Arc;

use crate::boundary::{boundary_linear, BoundaryValue, Criterion, ErrorBudget};
use crate::error::{Error, Result};
use crate::space::{ActionId, ContextId, ContextSpace};
use crate::stats::{LinearActionStats, OlsFit};
use crate::unstructured::{evidence, margin, ContextMargin, StopDecision, DENOMINATOR_FLOOR};

/// Least-squares fit of one action, evaluated at every context.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionFit {
    pub beta_hat: Vec<f64>,
    pub s2: f64,
    /// `f(x)^T D^{-1} f(x)` per context.
    pub sigma: Vec<f64>,
    /// `f(x)^T beta_hat` per context.
    pub fitted: Vec<f64>,
}

/// Per-action regression statistics plus cached fits.
#[derive(Debug, Clone)]
pub struct LinearState {
    space: Arc<ContextSpace>,
    per_action: Vec<LinearActionStats>,
    fits: Vec<Option<ActionFit>>,
    used: Vec<bool>,
    t: u64,
    t0: Option<u64>,
}

impl LinearState {
    /// Fails if some context has an all-zero feature vector, which carries
    /// no information about any coefficient.
    pub fn new(space: Arc<ContextSpace>) -> Result<Self> {
        for c in space.contexts() {
            if c.features.iter().all(|&v| v == 0.0) {
                return Err(Error::Config(format!(
                    "context {:?} has a zero feature vector",
                    c.label
                )));
            }
        }
        let k = space.num_actions();
        let d = space.dimension();
        let mut used = vec![false; k];
        for a in space.used_actions() {
            used[a.0] = true;
        }
        Ok(Self {
            per_action: vec![LinearActionStats::new(d); k],
            fits: vec![None; k],
            used,
            t: 0,
            t0: None,
            space,
        })
    }

    pub fn space(&self) -> &ContextSpace {
        &self.space
    }

    pub fn shared_space(&self) -> &Arc<ContextSpace> {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// First stage at which every used action had a well-defined fit.
    pub fn t0(&self) -> Option<u64> {
        self.t0
    }

    pub fn action_stats(&self, a: ActionId) -> &LinearActionStats {
        &self.per_action[a.0]
    }

    pub fn fit(&self, a: ActionId) -> Option<&ActionFit> {
        self.fits.get(a.0)?.as_ref()
    }

    pub fn is_ready(&self, a: ActionId) -> bool {
        self.fit(a).is_some()
    }

    /// Records `y` observed for action `a` in context `x`.
    pub fn update(&mut self, x: ContextId, a: ActionId, y: f64) -> Result<()> {
        if !self.space.is_feasible(x, a) {
            return Err(Error::InfeasiblePair {
                context: x.0,
                action: a.0,
            });
        }
        self.per_action[a.0].update(self.space.features(x), y)?;
        self.t += 1;
        self.refit(a);
        if self.t0.is_none() && self.ready_everywhere() {
            self.t0 = Some(self.t);
        }
        Ok(())
    }

    /// Records an observation at an arbitrary feature vector (for designs
    /// that are not context points).
    pub fn update_at(&mut self, f: &[f64], a: ActionId, y: f64) -> Result<()> {
        if !self.used.get(a.0).copied().unwrap_or(false) {
            return Err(Error::Config(format!(
                "action {a} is not feasible anywhere"
            )));
        }
        self.per_action[a.0].update(f, y)?;
        self.t += 1;
        self.refit(a);
        if self.t0.is_none() && self.ready_everywhere() {
            self.t0 = Some(self.t);
        }
        Ok(())
    }

    fn ready_everywhere(&self) -> bool {
        self.used
            .iter()
            .zip(&self.fits)
            .all(|(&u, f)| !u || f.is_some())
    }

    fn refit(&mut self, a: ActionId) {
        let stats = &self.per_action[a.0];
        let fit = stats.factor().and_then(|factor| {
            if stats.n as usize <= stats.d {
                return None;
            }
            let OlsFit { beta_hat, s2, .. } = stats.fit_with(&factor);
            let mut sigma = Vec::with_capacity(self.space.num_contexts());
            let mut fitted = Vec::with_capacity(self.space.num_contexts());
            for c in self.space.contexts() {
                sigma.push(factor.quadratic_inverse(&c.features));
                fitted.push(crate::stats::dot(&c.features, &beta_hat));
            }
            Some(ActionFit {
                beta_hat,
                s2,
                sigma,
                fitted,
            })
        });
        self.fits[a.0] = fit;
    }

    fn ready_fit(&self, a: ActionId) -> Result<&ActionFit> {
        self.fit(a)
            .ok_or_else(|| Error::NotReady(format!("action {a} has no least-squares fit yet")))
    }

    pub fn fitted(&self, x: ContextId, a: ActionId) -> Result<f64> {
        Ok(self.ready_fit(a)?.fitted[x.0])
    }

    pub fn directional_variance(&self, x: ContextId, a: ActionId) -> Result<f64> {
        Ok(self.ready_fit(a)?.sigma[x.0])
    }
}

struct PairView {
    gap: f64,
    denom: f64,
}

fn pair_view(state: &LinearState, x: ContextId, a: ActionId, b: ActionId) -> Result<PairView> {
    for c in [a, b] {
        if !state.space.is_feasible(x, c) {
            return Err(Error::InfeasiblePair {
                context: x.0,
                action: c.0,
            });
        }
    }
    let fa = state.ready_fit(a)?;
    let fb = state.ready_fit(b)?;
    Ok(PairView {
        gap: fa.fitted[x.0] - fb.fitted[x.0],
        denom: fa.s2 * fa.sigma[x.0] + fb.s2 * fb.sigma[x.0],
    })
}

/// Feasible statistic with residual variances in place of the true ones.
pub fn glr_statistic_linear(
    state: &LinearState,
    x: ContextId,
    a: ActionId,
    b: ActionId,
    eta: f64,
) -> Result<f64> {
    let v = pair_view(state, x, a, b)?;
    Ok(evidence(v.gap + eta, v.denom))
}

/// Quadratic-form log likelihood ratio with known variances, valid when
/// `f^T beta_hat(a) >= f^T beta_hat(b) - delta`.
pub fn glr_closed_form_known_variance(
    state: &LinearState,
    x: ContextId,
    a: ActionId,
    b: ActionId,
    delta: f64,
    var_a: f64,
    var_b: f64,
) -> Result<f64> {
    let v = pair_view(state, x, a, b)?;
    if v.gap + delta < 0.0 {
        return Err(Error::Precondition(format!(
            "fitted gap {} is below -delta = {}",
            v.gap, -delta
        )));
    }
    let sa = state.directional_variance(x, a)?;
    let sb = state.directional_variance(x, b)?;
    let denom = var_a * sa + var_b * sb;
    if denom < DENOMINATOR_FLOOR {
        return Err(Error::Degenerate("zero known-variance denominator".into()));
    }
    Ok(0.5 * (v.gap + delta).powi(2) / denom)
}

/// The same known-variance log ratio with the roles of the two hypotheses
/// exchanged; always the negative of [`glr_closed_form_known_variance`].
pub fn glr_closed_form_known_variance_reversed(
    state: &LinearState,
    x: ContextId,
    a: ActionId,
    b: ActionId,
    delta: f64,
    var_a: f64,
    var_b: f64,
) -> Result<f64> {
    glr_closed_form_known_variance(state, x, a, b, delta, var_a, var_b).map(|z| -z)
}

/// Inverse of [`glr_statistic_linear`] in the slack at level `phi`, clamped at zero.
pub fn certified_slack_linear(
    state: &LinearState,
    x: ContextId,
    a: ActionId,
    b: ActionId,
    phi: BoundaryValue,
) -> Result<f64> {
    let v = pair_view(state, x, a, b)?;
    if !phi.is_active() {
        return Ok(f64::INFINITY);
    }
    Ok(((2.0 * phi.value * v.denom).sqrt() - v.gap).max(0.0))
}

/// Arg-max of the fitted values in context `x`; ties go to the lowest id.
pub fn empirical_best_linear(state: &LinearState, x: ContextId) -> Result<ActionId> {
    let mut best: Option<(ActionId, f64)> = None;
    for &a in state.space.feasible(x) {
        let y = state.fitted(x, a)?;
        if best.is_none_or(|(_, b)| y > b) {
            best = Some((a, y));
        }
    }
    Ok(best.expect("feasible sets are nonempty").0)
}

/// Pairwise evidence, boundaries and slacks for every challenger of the
/// empirical best in context `x`. Nothing is certified before `t0`.
pub fn evaluate_context_linear(
    state: &LinearState,
    budget: &ErrorBudget,
    x: ContextId,
    delta: f64,
) -> Result<ContextMargin> {
    let feasible = state.space.feasible(x);
    let Some(level) = budget.get(x) else {
        return Ok(ContextMargin::singleton(x, feasible[0]));
    };
    let best = match empirical_best_linear(state, x) {
        Ok(b) if state.t0.is_some() => b,
        Ok(b) => {
            let mut m = ContextMargin::unready(x);
            m.best = Some(b);
            return Ok(m);
        }
        Err(_) => return Ok(ContextMargin::unready(x)),
    };
    let d = state.dimension();
    let fb = state.ready_fit(best)?;
    let nb = state.per_action[best.0].n;
    let mut out = ContextMargin {
        context: x,
        best: Some(best),
        tightest: None,
        statistic: f64::INFINITY,
        boundary: 0.0,
        slack: 0.0,
        regret: 0.0,
        certified: true,
    };
    let mut tightest = f64::INFINITY;
    for &c in feasible {
        if c == best {
            continue;
        }
        let fc = state.ready_fit(c)?;
        let gap = fb.fitted[x.0] - fc.fitted[x.0];
        let denom = fb.s2 * fb.sigma[x.0] + fc.s2 * fc.sigma[x.0];
        let z = evidence(gap + delta, denom);
        let phi = boundary_linear(
            nb,
            1.0 / fb.sigma[x.0],
            state.per_action[c.0].n,
            1.0 / fc.sigma[x.0],
            level,
            d,
        )?;
        let w = if phi.is_active() {
            ((2.0 * phi.value * denom).sqrt() - gap).max(0.0)
        } else {
            f64::INFINITY
        };
        out.certified &= z > phi.value;
        out.regret = out.regret.max(w);
        let mg = margin(z, phi.value);
        if out.tightest.is_none() || mg < tightest {
            tightest = mg;
            out.tightest = Some(c);
            out.statistic = z;
            out.boundary = phi.value;
            out.slack = w;
        }
    }
    Ok(out)
}

fn check_linear(
    state: &LinearState,
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
        .space
        .context_ids()
        .map(|x| evaluate_context_linear(state, budget, x, delta))
        .collect::<Result<Vec<_>>>()?;
    let probs: Vec<f64> = state.space.contexts().iter().map(|c| c.prob).collect();
    Ok(StopDecision::assemble(want, delta, margins, &probs))
}

/// Stops once `t >= t0` and every challenger everywhere is out-evidenced at slack `delta`.
pub fn check_stop_p1_linear(
    state: &LinearState,
    budget: &ErrorBudget,
    delta: f64,
) -> Result<StopDecision> {
    check_linear(state, budget, delta, Criterion::P1)
}

/// Stops once the probability-weighted certified regret is at most `delta`.
pub fn check_stop_p2_linear(
    state: &LinearState,
    budget: &ErrorBudget,
    delta: f64,
) -> Result<StopDecision> {
    check_linear(state, budget, delta, Criterion::P2)
}
