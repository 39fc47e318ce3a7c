//! Time-uniform boundaries for pairwise GLR evidence and their per-context
//! error budgets.
//!
//! Every power is evaluated in log space. Writing `e` for the log of the
//! root, `rho = t + (t + 1) * expm1(e)` and `t^2/rho - t = -t (t + 1) expm1(e) / rho`,
//! which keeps full relative precision up to `t ~ 1e9` and beyond.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ContextId, ContextSpace};

/// Which precision criterion a budget (and stopping rule) targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Context-weighted probability of a delta-optimal action.
    P1,
    /// Probability that the policy value is within delta of optimal.
    P2,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::P1 => "P1",
            Criterion::P2 => "P2",
        })
    }
}

/// A boundary level: finite and nonnegative, or `+inf` while inactive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BoundaryValue {
    pub value: f64,
}

impl BoundaryValue {
    pub const INACTIVE: Self = Self {
        value: f64::INFINITY,
    };

    pub fn new(value: f64) -> Self {
        debug_assert!(value >= 0.0);
        Self { value }
    }

    pub fn is_active(&self) -> bool {
        self.value.is_finite()
    }

    fn max(self, other: Self) -> Self {
        if self.value >= other.value {
            self
        } else {
            other
        }
    }
}

/// `rho(t, alpha) = (alpha^2/(t+1))^(1/t) (t+1) - 1`.
pub fn rho(t: u64, alpha: f64) -> f64 {
    debug_assert!(t >= 1);
    let t = t as f64;
    let e = (2.0 * alpha.ln() - t.ln_1p()) / t;
    t + (t + 1.0) * e.exp_m1()
}

/// The unstructured boundary function; `+inf` while `rho <= 0`.
pub fn gamma(t: u64, alpha: f64) -> f64 {
    debug_assert!(t >= 1);
    let tf = t as f64;
    let e = (2.0 * alpha.ln() - tf.ln_1p()) / tf;
    let r = tf + (tf + 1.0) * e.exp_m1();
    if r <= 0.0 {
        return f64::INFINITY;
    }
    -tf * (tf + 1.0) * e.exp_m1() / r
}

/// Activation quantity of the linear boundary,
/// `(alpha^2/(t2+1))^(1/(t1-d+1)) (t2+1) - 1`.
pub fn rho_l(t1: u64, t2: f64, alpha: f64, d: usize) -> Result<f64> {
    let (_, e) = linear_exponent(t1, t2, alpha, d)?;
    Ok(t2 + (t2 + 1.0) * e.exp_m1())
}

/// The linear boundary function with sample size `t1`, information `t2`
/// and dimension `d`; `+inf` while inactive.
pub fn gamma_l(t1: u64, t2: f64, alpha: f64, d: usize) -> Result<f64> {
    let (dof, e) = linear_exponent(t1, t2, alpha, d)?;
    let r = t2 + (t2 + 1.0) * e.exp_m1();
    if r <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-dof * (t2 + 1.0) * e.exp_m1() / r)
}

fn linear_exponent(t1: u64, t2: f64, alpha: f64, d: usize) -> Result<(f64, f64)> {
    if t1 <= d as u64 {
        return Err(Error::NotReady(format!(
            "need more than {d} samples, have {t1}"
        )));
    }
    if !(t2 > 0.0) {
        return Err(Error::Precondition(format!(
            "information must be positive, got {t2}"
        )));
    }
    let dof = (t1 - d as u64) as f64;
    Ok((dof, (2.0 * alpha.ln() - t2.ln_1p()) / (dof + 1.0)))
}

/// `2 ln(1/alpha) + ln(t + 1)`, the large-sample behaviour of both boundary functions.
pub fn asymptotic_reference(t: f64, alpha: f64) -> f64 {
    -2.0 * alpha.ln() + t.ln_1p()
}

/// Per-context error budgets for one precision criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub criterion: Criterion,
    pub alpha: f64,
    /// Indexed by context; `None` for contexts with a single feasible action.
    per_context: Vec<Option<f64>>,
}

impl ErrorBudget {
    pub fn get(&self, x: ContextId) -> Option<f64> {
        self.per_context.get(x.0).copied().flatten()
    }

    /// `(context, budget)` for every context that needs comparisons.
    pub fn per_context(&self) -> impl Iterator<Item = (ContextId, f64)> + '_ {
        self.per_context
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|b| (ContextId(i), b)))
    }

    pub fn is_empty(&self) -> bool {
        self.per_context.iter().all(Option::is_none)
    }
}

/// Splits `alpha` across contexts and pairwise comparisons.
pub fn make_budget(space: &ContextSpace, criterion: Criterion, alpha: f64) -> Result<ErrorBudget> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let m = space.num_contexts() as f64;
    let mut per_context = Vec::with_capacity(space.num_contexts());
    for x in space.context_ids() {
        let k = space.feasible(x).len();
        if k < 2 {
            per_context.push(None);
            continue;
        }
        let share = (k - 1) as f64 * m;
        let b = match criterion {
            Criterion::P1 => alpha / (share * space.prob(x)),
            Criterion::P2 => alpha / share,
        };
        if !(b < 1.0) {
            return Err(Error::Config(format!(
                "budget for context {:?} is {b}, which voids the guarantee",
                space.context(x).label
            )));
        }
        per_context.push(Some(b));
    }
    Ok(ErrorBudget {
        criterion,
        alpha,
        per_context,
    })
}

/// Boundary for comparing two sample means with `n_a` and `n_b` observations.
pub fn boundary_unstructured(n_a: u64, n_b: u64, budget: f64) -> Result<BoundaryValue> {
    if n_a == 0 || n_b == 0 {
        return Err(Error::NotReady(
            "boundary needs at least one sample per action".into(),
        ));
    }
    let alpha_a = budget / ((n_b as f64) + 1.0).sqrt();
    let alpha_b = budget / ((n_a as f64) + 1.0).sqrt();
    check_level(alpha_a.max(alpha_b))?;
    Ok(BoundaryValue::new(0.5 * gamma(n_a, alpha_a))
        .max(BoundaryValue::new(0.5 * gamma(n_b, alpha_b))))
}

/// Boundary for comparing two least-squares predictions in one direction;
/// `sig_inv_*` is the inverse directional variance `1 / (f^T D^{-1} f)`.
pub fn boundary_linear(
    n_a: u64,
    sig_inv_a: f64,
    n_b: u64,
    sig_inv_b: f64,
    budget: f64,
    d: usize,
) -> Result<BoundaryValue> {
    let alpha_a = budget / (sig_inv_b + 1.0).sqrt();
    let alpha_b = budget / (sig_inv_a + 1.0).sqrt();
    check_level(alpha_a.max(alpha_b))?;
    let ga = gamma_l(n_a, sig_inv_a, alpha_a, d)?;
    let gb = gamma_l(n_b, sig_inv_b, alpha_b, d)?;
    Ok(BoundaryValue::new(0.5 * ga).max(BoundaryValue::new(0.5 * gb)))
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "boundary level {level} outside (0,1)"
        )))
    }
}
