//! Finite context/action spaces shared by every setting.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a context inside a [`ContextSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContextId(pub usize);

/// Index of an action inside a [`ContextSpace`]. Lower ids win argmax ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl fmt::Display for ContextId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub label: String,
    pub features: Vec<f64>,
    pub prob: f64,
    /// Feasible actions, sorted ascending and deduplicated.
    pub feasible: Vec<ActionId>,
}

/// Contexts with features `f(x)`, probabilities `p(x)` and feasible sets `A(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSpace {
    contexts: Vec<Context>,
    actions: Vec<String>,
    dimension: usize,
}

const PROB_TOLERANCE: f64 = 1e-12;

impl ContextSpace {
    pub fn new(contexts: Vec<Context>, actions: Vec<String>, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if contexts.is_empty() || actions.is_empty() {
            return Err(Error::Config(
                "need at least one context and one action".into(),
            ));
        }
        let mut labels = HashSet::new();
        for a in &actions {
            if !labels.insert(a.as_str()) {
                return Err(Error::Config(format!("duplicate action id {a:?}")));
            }
        }
        let mut labels = HashSet::new();
        let mut total = 0.0;
        let mut contexts = contexts;
        for c in contexts.iter_mut() {
            if !labels.insert(c.label.clone()) {
                return Err(Error::Config(format!("duplicate context id {:?}", c.label)));
            }
            if c.features.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: c.features.len(),
                });
            }
            if !(c.prob > 0.0) || !c.prob.is_finite() {
                return Err(Error::Config(format!(
                    "context {:?} has p(x) = {}",
                    c.label, c.prob
                )));
            }
            c.feasible.sort();
            c.feasible.dedup();
            if c.feasible.is_empty() {
                return Err(Error::Config(format!(
                    "context {:?} has no feasible action",
                    c.label
                )));
            }
            if let Some(bad) = c.feasible.iter().find(|a| a.0 >= actions.len()) {
                return Err(Error::Config(format!(
                    "context {:?} references unknown action {}",
                    c.label, bad
                )));
            }
            total += c.prob;
        }
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::Config(format!(
                "context probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            contexts,
            actions,
            dimension,
        })
    }

    /// Builds a space where every action is feasible in every context, after
    /// renormalizing `weights` to sum to one.
    pub fn full(
        features: Vec<Vec<f64>>,
        weights: &[f64],
        action_labels: Vec<String>,
        dimension: usize,
    ) -> Result<Self> {
        if features.len() != weights.len() {
            return Err(Error::Config("one weight per context required".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config("weights must have positive sum".into()));
        }
        let all: Vec<ActionId> = (0..action_labels.len()).map(ActionId).collect();
        let contexts = features
            .into_iter()
            .zip(weights)
            .enumerate()
            .map(|(j, (f, w))| Context {
                label: format!("x{}", j + 1),
                features: f,
                prob: w / total,
                feasible: all.clone(),
            })
            .collect();
        let mut space = Self {
            contexts,
            actions: action_labels,
            dimension,
        };
        space.fix_probability_sum();
        Self::new(space.contexts, space.actions, space.dimension)
    }

    /// Absorbs floating-point residue of a normalization into the largest weight.
    fn fix_probability_sum(&mut self) {
        let total: f64 = self.contexts.iter().map(|c| c.prob).sum();
        if let Some(c) = self
            .contexts
            .iter_mut()
            .max_by(|a, b| a.prob.total_cmp(&b.prob))
        {
            c.prob += 1.0 - total;
        }
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    pub fn context(&self, x: ContextId) -> &Context {
        &self.contexts[x.0]
    }

    pub fn context_ids(&self) -> impl Iterator<Item = ContextId> + '_ {
        (0..self.contexts.len()).map(ContextId)
    }

    pub fn feasible(&self, x: ContextId) -> &[ActionId] {
        &self.contexts[x.0].feasible
    }

    pub fn is_feasible(&self, x: ContextId, a: ActionId) -> bool {
        x.0 < self.contexts.len() && self.contexts[x.0].feasible.binary_search(&a).is_ok()
    }

    /// Position of `a` inside `A(x)`, if feasible.
    pub fn position(&self, x: ContextId, a: ActionId) -> Option<usize> {
        self.contexts.get(x.0)?.feasible.binary_search(&a).ok()
    }

    pub fn prob(&self, x: ContextId) -> f64 {
        self.contexts[x.0].prob
    }

    pub fn features(&self, x: ContextId) -> &[f64] {
        &self.contexts[x.0].features
    }

    pub fn action_labels(&self) -> &[String] {
        &self.actions
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Actions feasible in at least one context.
    pub fn used_actions(&self) -> Vec<ActionId> {
        let mut used = vec![false; self.actions.len()];
        for c in &self.contexts {
            for a in &c.feasible {
                used[a.0] = true;
            }
        }
        (0..self.actions.len())
            .filter(|&i| used[i])
            .map(ActionId)
            .collect()
    }

    /// Feasible (context, action) pairs in lexicographic order.
    pub fn pairs(&self) -> Vec<(ContextId, ActionId)> {
        self.context_ids()
            .flat_map(|x| self.feasible(x).iter().map(move |&a| (x, a)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(label: &str, p: f64, feasible: &[usize]) -> Context {
        Context {
            label: label.into(),
            features: vec![1.0],
            prob: p,
            feasible: feasible.iter().copied().map(ActionId).collect(),
        }
    }

    #[test]
    fn rejects_bad_probabilities() {
        let r = ContextSpace::new(
            vec![ctx("a", 0.5, &[0]), ctx("b", 0.4, &[0])],
            vec!["u".into()],
            1,
        );
        assert!(matches!(r, Err(Error::Config(_))));
        let r = ContextSpace::new(
            vec![ctx("a", 1.0, &[0]), ctx("b", 0.0, &[0])],
            vec!["u".into()],
            1,
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_duplicates_and_empty_sets() {
        let r = ContextSpace::new(
            vec![ctx("a", 0.5, &[0]), ctx("a", 0.5, &[0])],
            vec!["u".into()],
            1,
        );
        assert!(r.is_err());
        let r = ContextSpace::new(vec![ctx("a", 1.0, &[])], vec!["u".into()], 1);
        assert!(r.is_err());
        let r = ContextSpace::new(vec![ctx("a", 1.0, &[0])], vec!["u".into(), "u".into()], 1);
        assert!(r.is_err());
    }

    #[test]
    fn rejects_wrong_feature_length() {
        let mut c = ctx("a", 1.0, &[0]);
        c.features = vec![1.0, 2.0];
        let r = ContextSpace::new(vec![c], vec!["u".into()], 1);
        assert!(matches!(
            r,
            Err(Error::DimensionMismatch {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn full_space_normalizes_exactly() {
        let w = [0.262, 0.260, 0.162, 0.198, 0.092, 0.025];
        let feats = (0..6).map(|i| vec![1.0, i as f64 * 0.2]).collect();
        let s = ContextSpace::full(feats, &w, vec!["a".into(), "b".into()], 2).unwrap();
        let total: f64 = s.contexts().iter().map(|c| c.prob).sum();
        assert!((total - 1.0).abs() <= 1e-12);
        assert_eq!(s.pairs().len(), 12);
    }

    #[test]
    fn feasible_sets_are_sorted() {
        let s = ContextSpace::new(
            vec![ctx("a", 1.0, &[2, 0, 2])],
            vec!["p".into(), "q".into(), "r".into()],
            1,
        )
        .unwrap();
        assert_eq!(s.feasible(ContextId(0)), &[ActionId(0), ActionId(2)]);
        assert_eq!(s.position(ContextId(0), ActionId(2)), Some(1));
        assert!(!s.is_feasible(ContextId(0), ActionId(1)));
    }
}
