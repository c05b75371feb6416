//! Estimates of consideration-optimal worth used to seed unexpanded nodes.

use std::collections::BTreeMap;

use crate::model::{Mmmdp, StateId};
use crate::scalar::Scalar;
use crate::worth::Worth;

/// Estimates for one consideration. Lookups try `(state, time)`, then
/// `state` for all times, then the default.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsiderationHeuristic<T> {
    pub default: Worth<T>,
    pub timed: BTreeMap<(StateId, usize), Worth<T>>,
    pub untimed: BTreeMap<StateId, Worth<T>>,
}

impl<T: Scalar> ConsiderationHeuristic<T> {
    pub fn constant(default: Worth<T>) -> Self {
        ConsiderationHeuristic { default, timed: BTreeMap::new(), untimed: BTreeMap::new() }
    }

    pub fn estimate(&self, s: StateId, t: usize) -> &Worth<T> {
        self.timed.get(&(s, t)).or_else(|| self.untimed.get(&s)).unwrap_or(&self.default)
    }
}

/// `η`: one estimate table per consideration, in consideration order.
///
/// The solver stays Pareto-complete only if every estimate is weakly
/// preferred to the true optimum under that consideration's order.
#[derive(Debug, Clone, PartialEq)]
pub struct Heuristic<T> {
    pub per_consideration: Vec<ConsiderationHeuristic<T>>,
}

impl<T: Scalar> Heuristic<T> {
    pub fn estimate(&self, c: usize, s: StateId, t: usize) -> &Worth<T> {
        self.per_consideration[c].estimate(s, t)
    }

    pub fn len(&self) -> usize {
        self.per_consideration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_consideration.is_empty()
    }
}

/// Identity worth everywhere: `0` for real kinds, `⊥` for absolute ones.
pub fn default_heuristic<T: Scalar>(model: &Mmmdp<T>) -> Heuristic<T> {
    Heuristic {
        per_consideration: model
            .considerations()
            .iter()
            .map(|c| ConsiderationHeuristic::constant(c.identity()))
            .collect(),
    }
}
