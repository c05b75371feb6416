//! Deterministic non-stationary policies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{ActionId, Mmmdp, StateId, StateTime};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("policy has no action for state {state} at time {time}")]
    Undefined { state: String, time: usize },
    #[error("action {action} is not applicable in state {state}")]
    Inapplicable { state: String, action: String },
}

/// A `(state, time) → action` table.
///
/// Two policies are the same plan when they agree on the state-times they
/// reach; [`Policy::canonical`] strips everything else.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Policy {
    actions: BTreeMap<StateTime, ActionId>,
}

impl Policy {
    pub fn new() -> Self {
        Policy::default()
    }

    pub fn from_map(actions: BTreeMap<StateTime, ActionId>) -> Self {
        Policy { actions }
    }

    pub fn set(&mut self, s: StateId, t: usize, a: ActionId) {
        self.actions.insert((s, t), a);
    }

    pub fn unset(&mut self, s: StateId, t: usize) -> Option<ActionId> {
        self.actions.remove(&(s, t))
    }

    pub fn get(&self, s: StateId, t: usize) -> Option<ActionId> {
        self.actions.get(&(s, t)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateTime, ActionId)> + '_ {
        self.actions.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Decision nodes (`t < H`) reached from `(s0, 0)` along positive-probability
    /// transitions.
    pub fn reachable<T: Scalar>(&self, model: &Mmmdp<T>) -> Result<BTreeSet<StateTime>, PolicyError> {
        self.reachable_from(model, (model.initial(), 0))
    }

    /// As [`Policy::reachable`], starting from an arbitrary state-time.
    pub fn reachable_from<T: Scalar>(
        &self,
        model: &Mmmdp<T>,
        start: StateTime,
    ) -> Result<BTreeSet<StateTime>, PolicyError> {
        let h = model.horizon();
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some((s, t)) = stack.pop() {
            if t >= h || !seen.insert((s, t)) {
                continue;
            }
            let a = self
                .get(s, t)
                .ok_or_else(|| PolicyError::Undefined { state: model.state_name(s).to_owned(), time: t })?;
            let outcomes = model.outcomes(s, a);
            if outcomes.is_empty() {
                return Err(PolicyError::Inapplicable {
                    state: model.state_name(s).to_owned(),
                    action: model.action_name(a).to_owned(),
                });
            }
            for (to, p) in outcomes {
                if !p.is_zero() {
                    stack.push((*to, t + 1));
                }
            }
        }
        Ok(seen)
    }

    /// The policy restricted to its own reachable state-times.
    pub fn canonical<T: Scalar>(&self, model: &Mmmdp<T>) -> Result<Policy, PolicyError> {
        self.canonical_from(model, (model.initial(), 0))
    }

    pub fn canonical_from<T: Scalar>(&self, model: &Mmmdp<T>, start: StateTime) -> Result<Policy, PolicyError> {
        let reach = self.reachable_from(model, start)?;
        Ok(Policy { actions: self.actions.iter().filter(|(k, _)| reach.contains(k)).map(|(&k, &v)| (k, v)).collect() })
    }

    /// One `state@t: action` line per entry.
    pub fn describe<T: Scalar>(&self, model: &Mmmdp<T>) -> String {
        let mut out = String::new();
        for ((s, t), a) in self.iter() {
            let _ = writeln!(out, "{}@{}: {}", model.state_name(s), t, model.action_name(a));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::insulin;

    #[test]
    fn canonical_drops_unreachable_entries() {
        let model = insulin::lost_insulin::<f64>(insulin::SmallConfig::default());
        let wait = model.action_id("wait").unwrap();
        let mut p = Policy::new();
        for s in model.state_ids() {
            for t in 0..model.horizon() {
                p.set(s, t, wait);
            }
        }
        let c = p.canonical(&model).unwrap();
        // (s0,0), (s0,1), (s1,1)
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn undefined_reachable_node_is_an_error() {
        let model = insulin::lost_insulin::<f64>(insulin::SmallConfig::default());
        let wait = model.action_id("wait").unwrap();
        let mut p = Policy::new();
        p.set(model.initial(), 0, wait);
        assert!(matches!(p.reachable(&model), Err(PolicyError::Undefined { time: 1, .. })));
    }
}
