//! Backward-induction evaluation of policies and consideration optima.

use thiserror::Error;

use crate::model::{ActionId, Mmmdp, StateId, StateTime};
use crate::policy::{Policy, PolicyError};
use crate::scalar::Scalar;
use crate::worth::{Aggregator, Worth, WorthError, WorthVector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no transitions for state {state} under action {action}")]
    NoTransitions { state: String, action: String },
    #[error("state {0} has no applicable action")]
    NoActions(String),
    #[error("next-row has {found} entries, model has {expected} states")]
    RowLength { found: usize, expected: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Worth(#[from] WorthError),
}

/// `(H+1) × |S|` worth entries for one consideration. Row `H` is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct WorthMatrix<T> {
    rows: Vec<Vec<Worth<T>>>,
}

impl<T: Scalar> WorthMatrix<T> {
    pub fn identity(horizon: usize, states: usize, identity: Worth<T>) -> Self {
        WorthMatrix { rows: vec![vec![identity; states]; horizon + 1] }
    }

    pub fn row(&self, t: usize) -> &[Worth<T>] {
        &self.rows[t]
    }

    pub fn at(&self, t: usize, s: StateId) -> &Worth<T> {
        &self.rows[t][s.0]
    }

    pub fn set(&mut self, t: usize, s: StateId, w: Worth<T>) {
        self.rows[t][s.0] = w;
    }

    pub fn horizon(&self) -> usize {
        self.rows.len() - 1
    }
}

/// One [`WorthMatrix`] per consideration.
#[derive(Debug, Clone, PartialEq)]
pub struct NonStationaryWorth<T> {
    pub matrices: Vec<WorthMatrix<T>>,
}

impl<T: Scalar> NonStationaryWorth<T> {
    pub fn at(&self, c: usize, t: usize, s: StateId) -> &Worth<T> {
        self.matrices[c].at(t, s)
    }

    pub fn vector(&self, t: usize, s: StateId) -> WorthVector<T> {
        WorthVector(self.matrices.iter().map(|m| m.at(t, s).clone()).collect())
    }
}

fn no_transitions<T: Scalar>(model: &Mmmdp<T>, s: StateId, a: ActionId) -> EvalError {
    EvalError::NoTransitions { state: model.state_name(s).to_owned(), action: model.action_name(a).to_owned() }
}

/// `𝒬(s, a)` for consideration `c` against the worth row at `t + 1`.
pub fn q_state_action<T: Scalar>(
    model: &Mmmdp<T>,
    c: usize,
    next_row: &[Worth<T>],
    s: StateId,
    a: ActionId,
) -> Result<Worth<T>, EvalError> {
    if next_row.len() != model.num_states() {
        return Err(EvalError::RowLength { found: next_row.len(), expected: model.num_states() });
    }
    let outcomes = model.outcomes(s, a);
    if outcomes.is_empty() {
        return Err(no_transitions(model, s, a));
    }
    let con = model.consideration(c);
    let mut acc = Aggregator::new(con.kind);
    for (to, p) in outcomes {
        acc.push(p, con.judgement(s, a, *to), &next_row[to.0])?;
    }
    Ok(acc.finish())
}

/// `𝒬(s, a, S', P')`: aggregation over caller-chosen successors and probabilities.
pub fn q_with_outcome<T: Scalar>(
    model: &Mmmdp<T>,
    c: usize,
    next_row: &[Worth<T>],
    s: StateId,
    a: ActionId,
    successors: &[StateId],
    probs: &[T],
) -> Result<Worth<T>, EvalError> {
    if next_row.len() != model.num_states() {
        return Err(EvalError::RowLength { found: next_row.len(), expected: model.num_states() });
    }
    if !model.is_applicable(s, a) {
        return Err(no_transitions(model, s, a));
    }
    if successors.len() != probs.len() {
        return Err(WorthError::LengthMismatch {
            baseline: successors.len(),
            successors: successors.len(),
            probs: probs.len(),
        }
        .into());
    }
    let con = model.consideration(c);
    let mut acc = Aggregator::new(con.kind);
    for (to, p) in successors.iter().zip(probs) {
        acc.push(p, con.judgement(s, a, *to), &next_row[to.0])?;
    }
    Ok(acc.finish())
}

/// `W^π` for every consideration. State-times the policy leaves undefined
/// keep the identity.
pub fn policy_worth<T: Scalar>(model: &Mmmdp<T>, policy: &Policy) -> Result<NonStationaryWorth<T>, EvalError> {
    policy_worth_from(model, policy, (model.initial(), 0))
}

/// [`policy_worth`] for a policy that need only be defined from `start` on.
pub fn policy_worth_from<T: Scalar>(
    model: &Mmmdp<T>,
    policy: &Policy,
    start: StateTime,
) -> Result<NonStationaryWorth<T>, EvalError> {
    policy.reachable_from(model, start)?;
    let h = model.horizon();
    let mut matrices = Vec::with_capacity(model.considerations().len());
    for (c, con) in model.considerations().iter().enumerate() {
        let mut m = WorthMatrix::identity(h, model.num_states(), con.identity());
        for t in (0..h).rev() {
            for s in model.state_ids() {
                let Some(a) = policy.get(s, t) else { continue };
                if !model.is_applicable(s, a) {
                    continue;
                }
                let w = q_state_action(model, c, m.row(t + 1), s, a)?;
                m.set(t, s, w);
            }
        }
        matrices.push(m);
    }
    Ok(NonStationaryWorth { matrices })
}

/// Root worth vector `W^π[0](s0)`.
pub fn root_vector<T: Scalar>(model: &Mmmdp<T>, policy: &Policy) -> Result<WorthVector<T>, EvalError> {
    Ok(policy_worth(model, policy)?.vector(0, model.initial()))
}

/// `W*` for one consideration. Ties go to the lowest action index.
pub fn consideration_optimal<T: Scalar>(model: &Mmmdp<T>, c: usize) -> Result<WorthMatrix<T>, EvalError> {
    Ok(consideration_optimal_with_actions(model, c)?.0)
}

/// [`consideration_optimal`] together with the maximising action at each `(s, t)`.
pub fn consideration_optimal_with_actions<T: Scalar>(
    model: &Mmmdp<T>,
    c: usize,
) -> Result<(WorthMatrix<T>, Policy), EvalError> {
    let con = model.consideration(c);
    let h = model.horizon();
    let mut m = WorthMatrix::identity(h, model.num_states(), con.identity());
    let mut best_actions = Policy::new();
    for t in (0..h).rev() {
        for s in model.state_ids() {
            let mut best: Option<(ActionId, Worth<T>)> = None;
            for a in model.applicable_actions(s) {
                let q = q_state_action(model, c, m.row(t + 1), s, a)?;
                let better = match &best {
                    None => true,
                    Some((_, w)) => con.prefers(&q, w)?,
                };
                if better {
                    best = Some((a, q));
                }
            }
            let (a, w) = best.ok_or_else(|| EvalError::NoActions(model.state_name(s).to_owned()))?;
            m.set(t, s, w);
            best_actions.set(s, t, a);
        }
    }
    Ok((m, best_actions))
}

/// Probability of occupying a goal state at time `H`. Zero for models without goals.
pub fn goal_probability<T: Scalar>(model: &Mmmdp<T>, policy: &Policy) -> Result<T, EvalError> {
    goal_probability_from(model, policy, (model.initial(), 0))
}

pub fn goal_probability_from<T: Scalar>(model: &Mmmdp<T>, policy: &Policy, start: StateTime) -> Result<T, EvalError> {
    policy.reachable_from(model, start)?;
    let mut dist = vec![T::zero(); model.num_states()];
    dist[start.0 .0] = T::one();
    for t in start.1..model.horizon() {
        let mut next = vec![T::zero(); model.num_states()];
        for s in model.state_ids() {
            if dist[s.0].is_zero() {
                continue;
            }
            let a = policy.get(s, t).expect("reachable node has an action");
            for (to, p) in model.outcomes(s, a) {
                next[to.0] = next[to.0].clone() + dist[s.0].clone() * p.clone();
            }
        }
        dist = next;
    }
    Ok(model.state_ids().filter(|&s| model.is_goal(s)).fold(T::zero(), |acc, s| acc + dist[s.0].clone()))
}

/// Expected cost at the root, when the model has a budgeted cost consideration.
pub fn expected_cost<T: Scalar>(model: &Mmmdp<T>, policy: &Policy) -> Result<Option<T>, EvalError> {
    let Some(ssp) = model.ssp() else { return Ok(None) };
    let w = policy_worth(model, policy)?;
    Ok(w.at(ssp.cost_consideration, 0, model.initial()).as_real().cloned())
}
