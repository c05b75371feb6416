//! Multi-moral MDP and SSP problem definitions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::worth::{ConsiderationKind, Worth, WorthError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s#{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a#{}", self.0)
    }
}

/// A state at a decision epoch. Time `horizon` is terminal.
pub type StateTime = (StateId, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub from: StateId,
    pub action: ActionId,
    pub to: StateId,
    pub prob: T,
}

/// A source of morally relevant information: a judgement table plus the
/// algebra of its kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Consideration<T> {
    pub name: String,
    pub kind: ConsiderationKind,
    pub judgements: BTreeMap<(StateId, ActionId, StateId), Worth<T>>,
    pub default_judgement: Worth<T>,
    /// Tolerance of the consistency relation; unused by `Absolute`.
    pub epsilon: T,
}

impl<T: Scalar> Consideration<T> {
    pub const DEFAULT_EPSILON: &'static str = "0.000001";

    pub fn new(name: impl Into<String>, kind: ConsiderationKind) -> Self {
        Consideration {
            name: name.into(),
            kind,
            judgements: BTreeMap::new(),
            default_judgement: kind.identity(),
            epsilon: T::constant(Self::DEFAULT_EPSILON),
        }
    }

    pub fn judgement(&self, from: StateId, action: ActionId, to: StateId) -> &Worth<T> {
        self.judgements.get(&(from, action, to)).unwrap_or(&self.default_judgement)
    }

    pub fn identity(&self) -> Worth<T> {
        self.kind.identity()
    }

    pub fn prefers(&self, a: &Worth<T>, b: &Worth<T>) -> Result<bool, WorthError> {
        self.kind.prefers(a, b)
    }

    pub fn aggregate(
        &self,
        baseline: &[Worth<T>],
        judgements: &[Worth<T>],
        probs: &[T],
    ) -> Result<Worth<T>, WorthError> {
        self.kind.aggregate(baseline, judgements, probs)
    }

    /// Real kinds: `|w − w'| < ε`. Flags: equality.
    pub fn consistent(&self, w: &Worth<T>, other: &Worth<T>) -> Result<bool, WorthError> {
        self.kind.check_tag(w)?;
        self.kind.check_tag(other)?;
        Ok(match (w, other) {
            (Worth::Real(x), Worth::Real(y)) => (x.clone() - y.clone()).abs() < self.epsilon,
            (Worth::Flag(x), Worth::Flag(y)) => x == y,
            _ => unreachable!("tags checked above"),
        })
    }
}

/// A moral theory owning one consideration. Smaller rank means higher priority.
#[derive(Debug, Clone, PartialEq)]
pub struct Theory {
    pub name: String,
    pub consideration: usize,
    pub rank: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SspExtension<T> {
    pub goals: BTreeSet<StateId>,
    pub budget: T,
    pub cost_consideration: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("model has no states")]
    NoStates,
    #[error("model has no actions")]
    NoActions,
    #[error("initial state was not set")]
    NoInitial,
    #[error("{what} index {index} out of range")]
    OutOfRange { what: &'static str, index: usize },
}

/// A finite-horizon multi-moral decision problem, optionally with goals,
/// a cost consideration and a budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Mmmdp<T> {
    states: Vec<String>,
    actions: Vec<String>,
    transitions: Vec<Transition<T>>,
    initial: StateId,
    horizon: usize,
    considerations: Vec<Consideration<T>>,
    theories: Vec<Theory>,
    ssp: Option<SspExtension<T>>,
    // derived: outcomes[s * |A| + a] in transition order
    outcomes: Vec<Vec<(StateId, T)>>,
    kinds: Vec<ConsiderationKind>,
}

impl<T: Scalar> Mmmdp<T> {
    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.0]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a.0]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|n| n == name).map(StateId)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|n| n == name).map(ActionId)
    }

    pub fn transitions(&self) -> &[Transition<T>] {
        &self.transitions
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn considerations(&self) -> &[Consideration<T>] {
        &self.considerations
    }

    pub fn consideration(&self, i: usize) -> &Consideration<T> {
        &self.considerations[i]
    }

    pub fn kinds(&self) -> &[ConsiderationKind] {
        &self.kinds
    }

    pub fn theories(&self) -> &[Theory] {
        &self.theories
    }

    pub fn ssp(&self) -> Option<&SspExtension<T>> {
        self.ssp.as_ref()
    }

    pub fn is_goal(&self, s: StateId) -> bool {
        self.ssp.as_ref().is_some_and(|ssp| ssp.goals.contains(&s))
    }

    /// Successors of `(s, a)` with their probabilities, in file order.
    pub fn outcomes(&self, s: StateId, a: ActionId) -> &[(StateId, T)] {
        &self.outcomes[s.0 * self.actions.len() + a.0]
    }

    pub fn is_applicable(&self, s: StateId, a: ActionId) -> bool {
        !self.outcomes(s, a).is_empty()
    }

    /// Actions with at least one transition out of `s`, by index.
    pub fn applicable_actions(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        (0..self.actions.len()).map(ActionId).filter(move |&a| self.is_applicable(s, a))
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len()).map(StateId)
    }

    /// Replaces the theory list, keeping everything else. Useful for
    /// sweeping rank configurations over one set of dynamics.
    pub fn with_theories(&self, theories: Vec<Theory>) -> Result<Self, ModelError> {
        for t in &theories {
            if t.consideration >= self.considerations.len() {
                return Err(ModelError::OutOfRange { what: "consideration", index: t.consideration });
            }
        }
        let mut out = self.clone();
        out.theories = theories;
        Ok(out)
    }
}

/// Incremental construction of an [`Mmmdp`] by name.
#[derive(Debug, Clone)]
pub struct ModelBuilder<T> {
    states: Vec<String>,
    actions: Vec<String>,
    transitions: Vec<Transition<T>>,
    initial: Option<StateId>,
    horizon: usize,
    considerations: Vec<Consideration<T>>,
    theories: Vec<Theory>,
    ssp: Option<SspExtension<T>>,
}

impl<T: Scalar> Default for ModelBuilder<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ModelBuilder<T> {
    pub fn new() -> Self {
        ModelBuilder {
            states: Vec::new(),
            actions: Vec::new(),
            transitions: Vec::new(),
            initial: None,
            horizon: 1,
            considerations: Vec::new(),
            theories: Vec::new(),
            ssp: None,
        }
    }

    /// Returns the id of `name`, adding it if new.
    pub fn state(&mut self, name: &str) -> StateId {
        match self.states.iter().position(|n| n == name) {
            Some(i) => StateId(i),
            None => {
                self.states.push(name.to_owned());
                StateId(self.states.len() - 1)
            }
        }
    }

    pub fn action(&mut self, name: &str) -> ActionId {
        match self.actions.iter().position(|n| n == name) {
            Some(i) => ActionId(i),
            None => {
                self.actions.push(name.to_owned());
                ActionId(self.actions.len() - 1)
            }
        }
    }

    pub fn initial(&mut self, s: StateId) -> &mut Self {
        self.initial = Some(s);
        self
    }

    pub fn horizon(&mut self, h: usize) -> &mut Self {
        self.horizon = h;
        self
    }

    pub fn transition(&mut self, from: StateId, action: ActionId, to: StateId, prob: T) -> &mut Self {
        self.transitions.push(Transition { from, action, to, prob });
        self
    }

    pub fn consideration(&mut self, c: Consideration<T>) -> usize {
        self.considerations.push(c);
        self.considerations.len() - 1
    }

    pub fn judge(&mut self, c: usize, from: StateId, action: ActionId, to: StateId, w: Worth<T>) -> &mut Self {
        self.considerations[c].judgements.insert((from, action, to), w);
        self
    }

    pub fn theory(&mut self, name: &str, consideration: usize, rank: BigRational) -> &mut Self {
        self.theories.push(Theory { name: name.to_owned(), consideration, rank });
        self
    }

    pub fn ssp(&mut self, goals: BTreeSet<StateId>, budget: T, cost_consideration: usize) -> &mut Self {
        self.ssp = Some(SspExtension { goals, budget, cost_consideration });
        self
    }

    /// Checks index bounds only; semantic checks live in [`validate`].
    pub fn build(&self) -> Result<Mmmdp<T>, ModelError> {
        if self.states.is_empty() {
            return Err(ModelError::NoStates);
        }
        if self.actions.is_empty() {
            return Err(ModelError::NoActions);
        }
        let initial = self.initial.ok_or(ModelError::NoInitial)?;
        let ns = self.states.len();
        let na = self.actions.len();
        let check_state = |s: StateId| {
            if s.0 < ns {
                Ok(())
            } else {
                Err(ModelError::OutOfRange { what: "state", index: s.0 })
            }
        };
        check_state(initial)?;
        let mut outcomes = vec![Vec::new(); ns * na];
        for t in &self.transitions {
            check_state(t.from)?;
            check_state(t.to)?;
            if t.action.0 >= na {
                return Err(ModelError::OutOfRange { what: "action", index: t.action.0 });
            }
            outcomes[t.from.0 * na + t.action.0].push((t.to, t.prob.clone()));
        }
        for c in &self.considerations {
            for &(from, action, to) in c.judgements.keys() {
                check_state(from)?;
                check_state(to)?;
                if action.0 >= na {
                    return Err(ModelError::OutOfRange { what: "action", index: action.0 });
                }
            }
        }
        for t in &self.theories {
            if t.consideration >= self.considerations.len() {
                return Err(ModelError::OutOfRange { what: "consideration", index: t.consideration });
            }
        }
        if let Some(ssp) = &self.ssp {
            for &g in &ssp.goals {
                check_state(g)?;
            }
            if ssp.cost_consideration >= self.considerations.len() {
                return Err(ModelError::OutOfRange { what: "consideration", index: ssp.cost_consideration });
            }
        }
        Ok(Mmmdp {
            states: self.states.clone(),
            actions: self.actions.clone(),
            transitions: self.transitions.clone(),
            initial,
            horizon: self.horizon,
            considerations: self.considerations.clone(),
            theories: self.theories.clone(),
            ssp: self.ssp.clone(),
            outcomes,
            kinds: self.considerations.iter().map(|c| c.kind).collect(),
        })
    }
}

/// A well-formedness problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Probability mass per `(s, a)` must sum to one within this tolerance.
pub const PROBABILITY_TOLERANCE: &str = "0.000000001";

/// Lists every invariant the model breaks. Empty means valid.
pub fn validate<T: Scalar>(model: &Mmmdp<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: String, message: String| out.push(Violation { field, message });
    let tol = T::constant(PROBABILITY_TOLERANCE);

    if model.horizon == 0 {
        push("horizon".into(), "horizon must be at least 1".into());
    }

    let mut seen = BTreeSet::new();
    for (i, t) in model.transitions.iter().enumerate() {
        if !t.prob.is_finite_value() || t.prob < T::zero() || t.prob > T::one() {
            push(format!("transitions[{i}].prob"), "probability outside [0, 1]".into());
        }
        if !seen.insert((t.from, t.action, t.to)) {
            push(
                format!("transitions[{i}]"),
                format!(
                    "duplicate transition {} -{}-> {}",
                    model.state_name(t.from),
                    model.action_name(t.action),
                    model.state_name(t.to)
                ),
            );
        }
    }

    for s in model.state_ids() {
        let mut any = false;
        for a in model.applicable_actions(s) {
            any = true;
            let total = model.outcomes(s, a).iter().fold(T::zero(), |acc, (_, p)| acc + p.clone());
            if (total.clone() - T::one()).abs() > tol {
                push(
                    format!("transitions({}, {})", model.state_name(s), model.action_name(a)),
                    format!("probability mass sums to {} instead of 1", total.to_decimal()),
                );
            }
        }
        if !any {
            push("transitions".into(), format!("state {} has no outgoing transitions", model.state_name(s)));
        }
    }

    let mut cost_count = 0;
    for (ci, c) in model.considerations.iter().enumerate() {
        let field = format!("considerations[{ci}]");
        if c.kind == ConsiderationKind::Cost {
            cost_count += 1;
        }
        if let Err(e) = c.kind.check_tag(&c.default_judgement) {
            push(format!("{field}.default"), e.to_string());
        }
        if c.kind.is_real() && c.epsilon <= T::zero() {
            push(format!("{field}.epsilon"), "epsilon must be positive".into());
        }
        for (&(from, action, to), w) in &c.judgements {
            let jf = format!(
                "{field}.judgements({}, {}, {})",
                model.state_name(from),
                model.action_name(action),
                model.state_name(to)
            );
            if let Err(e) = c.kind.check_tag(w) {
                push(jf.clone(), e.to_string());
            }
            if !model.outcomes(from, action).iter().any(|(s, _)| *s == to) {
                push(jf, "judgement on a transition that does not exist".into());
            }
        }
    }
    if cost_count > 1 {
        push("considerations".into(), "at most one cost consideration is allowed".into());
    }

    for (ti, t) in model.theories.iter().enumerate() {
        if model.considerations[t.consideration].kind == ConsiderationKind::Cost {
            push(format!("theories[{ti}].consideration"), "a theory cannot own the cost consideration".into());
        }
    }

    if let Some(ssp) = &model.ssp {
        if ssp.budget <= T::zero() || !ssp.budget.is_finite_value() {
            push("budget".into(), "budget must be positive".into());
        }
        let cost = &model.considerations[ssp.cost_consideration];
        if cost.kind != ConsiderationKind::Cost {
            push("budget".into(), format!("consideration {} is not of cost kind", cost.name));
        }
        if ssp.goals.is_empty() {
            push("goals".into(), "a budgeted problem needs at least one goal".into());
        }
        for &g in &ssp.goals {
            for a in model.applicable_actions(g) {
                let leaks = model.outcomes(g, a).iter().any(|(to, p)| *to != g && !p.is_zero());
                if leaks {
                    push(
                        format!("goals.{}", model.state_name(g)),
                        format!("goal not absorbing under action {}", model.action_name(a)),
                    );
                }
            }
        }
        if cost.kind == ConsiderationKind::Cost {
            for t in &model.transitions {
                if ssp.goals.contains(&t.from) {
                    continue;
                }
                let positive = matches!(cost.judgement(t.from, t.action, t.to), Worth::Real(v) if *v > T::zero());
                if !positive {
                    push(
                        format!(
                            "{}.judgements({}, {}, {})",
                            cost.name,
                            model.state_name(t.from),
                            model.action_name(t.action),
                            model.state_name(t.to)
                        ),
                        "cost must be positive outside goal states".into(),
                    );
                }
            }
        }
    } else if cost_count > 0 {
        // a cost consideration without goals/budget is still a valid minimised objective
    }

    out
}
