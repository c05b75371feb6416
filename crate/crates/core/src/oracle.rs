//! Brute-force references for small instances.
//!
//! Nothing here touches the solver. Policies are enumerated by reachable
//! behaviour and evaluated with plain backward induction.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use thiserror::Error;

use crate::eval::{goal_probability, goal_probability_from, policy_worth, policy_worth_from, EvalError};
use crate::model::{Mmmdp, StateTime};
use crate::policy::Policy;
use crate::retrospection::{select, MehrResult, RetroConfig, RetroError};
use crate::scalar::Scalar;
use crate::worth::{pprune, ConsiderationKind, WorthError, WorthVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBound {
    pub max_policy_count: usize,
}

impl Default for EnumerationBound {
    fn default() -> Self {
        EnumerationBound { max_policy_count: 50_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("more than {0} policies to enumerate")]
    BoundExceeded(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Worth(#[from] WorthError),
    #[error(transparent)]
    Retro(#[from] RetroError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// Distinct by reachable behaviour, in discovery order.
    pub policies: Vec<Policy>,
    /// `|A|^(|S|·H)`: full tables before deduplication.
    pub full_table_count: BigUint,
}

/// Every deterministic non-stationary policy, one per reachable behaviour.
pub fn enumerate_policies<T: Scalar>(model: &Mmmdp<T>, bound: EnumerationBound) -> Result<Enumeration, OracleError> {
    let policies = enumerate_from(model, (model.initial(), 0), bound)?;
    let cells = (model.num_states() * model.horizon()) as u32;
    let full_table_count = BigUint::from(model.num_actions()).pow(cells);
    Ok(Enumeration { policies, full_table_count })
}

/// Sub-policies defined exactly on what they reach from `start`.
fn enumerate_from<T: Scalar>(
    model: &Mmmdp<T>,
    start: StateTime,
    bound: EnumerationBound,
) -> Result<Vec<Policy>, OracleError> {
    let mut out = Vec::new();
    let mut policy = Policy::new();
    let pending = BTreeSet::from([start]);
    enumerate_rec(model, &mut policy, pending, &mut out, bound.max_policy_count)?;
    Ok(out)
}

fn enumerate_rec<T: Scalar>(
    model: &Mmmdp<T>,
    policy: &mut Policy,
    mut pending: BTreeSet<StateTime>,
    out: &mut Vec<Policy>,
    cap: usize,
) -> Result<(), OracleError> {
    let Some((s, t)) = pending.pop_first() else {
        if out.len() == cap {
            return Err(OracleError::BoundExceeded(cap));
        }
        out.push(policy.clone());
        return Ok(());
    };
    for a in model.applicable_actions(s) {
        policy.set(s, t, a);
        let mut next = pending.clone();
        if t + 1 < model.horizon() {
            for (to, p) in model.outcomes(s, a) {
                if !p.is_zero() && policy.get(*to, t + 1).is_none() {
                    next.insert((*to, t + 1));
                }
            }
        }
        enumerate_rec(model, policy, next, out, cap)?;
        policy.unset(s, t);
    }
    Ok(())
}

/// In the proper, within-budget set (always true without goals).
fn in_budget<T: Scalar>(model: &Mmmdp<T>, policy: &Policy, root: &WorthVector<T>) -> Result<bool, OracleError> {
    let Some(ssp) = model.ssp() else { return Ok(true) };
    let cost_ok = root.get(ssp.cost_consideration).as_real().is_some_and(|c| *c <= ssp.budget);
    Ok(cost_ok && goal_probability(model, policy)? > T::zero())
}

/// `pprune` over the root vectors of all (in-budget, proper) policies.
pub fn oracle_pareto_front<T: Scalar>(
    model: &Mmmdp<T>,
    bound: EnumerationBound,
) -> Result<Vec<WorthVector<T>>, OracleError> {
    let all = enumerate_policies(model, bound)?;
    let mut roots = Vec::new();
    for p in &all.policies {
        let root = policy_worth(model, p)?.vector(0, model.initial());
        if in_budget(model, p, &root)? {
            roots.push(root);
        }
    }
    Ok(pprune(&roots, model.kinds())?)
}

/// Worth vector plus, for budgeted models, whether a goal is reached.
#[derive(Debug, Clone, PartialEq)]
struct Extended<T> {
    vector: WorthVector<T>,
    reach: Option<bool>,
}

fn ext_dominates<T: Scalar>(a: &Extended<T>, b: &Extended<T>, kinds: &[ConsiderationKind]) -> Result<bool, WorthError> {
    let mut strict = false;
    for ((x, y), k) in a.vector.iter().zip(b.vector.iter()).zip(kinds) {
        match k.compare(x, y)? {
            std::cmp::Ordering::Less => return Ok(false),
            std::cmp::Ordering::Greater => strict = true,
            std::cmp::Ordering::Equal => {}
        }
    }
    match (a.reach, b.reach) {
        (Some(false), Some(true)) => Ok(false),
        (Some(true), Some(false)) => Ok(true),
        _ => Ok(strict),
    }
}

/// `x` can be reached from the root without passing through `n`, under some policy.
struct Sharing {
    reachable_avoiding: HashMap<StateTime, BTreeSet<StateTime>>,
}

impl Sharing {
    fn new<T: Scalar>(model: &Mmmdp<T>) -> Self {
        let root = (model.initial(), 0);
        let mut all = BTreeSet::new();
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            if n.1 > model.horizon() || !all.insert(n) {
                continue;
            }
            if n.1 < model.horizon() {
                for a in model.applicable_actions(n.0) {
                    for (to, p) in model.outcomes(n.0, a) {
                        if !p.is_zero() {
                            stack.push((*to, n.1 + 1));
                        }
                    }
                }
            }
        }
        let mut reachable_avoiding = HashMap::new();
        for &n in &all {
            let mut seen = BTreeSet::new();
            let mut stack = if n == root { vec![] } else { vec![root] };
            while let Some(x) = stack.pop() {
                if x == n || x.1 >= model.horizon() || !seen.insert(x) {
                    continue;
                }
                for a in model.applicable_actions(x.0) {
                    for (to, p) in model.outcomes(x.0, a) {
                        if !p.is_zero() {
                            stack.push((*to, x.1 + 1));
                        }
                    }
                }
            }
            reachable_avoiding.insert(n, seen);
        }
        Sharing { reachable_avoiding }
    }

    /// The part of a sub-policy at `n` that other branches of a full policy can see.
    fn shared_part(&self, n: StateTime, sub: &Policy) -> BTreeMap<StateTime, crate::model::ActionId> {
        let outside = &self.reachable_avoiding[&n];
        sub.iter().filter(|(k, _)| outside.contains(k)).collect()
    }
}

type Groups<T> = HashMap<BTreeMap<StateTime, crate::model::ActionId>, Vec<Extended<T>>>;

/// Undominated policies whose every reachable sub-policy is undominated
/// among the alternatives that agree with it wherever other branches could
/// observe the difference.
///
/// For budgeted models the root test is restricted to proper, within-budget
/// policies and uses only the visible considerations. The root vectors of
/// the result are exactly [`oracle_pareto_front`].
pub fn oracle_undominated_policies<T: Scalar>(
    model: &Mmmdp<T>,
    bound: EnumerationBound,
) -> Result<Vec<Policy>, OracleError> {
    let kinds = model.kinds();
    let ssp = model.ssp().is_some();
    let root = (model.initial(), 0);
    let all = enumerate_policies(model, bound)?.policies;
    let sharing = Sharing::new(model);
    let mut groups: HashMap<StateTime, Groups<T>> = HashMap::new();

    let mut evaluated = Vec::with_capacity(all.len());
    for p in &all {
        let w = policy_worth(model, p)?;
        let rv = w.vector(0, model.initial());
        let ok = in_budget(model, p, &rv)?;
        evaluated.push((w, rv, ok));
    }
    let candidates: Vec<&WorthVector<T>> = evaluated.iter().filter(|e| e.2).map(|e| &e.1).collect();

    let mut out = Vec::new();
    'policy: for (p, (w, rv, ok)) in all.iter().zip(&evaluated) {
        if !ok {
            continue;
        }
        for other in &candidates {
            if crate::worth::pareto_dominates(other, rv, kinds)? {
                continue 'policy;
            }
        }
        for n in p.reachable(model).map_err(EvalError::from)? {
            if n == root {
                continue;
            }
            let sub = p.canonical_from(model, n).map_err(EvalError::from)?;
            let mine = Extended {
                vector: w.vector(n.1, n.0),
                reach: if ssp { Some(goal_probability_from(model, p, n)? > T::zero()) } else { None },
            };
            if let std::collections::hash_map::Entry::Vacant(e) = groups.entry(n) {
                e.insert(subpolicy_groups(model, n, &sharing, bound)?);
            }
            let peers = &groups[&n][&sharing.shared_part(n, &sub)];
            for peer in peers {
                if ext_dominates(peer, &mine, kinds)? {
                    continue 'policy;
                }
            }
        }
        out.push(p.clone());
    }
    out.sort();
    Ok(out)
}

fn subpolicy_groups<T: Scalar>(
    model: &Mmmdp<T>,
    n: StateTime,
    sharing: &Sharing,
    bound: EnumerationBound,
) -> Result<Groups<T>, OracleError> {
    let mut groups: Groups<T> = HashMap::new();
    for sub in enumerate_from(model, n, bound)? {
        let w = policy_worth_from(model, &sub, n)?;
        let reach = if model.ssp().is_some() { Some(goal_probability_from(model, &sub, n)? > T::zero()) } else { None };
        groups.entry(sharing.shared_part(n, &sub)).or_default().push(Extended { vector: w.vector(n.1, n.0), reach });
    }
    Ok(groups)
}

/// [`select`] over [`oracle_undominated_policies`].
pub fn oracle_select<T: Scalar>(
    model: &Mmmdp<T>,
    bound: EnumerationBound,
    config: RetroConfig,
) -> Result<Option<MehrResult<T>>, OracleError> {
    let policies = oracle_undominated_policies(model, bound)?;
    if policies.is_empty() {
        return Ok(None);
    }
    Ok(Some(select(model, &policies, config)?))
}
