//! Hypothetical retrospection over a set of candidate policies.
//!
//! Every positive-probability history of a policy supports one argument for
//! that policy. A theory attacks an argument when some other policy's history
//! ends better under it and that other policy was also better in
//! expectation; attacks are blocked by strictly higher-ranked theories that
//! prefer the target's policy.

use std::cmp::Ordering;
use std::fmt::Write as _;

use thiserror::Error;

use crate::eval::{expected_cost, policy_worth, EvalError};
use crate::model::{ActionId, Mmmdp, StateId};
use crate::policy::Policy;
use crate::scalar::Scalar;
use crate::worth::{Aggregator, Worth, WorthError, WorthVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetroConfig {
    /// Histories allowed per policy.
    pub max_histories: usize,
    /// Count at most one attacker per theory for each argument.
    pub per_theory_binary: bool,
}

impl RetroConfig {
    pub const DEFAULT_MAX_HISTORIES: usize = 100_000;
}

impl Default for RetroConfig {
    fn default() -> Self {
        RetroConfig { max_histories: Self::DEFAULT_MAX_HISTORIES, per_theory_binary: false }
    }
}

/// Non-acceptability values within this distance of the minimum count as minimal.
pub const SELECTION_TOLERANCE: &str = "0.000000001";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetroError {
    #[error("policy has more than {cap} histories")]
    TooManyHistories { cap: usize },
    #[error("no policies to select from")]
    NoPolicies,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Worth(#[from] WorthError),
}

impl RetroError {
    pub fn is_capacity(&self) -> bool {
        matches!(self, RetroError::TooManyHistories { .. })
    }
}

/// One trajectory of a policy from `(s0, 0)` to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct History<T> {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
    pub probability: T,
    /// Judgements folded along the trajectory with probability one.
    pub endpoint_worth: WorthVector<T>,
}

/// Depth-first over successors in file order.
pub fn extract_histories<T: Scalar>(
    model: &Mmmdp<T>,
    policy: &Policy,
    max_histories: usize,
) -> Result<Vec<History<T>>, RetroError> {
    policy.reachable(model).map_err(EvalError::from)?;
    let mut out = Vec::new();
    let mut states = vec![model.initial()];
    let mut actions = Vec::new();
    descend(model, policy, &mut states, &mut actions, T::one(), max_histories, &mut out)?;
    Ok(out)
}

fn descend<T: Scalar>(
    model: &Mmmdp<T>,
    policy: &Policy,
    states: &mut Vec<StateId>,
    actions: &mut Vec<ActionId>,
    prob: T,
    cap: usize,
    out: &mut Vec<History<T>>,
) -> Result<(), RetroError> {
    let t = actions.len();
    let s = *states.last().expect("trajectory starts at s0");
    if t == model.horizon() {
        if out.len() == cap {
            return Err(RetroError::TooManyHistories { cap });
        }
        let endpoint_worth = endpoint(model, states, actions)?;
        out.push(History { states: states.clone(), actions: actions.clone(), probability: prob, endpoint_worth });
        return Ok(());
    }
    let a = policy.get(s, t).expect("reachable node has an action");
    actions.push(a);
    for (to, p) in model.outcomes(s, a) {
        if p.is_zero() {
            continue;
        }
        states.push(*to);
        descend(model, policy, states, actions, prob.clone() * p.clone(), cap, out)?;
        states.pop();
    }
    actions.pop();
    Ok(())
}

fn endpoint<T: Scalar>(
    model: &Mmmdp<T>,
    states: &[StateId],
    actions: &[ActionId],
) -> Result<WorthVector<T>, WorthError> {
    let mut values = Vec::with_capacity(model.considerations().len());
    for con in model.considerations() {
        let mut w = con.identity();
        for t in (0..actions.len()).rev() {
            let mut acc = Aggregator::new(con.kind);
            acc.push(&T::one(), con.judgement(states[t], actions[t], states[t + 1]), &w)?;
            w = acc.finish();
        }
        values.push(w);
    }
    Ok(WorthVector(values))
}

/// "It was right to follow policy `policy`, given history `history` happened."
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Argument {
    pub policy: usize,
    pub history: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Attack {
    pub theory: usize,
    pub attacker: usize,
    pub target: usize,
}

/// Whether `theory` lets `attacker` attack `target`: the attacker's history
/// ends strictly better and its policy is strictly better at the root.
/// Arguments of the same policy never attack each other.
pub fn attacks<T: Scalar>(
    model: &Mmmdp<T>,
    theory: usize,
    attacker: &Argument,
    target: &Argument,
    histories: &[Vec<History<T>>],
    roots: &[WorthVector<T>],
) -> Result<bool, WorthError> {
    if attacker.policy == target.policy {
        return Ok(false);
    }
    let c = model.theories()[theory].consideration;
    let kind = model.kinds()[c];
    let cq1 = kind.prefers(
        histories[attacker.policy][attacker.history].endpoint_worth.get(c),
        histories[target.policy][target.history].endpoint_worth.get(c),
    )?;
    Ok(cq1 && kind.prefers(roots[attacker.policy].get(c), roots[target.policy].get(c))?)
}

/// Some theory ranked strictly above `theory` prefers the target's policy at the root.
fn blocked<T: Scalar>(
    model: &Mmmdp<T>,
    theory: usize,
    attacker_policy: usize,
    target_policy: usize,
    roots: &[WorthVector<T>],
) -> Result<bool, WorthError> {
    let rank = &model.theories()[theory].rank;
    for other in model.theories() {
        if other.rank < *rank {
            let c = other.consideration;
            if model.kinds()[c].prefers(roots[target_policy].get(c), roots[attacker_policy].get(c))? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// `𝒳(target)`: unblocked `(theory, attacking argument)` pairs.
pub fn attackers<T: Scalar>(
    model: &Mmmdp<T>,
    target: usize,
    arguments: &[Argument],
    histories: &[Vec<History<T>>],
    roots: &[WorthVector<T>],
) -> Result<Vec<(usize, usize)>, WorthError> {
    let tgt = &arguments[target];
    let mut out = Vec::new();
    for m in 0..model.theories().len() {
        for (i, arg) in arguments.iter().enumerate() {
            if attacks(model, m, arg, tgt, histories, roots)? && !blocked(model, m, arg.policy, tgt.policy, roots)? {
                out.push((m, i));
            }
        }
    }
    Ok(out)
}

/// `Σ_h P(h)·|𝒳(h)|`, with `attacker_sets` aligned to `histories`.
pub fn non_acceptability<T: Scalar>(histories: &[History<T>], attacker_sets: &[Vec<(usize, usize)>]) -> T {
    histories
        .iter()
        .zip(attacker_sets)
        .fold(T::zero(), |acc, (h, x)| acc + h.probability.clone() * T::from_usize(x.len()).expect("count fits"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MehrResult<T> {
    /// Canonical candidate policies, sorted; indices are policy ids.
    pub policies: Vec<Policy>,
    pub roots: Vec<WorthVector<T>>,
    pub histories: Vec<Vec<History<T>>>,
    pub arguments: Vec<Argument>,
    pub non_acceptability: Vec<T>,
    /// `Π*`, ascending ids.
    pub selected: Vec<usize>,
    /// Cheapest member of `Π*` for budgeted models.
    pub ssp_selected: Option<usize>,
    pub expected_costs: Option<Vec<T>>,
    pub per_theory_binary: bool,
}

impl<T: Scalar> MehrResult<T> {
    pub fn argument_index(&self, policy: usize, history: usize) -> Option<usize> {
        self.arguments.iter().position(|a| a.policy == policy && a.history == history)
    }

    /// The single policy to act on: `π*` when present, else the first of `Π*`.
    pub fn chosen(&self) -> usize {
        self.ssp_selected.unwrap_or(self.selected[0])
    }

    /// Every unblocked attack, sorted by target, theory, attacker.
    pub fn attacks(&self, model: &Mmmdp<T>) -> Result<Vec<Attack>, WorthError> {
        let mut out = Vec::new();
        for target in 0..self.arguments.len() {
            for (theory, attacker) in attackers(model, target, &self.arguments, &self.histories, &self.roots)? {
                out.push(Attack { theory, attacker, target });
            }
        }
        Ok(out)
    }
}

/// Per (policy, consideration): endpoint worths sorted from least to most preferred.
struct SortedEndpoints<T> {
    by_policy: Vec<Vec<Vec<Worth<T>>>>,
}

impl<T: Scalar> SortedEndpoints<T> {
    fn new(model: &Mmmdp<T>, histories: &[Vec<History<T>>]) -> Result<Self, WorthError> {
        let mut by_policy = Vec::new();
        for hs in histories {
            let mut per_c = Vec::new();
            for (c, kind) in model.kinds().iter().enumerate() {
                let mut v: Vec<_> = hs.iter().map(|h| h.endpoint_worth.get(c).clone()).collect();
                for w in &v {
                    kind.check_tag(w)?;
                }
                v.sort_by(|a, b| kind.compare(a, b).unwrap_or(Ordering::Equal));
                per_c.push(v);
            }
            by_policy.push(per_c);
        }
        Ok(SortedEndpoints { by_policy })
    }

    /// Histories of `policy` ending strictly better than `w` under consideration `c`.
    fn better_than(&self, model: &Mmmdp<T>, policy: usize, c: usize, w: &Worth<T>) -> usize {
        let kind = model.kinds()[c];
        let v = &self.by_policy[policy][c];
        v.len() - v.partition_point(|e| kind.compare(e, w).map(|o| o != Ordering::Greater).unwrap_or(true))
    }
}

/// Builds the argumentation over `policies` and picks `Π*`.
///
/// Input order does not matter: policies are canonicalised, deduplicated and
/// sorted first.
pub fn select<T: Scalar>(
    model: &Mmmdp<T>,
    policies: &[Policy],
    config: RetroConfig,
) -> Result<MehrResult<T>, RetroError> {
    if policies.is_empty() {
        return Err(RetroError::NoPolicies);
    }
    let mut canon = Vec::with_capacity(policies.len());
    for p in policies {
        canon.push(p.canonical(model).map_err(EvalError::from)?);
    }
    canon.sort();
    canon.dedup();
    let policies = canon;

    let mut roots = Vec::with_capacity(policies.len());
    let mut histories = Vec::with_capacity(policies.len());
    for p in &policies {
        roots.push(policy_worth(model, p)?.vector(0, model.initial()));
        histories.push(extract_histories(model, p, config.max_histories)?);
    }
    let mut arguments = Vec::new();
    for (pi, hs) in histories.iter().enumerate() {
        arguments.extend((0..hs.len()).map(|h| Argument { policy: pi, history: h }));
    }

    let sorted = SortedEndpoints::new(model, &histories)?;
    let theories = model.theories();
    // attack eligibility depends only on the policy pair: CQ2 and blocking
    let n = policies.len();
    let mut eligible = vec![vec![vec![false; n]; n]; theories.len()];
    for (m, th) in theories.iter().enumerate() {
        let kind = model.kinds()[th.consideration];
        for p in 0..n {
            for q in 0..n {
                if p != q
                    && kind.prefers(roots[p].get(th.consideration), roots[q].get(th.consideration))?
                    && !blocked(model, m, p, q, &roots)?
                {
                    eligible[m][p][q] = true;
                }
            }
        }
    }

    let mut scores = Vec::with_capacity(n);
    for q in 0..n {
        let mut total = T::zero();
        for h in &histories[q] {
            let mut count = 0usize;
            for (m, th) in theories.iter().enumerate() {
                let c = th.consideration;
                let mut under_m = 0usize;
                for (p, row) in eligible[m].iter().enumerate() {
                    if row[q] {
                        under_m += sorted.better_than(model, p, c, h.endpoint_worth.get(c));
                    }
                }
                count += if config.per_theory_binary { usize::from(under_m > 0) } else { under_m };
            }
            if count > 0 {
                total = total + h.probability.clone() * T::from_usize(count).expect("count fits");
            }
        }
        scores.push(total);
    }

    let min = scores.iter().cloned().fold(None::<T>, |acc, s| match acc {
        Some(m) if m <= s => Some(m),
        _ => Some(s),
    });
    let min = min.expect("nonempty");
    let tol = T::constant(SELECTION_TOLERANCE);
    let selected: Vec<usize> = (0..n).filter(|&i| scores[i].clone() - min.clone() <= tol).collect();

    let (expected_costs, ssp_selected) = if model.ssp().is_some() {
        let mut costs = Vec::with_capacity(n);
        for p in &policies {
            costs.push(expected_cost(model, p)?.expect("budgeted model has a cost"));
        }
        let best = selected.iter().copied().fold(None::<usize>, |acc, i| match acc {
            Some(b) if costs[b] <= costs[i] => Some(b),
            _ => Some(i),
        });
        (Some(costs), best)
    } else {
        (None, None)
    };

    Ok(MehrResult {
        policies,
        roots,
        histories,
        arguments,
        non_acceptability: scores,
        selected,
        ssp_selected,
        expected_costs,
        per_theory_binary: config.per_theory_binary,
    })
}

const EDGE_STYLES: [&str; 4] = ["solid", "dashed", "dotted", "bold"];
const EDGE_COLORS: [&str; 6] = ["black", "red", "blue", "darkgreen", "purple", "orange"];

fn quote(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz digraph: one box per argument, one edge per unblocked attack.
pub fn emit_argumentation_dot<T: Scalar>(model: &Mmmdp<T>, result: &MehrResult<T>) -> Result<String, WorthError> {
    let mut out = String::new();
    let _ = writeln!(out, "digraph mehr {{");
    let _ = writeln!(out, "  rankdir=LR;");
    let _ = writeln!(out, "  node [shape=box, fontname=\"monospace\"];");
    for (i, arg) in result.arguments.iter().enumerate() {
        let h = &result.histories[arg.policy][arg.history];
        let mut path = model.state_name(h.states[0]).to_owned();
        for (a, s) in h.actions.iter().zip(&h.states[1..]) {
            let _ = write!(path, " {} {}", model.action_name(*a), model.state_name(*s));
        }
        let label = format!(
            "policy {} history {}\\n{}\\np={}",
            arg.policy,
            arg.history,
            quote(&path),
            h.probability.to_decimal()
        );
        let _ = writeln!(out, "  a{i} [label=\"{label}\"];");
    }
    for attack in result.attacks(model)? {
        let theory = &model.theories()[attack.theory];
        let _ = writeln!(
            out,
            "  a{} -> a{} [label=\"{}\", style={}, color={}];",
            attack.attacker,
            attack.target,
            quote(&theory.name),
            EDGE_STYLES[attack.theory % EDGE_STYLES.len()],
            EDGE_COLORS[attack.theory % EDGE_COLORS.len()]
        );
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::insulin::{self, SmallConfig, SmallTheories};

    fn setup(theories: SmallTheories) -> (Mmmdp<f64>, Vec<Policy>) {
        let m = insulin::lost_insulin::<f64>(SmallConfig { theories });
        let policies = vec![insulin::steal_policy(&m), insulin::wait_policy(&m)];
        (m, policies)
    }

    #[test]
    fn wait_histories() {
        let (m, _) = setup(SmallTheories::UtilityOnly);
        let hs = extract_histories(&m, &insulin::wait_policy(&m), 100).unwrap();
        let names: Vec<Vec<&str>> = hs.iter().map(|h| h.states.iter().map(|s| m.state_name(*s)).collect()).collect();
        assert_eq!(names, vec![vec!["s0", "s0", "s0"], vec!["s0", "s0", "s1"], vec!["s0", "s1", "s1"]]);
        let probs: Vec<f64> = hs.iter().map(|h| h.probability).collect();
        for (p, want) in probs.iter().zip([0.16, 0.24, 0.6]) {
            assert!((p - want).abs() < 1e-12);
        }
        let ends: Vec<_> = hs.iter().map(|h| *h.endpoint_worth.get(0)).collect();
        assert_eq!(ends, vec![Worth::Real(0.0), Worth::Real(-10.0), Worth::Real(-10.0)]);
        assert!(matches!(
            extract_histories(&m, &insulin::wait_policy(&m), 2),
            Err(RetroError::TooManyHistories { cap: 2 })
        ));
    }

    #[test]
    fn utility_only_selection() {
        let (m, policies) = setup(SmallTheories::UtilityOnly);
        let r = select(&m, &policies, RetroConfig::default()).unwrap();
        let steal = r.policies.iter().position(|p| *p == insulin::steal_policy(&m)).unwrap();
        let wait = r.policies.iter().position(|p| *p == insulin::wait_policy(&m)).unwrap();
        assert!(r.non_acceptability[steal].abs() < 1e-12);
        assert!((r.non_acceptability[wait] - 0.84).abs() < 1e-12);
        assert_eq!(r.selected, vec![steal]);
        let dot = emit_argumentation_dot(&m, &r).unwrap();
        assert_eq!(dot.matches(" [label=\"policy").count(), 7);
        assert_eq!(dot.matches(" -> ").count(), 2);
    }

    #[test]
    fn attack_examples() {
        let (m, policies) = setup(SmallTheories::UtilityOnly);
        let r = select(&m, &policies, RetroConfig::default()).unwrap();
        let steal = r.policies.iter().position(|p| *p == insulin::steal_policy(&m)).unwrap();
        let wait = 1 - steal;
        // steal history ending in s2 against the wait history ending in s1
        let att = Argument { policy: steal, history: 0 };
        let tgt = Argument { policy: wait, history: 2 };
        assert!(attacks(&m, 0, &att, &tgt, &r.histories, &r.roots).unwrap());
        assert!(!attacks(&m, 0, &tgt, &att, &r.histories, &r.roots).unwrap());
        let same = Argument { policy: steal, history: 3 };
        assert!(!attacks(&m, 0, &att, &same, &r.histories, &r.roots).unwrap());
    }

    #[test]
    fn equal_ranks_and_blocking() {
        let (m, policies) = setup(SmallTheories::EqualRanks);
        let r = select(&m, &policies, RetroConfig::default()).unwrap();
        let steal = r.policies.iter().position(|p| *p == insulin::steal_policy(&m)).unwrap();
        let wait = 1 - steal;
        assert!((r.non_acceptability[steal] - 3.0).abs() < 1e-12);
        assert!((r.non_acceptability[wait] - 0.84).abs() < 1e-12);
        assert_eq!(r.selected, vec![wait]);
        for h in 0..4 {
            let arg = r.argument_index(steal, h).unwrap();
            let x = attackers(&m, arg, &r.arguments, &r.histories, &r.roots).unwrap();
            assert_eq!(x.len(), 3);
            assert!(x.iter().all(|&(th, a)| th == 1 && r.arguments[a].policy == wait));
        }

        let (m, policies) = setup(SmallTheories::UtilityFirst);
        let r = select(&m, &policies, RetroConfig::default()).unwrap();
        for h in 0..4 {
            let arg = r.argument_index(steal, h).unwrap();
            assert!(attackers(&m, arg, &r.arguments, &r.histories, &r.roots).unwrap().is_empty());
        }
        assert_eq!(r.selected, vec![steal]);
    }

    #[test]
    fn binary_reading_counts_theories() {
        let (m, policies) = setup(SmallTheories::EqualRanks);
        let r = select(&m, &policies, RetroConfig { per_theory_binary: true, ..Default::default() }).unwrap();
        let steal = r.policies.iter().position(|p| *p == insulin::steal_policy(&m)).unwrap();
        assert!((r.non_acceptability[steal] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sum_matches_attacker_sets() {
        let (m, policies) = setup(SmallTheories::EqualRanks);
        let r = select(&m, &policies, RetroConfig::default()).unwrap();
        for (pi, hs) in r.histories.iter().enumerate() {
            let sets: Vec<_> = (0..hs.len())
                .map(|h| attackers(&m, r.argument_index(pi, h).unwrap(), &r.arguments, &r.histories, &r.roots).unwrap())
                .collect();
            assert!((non_acceptability(hs, &sets) - r.non_acceptability[pi]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_policy_is_unattacked() {
        let (m, policies) = setup(SmallTheories::EqualRanks);
        let r = select(&m, &policies[..1], RetroConfig::default()).unwrap();
        assert_eq!(r.non_acceptability, vec![0.0]);
        assert!(select(&m, &[], RetroConfig::default()).is_err());
    }
}
