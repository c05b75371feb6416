//! Heuristic search over state-time nodes for the Pareto-undominated
//! non-stationary policies.
//!
//! Each node keeps a table of entries. An entry is one class of sub-policies
//! rooted at the node: its worth vector plus the choices it makes at
//! state-times that can also be reached without passing through the node
//! (its *shared* map). Two sub-policies are only compared when their shared
//! maps agree, which keeps the result a set of Markov policies rather than
//! history-dependent plans.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::heuristic::Heuristic;
#[cfg(test)]
use crate::model::StateId;
use crate::model::{validate, ActionId, Consideration, Mmmdp, StateTime, Violation};
use crate::policy::Policy;
use crate::scalar::Scalar;
use crate::worth::{Aggregator, ConsiderationKind, Worth, WorthError, WorthVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    /// Combinations allowed in a single node backup.
    pub vector_cap: usize,
    /// Distinct policies allowed during extraction.
    pub max_policies: usize,
}

impl SolverConfig {
    pub const DEFAULT_VECTOR_CAP: usize = 10_000;
    pub const DEFAULT_MAX_POLICIES: usize = 10_000;
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { vector_cap: Self::DEFAULT_VECTOR_CAP, max_policies: Self::DEFAULT_MAX_POLICIES }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub expansions: usize,
    pub backups: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("heuristic has {found} tables, model has {expected} considerations")]
    HeuristicShape { found: usize, expected: usize },
    #[error("heuristic for {consideration}: {source}")]
    HeuristicTag { consideration: String, source: WorthError },
    #[error("backup of {state}@{time} exceeded the vector cap of {cap} combinations")]
    VectorCap { state: String, time: usize, cap: usize },
    #[error("policy extraction exceeded max_policies = {cap} ({found} found so far)")]
    TooManyPolicies { found: usize, cap: usize },
    #[error("search did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("state {state}@{time} is not in the search graph")]
    UnknownNode { state: String, time: usize },
    #[error(transparent)]
    Worth(#[from] WorthError),
}

impl SolveError {
    /// Whether the error comes from a configured size limit.
    pub fn is_capacity(&self) -> bool {
        matches!(self, SolveError::VectorCap { .. } | SolveError::TooManyPolicies { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Producer {
    action: ActionId,
    // entry index chosen at each positive-probability successor, in outcome order
    children: Vec<u32>,
}

#[derive(Debug, Clone)]
struct Entry<T> {
    vector: WorthVector<T>,
    // reaches a goal with positive probability; only meaningful for budgeted models
    reach: bool,
    shared: Vec<(usize, u32)>,
    producers: Vec<Producer>,
    // depends on a heuristic seed somewhere below
    tentative: bool,
    // dominator-tree bound on everything reachable from those seeds
    frontier: Option<usize>,
}

type Edge = (ActionId, Vec<(usize, usize)>);

/// Reachable state-time graph under all actions, with its dominator tree.
#[derive(Debug, Clone)]
struct Graph {
    nodes: Vec<StateTime>,
    index: HashMap<StateTime, usize>,
    // per node: (action, [(child, outcome index)]) over positive-probability outcomes
    edges: Vec<Vec<Edge>>,
    idom: Vec<usize>,
    depth: Vec<usize>,
    tin: Vec<usize>,
    tout: Vec<usize>,
    closure_lca: Vec<usize>,
}

impl Graph {
    fn build<T: Scalar>(model: &Mmmdp<T>) -> Graph {
        let h = model.horizon();
        let root = (model.initial(), 0);
        let mut nodes = vec![root];
        let mut index = HashMap::from([(root, 0)]);
        let mut edges = Vec::new();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new()];
        let mut i = 0;
        // breadth-first, so nodes are sorted by time
        while i < nodes.len() {
            let (s, t) = nodes[i];
            let mut out = Vec::new();
            if t < h {
                for a in model.applicable_actions(s) {
                    let mut kids = Vec::new();
                    for (k, (to, p)) in model.outcomes(s, a).iter().enumerate() {
                        if p.is_zero() {
                            continue;
                        }
                        let key = (*to, t + 1);
                        let j = *index.entry(key).or_insert_with(|| {
                            nodes.push(key);
                            preds.push(Vec::new());
                            nodes.len() - 1
                        });
                        if !preds[j].contains(&i) {
                            preds[j].push(i);
                        }
                        kids.push((j, k));
                    }
                    out.push((a, kids));
                }
            }
            edges.push(out);
            i += 1;
        }

        let n = nodes.len();
        let mut idom = vec![0; n];
        let mut depth = vec![0; n];
        for x in 1..n {
            let mut d = preds[x][0];
            for &p in &preds[x][1..] {
                d = lca(&idom, &depth, d, p);
            }
            idom[x] = d;
            depth[x] = depth[d] + 1;
        }
        let mut kids = vec![Vec::new(); n];
        for x in 1..n {
            kids[idom[x]].push(x);
        }
        let (mut tin, mut tout) = (vec![0; n], vec![0; n]);
        let mut clock = 0;
        let mut stack = vec![(0usize, false)];
        while let Some((x, done)) = stack.pop() {
            if done {
                tout[x] = clock;
                clock += 1;
                continue;
            }
            tin[x] = clock;
            clock += 1;
            stack.push((x, true));
            for &c in kids[x].iter().rev() {
                stack.push((c, false));
            }
        }

        let mut closure_lca: Vec<usize> = (0..n).collect();
        for x in (0..n).rev() {
            if nodes[x].1 >= h {
                continue;
            }
            let mut acc = x;
            for (_, kids) in &edges[x] {
                for &(c, _) in kids {
                    if nodes[c].1 < h {
                        acc = lca(&idom, &depth, acc, closure_lca[c]);
                    }
                }
            }
            closure_lca[x] = acc;
        }

        Graph { nodes, index, edges, idom, depth, tin, tout, closure_lca }
    }

    fn lca(&self, a: usize, b: usize) -> usize {
        lca(&self.idom, &self.depth, a, b)
    }

    /// `a` lies on every path from the root to `b`.
    fn dominates(&self, a: usize, b: usize) -> bool {
        self.tin[a] <= self.tin[b] && self.tout[b] <= self.tout[a]
    }
}

fn lca(idom: &[usize], depth: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        if depth[a] >= depth[b] {
            a = idom[a];
        } else {
            b = idom[b];
        }
    }
    a
}

/// Search state: the explicit graph, per-node entry tables and `α`.
#[derive(Debug, Clone)]
pub struct SolverWorkspace<'m, T> {
    model: &'m Mmmdp<T>,
    heuristic: &'m Heuristic<T>,
    config: SolverConfig,
    graph: Graph,
    expanded: Vec<bool>,
    tables: Vec<Vec<Entry<T>>>,
    alpha: Vec<Vec<ActionId>>,
    stats: SolveStats,
}

impl<'m, T: Scalar> SolverWorkspace<'m, T> {
    pub fn new(model: &'m Mmmdp<T>, heuristic: &'m Heuristic<T>, config: SolverConfig) -> Result<Self, SolveError> {
        let violations = validate(model);
        if !violations.is_empty() {
            return Err(SolveError::Invalid(violations));
        }
        if heuristic.len() != model.considerations().len() {
            return Err(SolveError::HeuristicShape { found: heuristic.len(), expected: model.considerations().len() });
        }
        for (c, con) in model.considerations().iter().enumerate() {
            let table = &heuristic.per_consideration[c];
            let all = std::iter::once(&table.default).chain(table.timed.values()).chain(table.untimed.values());
            for w in all {
                con.kind
                    .check_tag(w)
                    .map_err(|source| SolveError::HeuristicTag { consideration: con.name.clone(), source })?;
            }
        }
        let graph = Graph::build(model);
        let n = graph.nodes.len();
        let mut ws = SolverWorkspace {
            model,
            heuristic,
            config,
            graph,
            expanded: vec![false; n],
            tables: vec![Vec::new(); n],
            alpha: vec![Vec::new(); n],
            stats: SolveStats::default(),
        };
        for x in 0..n {
            ws.tables[x] = vec![ws.seed(x)];
        }
        Ok(ws)
    }

    fn seed(&self, x: usize) -> Entry<T> {
        let (s, t) = self.graph.nodes[x];
        if t >= self.model.horizon() {
            Entry {
                vector: WorthVector::identity(self.model.kinds()),
                reach: self.model.is_goal(s),
                shared: Vec::new(),
                producers: Vec::new(),
                tentative: false,
                frontier: None,
            }
        } else {
            let vector =
                (0..self.model.considerations().len()).map(|c| self.heuristic.estimate(c, s, t).clone()).collect();
            Entry {
                vector: WorthVector(vector),
                reach: true,
                shared: Vec::new(),
                producers: Vec::new(),
                tentative: true,
                frontier: Some(self.graph.closure_lca[x]),
            }
        }
    }

    fn node(&self, (s, t): StateTime) -> Result<usize, SolveError> {
        self.graph
            .index
            .get(&(s, t))
            .copied()
            .ok_or_else(|| SolveError::UnknownNode { state: self.model.state_name(s).to_owned(), time: t })
    }

    pub fn model(&self) -> &'m Mmmdp<T> {
        self.model
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    /// Number of state-time pairs reachable from `(s0, 0)` under some policy, terminal layer included.
    /// Every reachable state-time, in breadth-first order.
    pub fn all_nodes(&self) -> Vec<StateTime> {
        self.graph.nodes.clone()
    }

    pub fn state_time_count(&self) -> usize {
        self.graph.nodes.len()
    }

    /// Reachable decision nodes, `t < H`.
    pub fn decision_node_count(&self) -> usize {
        self.graph.nodes.iter().filter(|(_, t)| *t < self.model.horizon()).count()
    }

    /// Marks a node as interior; its table is rebuilt by the next [`backup`](Self::backup).
    /// Returns false if it was already expanded or is terminal.
    pub fn expand(&mut self, node: StateTime) -> Result<bool, SolveError> {
        let x = self.node(node)?;
        if self.expanded[x] || node.1 >= self.model.horizon() {
            return Ok(false);
        }
        self.expanded[x] = true;
        self.stats.expansions += 1;
        Ok(true)
    }

    /// The `Ŵ` table, restricted to nodes with computed or seeded values.
    pub fn vec_w(&self) -> BTreeMap<StateTime, Vec<WorthVector<T>>> {
        self.graph
            .nodes
            .iter()
            .zip(&self.tables)
            .map(|(&k, entries)| (k, entries.iter().map(|e| e.vector.clone()).collect()))
            .collect()
    }

    pub fn vectors(&self, node: StateTime) -> Result<Vec<WorthVector<T>>, SolveError> {
        let x = self.node(node)?;
        Ok(self.tables[x].iter().map(|e| e.vector.clone()).collect())
    }

    pub fn alpha(&self, node: StateTime) -> Result<&[ActionId], SolveError> {
        let x = self.node(node)?;
        Ok(&self.alpha[x])
    }

    pub fn interior(&self) -> BTreeSet<StateTime> {
        (0..self.graph.nodes.len()).filter(|&x| self.expanded[x]).map(|x| self.graph.nodes[x]).collect()
    }

    /// Unexpanded decision nodes reachable from the root through `α`.
    pub fn fringe(&self) -> BTreeSet<StateTime> {
        let h = self.model.horizon();
        self.reachable_via_alpha()
            .into_iter()
            .filter(|&x| !self.expanded[x] && self.graph.nodes[x].1 < h)
            .map(|x| self.graph.nodes[x])
            .collect()
    }

    fn reachable_via_alpha(&self) -> BTreeSet<usize> {
        let h = self.model.horizon();
        let mut seen = BTreeSet::new();
        let mut stack = vec![0usize];
        while let Some(x) = stack.pop() {
            if self.graph.nodes[x].1 >= h || !seen.insert(x) {
                continue;
            }
            if !self.expanded[x] {
                continue;
            }
            for (a, kids) in &self.graph.edges[x] {
                if self.alpha[x].contains(a) {
                    stack.extend(kids.iter().map(|&(c, _)| c));
                }
            }
        }
        seen
    }

    /// Rebuilds the table of `node` from its successors' current tables.
    pub fn backup(&mut self, node: StateTime) -> Result<(), SolveError> {
        let x = self.node(node)?;
        self.backup_index(x)
    }

    fn backup_index(&mut self, x: usize) -> Result<(), SolveError> {
        let model = self.model;
        let (_, t) = self.graph.nodes[x];
        if t >= model.horizon() {
            return Ok(());
        }
        self.stats.backups += 1;
        let is_root = x == 0;
        let mut combos = 0usize;
        let mut merged_all = Vec::new();
        for (a, kids) in &self.graph.edges[x] {
            let mut cands = Vec::new();
            let mut choice = Vec::with_capacity(kids.len());
            self.combine(x, *a, kids, 0, &[], &mut choice, &mut cands, &mut combos)?;
            if is_root {
                cands = self.budget_filter(cands);
            }
            merged_all.extend(self.prune(x, cands, is_root)?);
        }
        let entries = self.prune(x, merged_all, is_root)?;
        let mut alpha: Vec<ActionId> = entries.iter().flat_map(|e| e.producers.iter().map(|p| p.action)).collect();
        alpha.sort();
        alpha.dedup();
        self.tables[x] = entries;
        self.alpha[x] = alpha;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn combine(
        &self,
        x: usize,
        a: ActionId,
        kids: &[(usize, usize)],
        i: usize,
        merged: &[(usize, u32)],
        choice: &mut Vec<u32>,
        out: &mut Vec<Entry<T>>,
        combos: &mut usize,
    ) -> Result<(), SolveError> {
        if i == kids.len() {
            *combos += 1;
            if *combos > self.config.vector_cap {
                let (s, t) = self.graph.nodes[x];
                return Err(SolveError::VectorCap {
                    state: self.model.state_name(s).to_owned(),
                    time: t,
                    cap: self.config.vector_cap,
                });
            }
            out.push(self.assemble(x, a, kids, merged, choice)?);
            return Ok(());
        }
        let (c, _) = kids[i];
        let h = self.model.horizon();
        for (e, entry) in self.tables[c].iter().enumerate() {
            let e = e as u32;
            let mut next = merged.to_vec();
            let mut ok = true;
            if self.graph.nodes[c].1 < h && !self.graph.dominates(x, c) {
                ok &= insert_shared(&mut next, c, e);
            }
            for &(k, v) in &entry.shared {
                if !ok {
                    break;
                }
                ok &= insert_shared(&mut next, k, v);
            }
            if !ok {
                continue;
            }
            choice.push(e);
            let r = self.combine(x, a, kids, i + 1, &next, choice, out, combos);
            choice.pop();
            r?;
        }
        Ok(())
    }

    fn assemble(
        &self,
        x: usize,
        a: ActionId,
        kids: &[(usize, usize)],
        merged: &[(usize, u32)],
        choice: &[u32],
    ) -> Result<Entry<T>, SolveError> {
        let model = self.model;
        let (s, _) = self.graph.nodes[x];
        let outcomes = model.outcomes(s, a);
        let mut vector = Vec::with_capacity(model.considerations().len());
        for (ci, con) in model.considerations().iter().enumerate() {
            let mut acc = Aggregator::new(con.kind);
            for (&(c, k), &e) in kids.iter().zip(choice) {
                let (to, p) = &outcomes[k];
                let child = &self.tables[c][e as usize];
                acc.push(p, con.judgement(s, a, *to), child.vector.get(ci))?;
            }
            vector.push(acc.finish());
        }
        let mut reach = model.is_goal(s);
        let mut tentative = false;
        let mut frontier: Option<usize> = None;
        for (&(c, _), &e) in kids.iter().zip(choice) {
            let child = &self.tables[c][e as usize];
            reach |= child.reach;
            tentative |= child.tentative;
            if let Some(f) = child.frontier {
                frontier = Some(match frontier {
                    Some(g) => self.graph.lca(g, f),
                    None => f,
                });
            }
        }
        let shared = merged.iter().copied().filter(|&(k, _)| !self.graph.dominates(x, k)).collect();
        Ok(Entry {
            vector: WorthVector(vector),
            reach,
            shared,
            producers: vec![Producer { action: a, children: choice.to_vec() }],
            tentative,
            frontier,
        })
    }

    fn budget_filter(&self, cands: Vec<Entry<T>>) -> Vec<Entry<T>> {
        let Some(ssp) = self.model.ssp() else { return cands };
        cands
            .into_iter()
            .filter(|e| e.reach && matches!(e.vector.get(ssp.cost_consideration), Worth::Real(c) if *c <= ssp.budget))
            .collect()
    }

    /// Grouped Pareto pruning with duplicate merging.
    fn prune(&self, x: usize, cands: Vec<Entry<T>>, is_root: bool) -> Result<Vec<Entry<T>>, SolveError> {
        let kinds = self.model.kinds();
        let use_reach = self.model.ssp().is_some() && !is_root;
        let mut groups: BTreeMap<Vec<(usize, u32)>, Vec<Entry<T>>> = BTreeMap::new();
        let mut order = Vec::new();
        for e in cands {
            if !groups.contains_key(&e.shared) {
                order.push(e.shared.clone());
            }
            let g = groups.entry(e.shared.clone()).or_default();
            let dup = if e.tentative {
                None
            } else {
                g.iter_mut().find(|f| !f.tentative && f.reach == e.reach && f.vector == e.vector)
            };
            match dup {
                Some(f) => {
                    for p in e.producers {
                        if !f.producers.contains(&p) {
                            f.producers.push(p);
                        }
                    }
                }
                None => g.push(e),
            }
        }
        let mut out = Vec::new();
        for key in order {
            let group = groups.remove(&key).expect("group recorded");
            let mut keep = vec![true; group.len()];
            for (i, e) in group.iter().enumerate() {
                let prunable = !e.tentative || e.frontier.is_none_or(|g| self.graph.dominates(x, g));
                if !prunable {
                    continue;
                }
                for (j, f) in group.iter().enumerate() {
                    if i != j && dominates_ext(f, e, kinds, use_reach)? {
                        keep[i] = false;
                        break;
                    }
                }
            }
            out.extend(group.into_iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| e));
        }
        Ok(out)
    }

    /// All expanded nodes in descending time order.
    fn backup_pass(&mut self) -> Result<(), SolveError> {
        for x in (0..self.graph.nodes.len()).rev() {
            if self.expanded[x] {
                self.backup_index(x)?;
            }
        }
        Ok(())
    }

    /// Undominated root vectors over the visible considerations.
    pub fn root_vectors(&self) -> Vec<WorthVector<T>> {
        let mut out: Vec<WorthVector<T>> = Vec::new();
        for e in &self.tables[0] {
            if !self.expanded[0] || e.tentative {
                continue;
            }
            if !out.contains(&e.vector) {
                out.push(e.vector.clone());
            }
        }
        out
    }
}

fn insert_shared(map: &mut Vec<(usize, u32)>, k: usize, v: u32) -> bool {
    match map.binary_search_by_key(&k, |&(key, _)| key) {
        Ok(i) => map[i].1 == v,
        Err(i) => {
            map.insert(i, (k, v));
            true
        }
    }
}

fn dominates_ext<T: Scalar>(
    a: &Entry<T>,
    b: &Entry<T>,
    kinds: &[ConsiderationKind],
    use_reach: bool,
) -> Result<bool, WorthError> {
    let mut strict = false;
    for ((x, y), kind) in a.vector.iter().zip(b.vector.iter()).zip(kinds) {
        match kind.compare(x, y)? {
            std::cmp::Ordering::Less => return Ok(false),
            std::cmp::Ordering::Greater => strict = true,
            std::cmp::Ordering::Equal => {}
        }
    }
    if use_reach {
        match (a.reach, b.reach) {
            (false, true) => return Ok(false),
            (true, false) => strict = true,
            _ => {}
        }
    }
    Ok(strict)
}

/// `Ŵ ≈ Ŵ'`: every vector on either side has a componentwise-consistent
/// counterpart at the same node on the other side.
pub fn converged<T: Scalar>(
    vec_w: &BTreeMap<StateTime, Vec<WorthVector<T>>>,
    vec_w_prev: &BTreeMap<StateTime, Vec<WorthVector<T>>>,
    considerations: &[Consideration<T>],
) -> bool {
    let covered = |a: &BTreeMap<StateTime, Vec<WorthVector<T>>>, b: &BTreeMap<StateTime, Vec<WorthVector<T>>>| {
        a.iter().all(|(k, vs)| {
            let others = b.get(k).map(Vec::as_slice).unwrap_or(&[]);
            vs.iter().all(|v| {
                others.iter().any(|o| {
                    v.len() == o.len()
                        && considerations
                            .iter()
                            .zip(v.iter().zip(o.iter()))
                            .all(|(c, (x, y))| c.consistent(x, y).unwrap_or(false))
                })
            })
        })
    };
    covered(vec_w, vec_w_prev) && covered(vec_w_prev, vec_w)
}

/// Result of [`mplan`].
#[derive(Debug, Clone)]
pub struct Solution<'m, T> {
    /// Canonical policies, sorted.
    pub policies: Vec<Policy>,
    pub root_vectors: Vec<WorthVector<T>>,
    pub stats: SolveStats,
    pub workspace: SolverWorkspace<'m, T>,
}

/// Bounds the outer loop; each productive iteration expands at least one node.
fn iteration_limit(decision_nodes: usize) -> usize {
    decision_nodes + 3
}

/// Runs the search to convergence and extracts every undominated policy.
///
/// For budgeted models only proper policies within the budget are returned;
/// an empty list means none exists.
pub fn mplan<'m, T: Scalar>(
    model: &'m Mmmdp<T>,
    heuristic: &'m Heuristic<T>,
    config: SolverConfig,
) -> Result<Solution<'m, T>, SolveError> {
    let mut ws = SolverWorkspace::new(model, heuristic, config)?;
    let limit = iteration_limit(ws.decision_node_count());
    let mut prev: Option<BTreeMap<StateTime, Vec<WorthVector<T>>>> = None;
    loop {
        ws.stats.iterations += 1;
        if ws.stats.iterations > limit {
            return Err(SolveError::NoConvergence(limit));
        }
        let fringe = ws.fringe();
        if fringe.is_empty() {
            let now = ws.vec_w();
            if prev.as_ref().is_some_and(|p| converged(&now, p, model.considerations())) {
                break;
            }
        }
        for node in fringe {
            ws.expand(node)?;
        }
        prev = Some(ws.vec_w());
        ws.backup_pass()?;
    }
    // the last iteration only checked convergence
    ws.stats.iterations -= 1;
    let policies = extract_policies(&ws, config.max_policies)?;
    let root_vectors = ws.root_vectors();
    Ok(Solution { policies, root_vectors, stats: ws.stats, workspace: ws })
}

/// Walks the producer records of every root entry. A state-time reached
/// along several branches gets a single action.
pub fn extract_policies<T: Scalar>(
    ws: &SolverWorkspace<'_, T>,
    max_policies: usize,
) -> Result<Vec<Policy>, SolveError> {
    let mut out = BTreeSet::new();
    if !ws.expanded[0] {
        return Ok(Vec::new());
    }
    for e in 0..ws.tables[0].len() {
        if ws.tables[0][e].tentative {
            continue;
        }
        let mut assigned = BTreeMap::new();
        walk(ws, vec![(0, e as u32)], &mut assigned, &mut out, max_policies)?;
    }
    Ok(out.into_iter().collect())
}

fn walk<T: Scalar>(
    ws: &SolverWorkspace<'_, T>,
    mut tasks: Vec<(usize, u32)>,
    assigned: &mut BTreeMap<usize, ActionId>,
    out: &mut BTreeSet<Policy>,
    cap: usize,
) -> Result<(), SolveError> {
    let h = ws.model.horizon();
    let next = loop {
        match tasks.pop() {
            None => break None,
            Some((x, _)) if ws.graph.nodes[x].1 >= h || assigned.contains_key(&x) => continue,
            Some(task) => break Some(task),
        }
    };
    let Some((x, e)) = next else {
        let policy = Policy::from_map(assigned.iter().map(|(&x, &a)| (ws.graph.nodes[x], a)).collect());
        out.insert(policy);
        if out.len() > cap {
            return Err(SolveError::TooManyPolicies { found: out.len(), cap });
        }
        return Ok(());
    };
    let entry = &ws.tables[x][e as usize];
    for p in &entry.producers {
        let kids = ws.graph.edges[x]
            .iter()
            .find(|(a, _)| *a == p.action)
            .map(|(_, k)| k)
            .expect("producer action is applicable");
        let mut more = tasks.clone();
        more.extend(kids.iter().zip(&p.children).map(|(&(c, _), &ce)| (c, ce)));
        assigned.insert(x, p.action);
        walk(ws, more, assigned, out, cap)?;
        assigned.remove(&x);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristic::default_heuristic;
    use crate::insulin::{self, SmallConfig, SmallTheories};
    use crate::model::{Consideration, ModelBuilder};
    use crate::oracle::{oracle_undominated_policies, EnumerationBound};
    use num_rational::BigRational;

    fn v(u: f64, f: bool) -> WorthVector<f64> {
        WorthVector(vec![Worth::Real(u), Worth::Flag(f)])
    }

    #[test]
    fn root_backup_with_identity_seeds() {
        let m = insulin::lost_insulin::<f64>(SmallConfig { theories: SmallTheories::EqualRanks });
        let h = default_heuristic(&m);
        let mut ws = SolverWorkspace::new(&m, &h, SolverConfig::default()).unwrap();
        let root = (m.initial(), 0);
        ws.expand(root).unwrap();
        ws.backup(root).unwrap();
        let got = ws.vectors(root).unwrap();
        assert_eq!(got.len(), 2);
        assert!(got.contains(&v(-5.0, true)));
        // (s0, 1) still holds its seed, so waiting looks like -6 here
        assert!(got
            .iter()
            .any(|w| w.get(1) == &Worth::Flag(false) && (w.get(0).as_real().unwrap() + 6.0).abs() < 1e-12));
        assert_eq!(ws.alpha(root).unwrap().len(), 2);

        let u = insulin::lost_insulin::<f64>(SmallConfig { theories: SmallTheories::UtilityOnly });
        let hu = default_heuristic(&u);
        let mut ws = SolverWorkspace::new(&u, &hu, SolverConfig::default()).unwrap();
        ws.expand(root).unwrap();
        ws.backup(root).unwrap();
        assert_eq!(ws.vectors(root).unwrap(), vec![WorthVector(vec![Worth::Real(-5.0)])]);
        assert_eq!(ws.alpha(root).unwrap(), &[u.action_id("steal").unwrap()]);
    }

    #[test]
    fn insulin_solutions() {
        let m = insulin::lost_insulin::<f64>(SmallConfig { theories: SmallTheories::EqualRanks });
        let h = default_heuristic(&m);
        let sol = mplan(&m, &h, SolverConfig::default()).unwrap();
        let want: BTreeSet<Policy> = [insulin::steal_policy(&m), insulin::wait_policy(&m)].into();
        assert_eq!(sol.policies.iter().cloned().collect::<BTreeSet<_>>(), want);
        assert!(sol.root_vectors.contains(&v(-5.0, true)));
        assert_eq!(sol.root_vectors.len(), 2);
        assert!(sol
            .root_vectors
            .iter()
            .any(|r| r.get(1) == &Worth::Flag(false) && (r.get(0).as_real().unwrap() + 8.4).abs() < 1e-12));
        assert!(sol.stats.expansions <= m.num_states() * m.horizon());

        let u = insulin::lost_insulin::<f64>(SmallConfig { theories: SmallTheories::UtilityOnly });
        let hu = default_heuristic(&u);
        let sol = mplan(&u, &hu, SolverConfig::default()).unwrap();
        assert_eq!(sol.policies, vec![insulin::steal_policy(&u)]);
        // the steal branch needs no expansion beyond its absorbing successors
        let again = mplan(&u, &hu, SolverConfig::default()).unwrap();
        assert_eq!(sol.stats, again.stats);
    }

    #[test]
    fn over_budget_root_is_empty() {
        let mut b = ModelBuilder::<f64>::new();
        let s0 = b.state("s0");
        let g = b.state("g");
        let go = b.action("go");
        b.initial(s0).horizon(2);
        b.transition(s0, go, g, 1.0).transition(g, go, g, 1.0);
        let mut cost = Consideration::new("cost", ConsiderationKind::Cost);
        cost.default_judgement = Worth::Real(5.0);
        let c = b.consideration(cost);
        b.judge(c, g, go, g, Worth::Real(0.0));
        b.ssp([g].into_iter().collect(), 1.0, c);
        let m = b.build().unwrap();
        let h = default_heuristic(&m);
        let mut ws = SolverWorkspace::new(&m, &h, SolverConfig::default()).unwrap();
        ws.expand((s0, 0)).unwrap();
        ws.backup((s0, 0)).unwrap();
        assert!(ws.vectors((s0, 0)).unwrap().is_empty());
        assert!(ws.alpha((s0, 0)).unwrap().is_empty());
        assert!(mplan(&m, &h, SolverConfig::default()).unwrap().policies.is_empty());
    }

    #[test]
    fn vector_cap_is_a_capacity_error() {
        let m = insulin::lost_insulin::<f64>(SmallConfig { theories: SmallTheories::EqualRanks });
        let h = default_heuristic(&m);
        let err = mplan(&m, &h, SolverConfig { vector_cap: 1, ..Default::default() }).unwrap_err();
        assert!(err.is_capacity(), "{err}");
    }

    /// An unexpanded branch that can reach a state-time shared with another
    /// root action must not be pruned on its seed value alone.
    #[test]
    fn seeded_entries_over_shared_nodes_survive() {
        let mut b = ModelBuilder::<f64>::new();
        let [r, n, w, y, u, q, x, y2, end, qq] =
            ["r", "n", "w", "y", "u", "q", "x", "y2", "end", "qq"].map(|s| b.state(s));
        let [a, bb, c, d, go, g1, g2] = ["a", "b", "c", "d", "go", "g1", "g2"].map(|s| b.action(s));
        b.initial(r).horizon(4);
        b.transition(r, a, n, 0.5).transition(r, a, w, 0.5).transition(r, bb, y, 1.0);
        b.transition(n, c, u, 1.0).transition(n, d, q, 1.0);
        b.transition(y, go, y2, 1.0).transition(y2, go, x, 1.0).transition(u, go, x, 1.0);
        b.transition(x, g1, end, 1.0).transition(x, g2, end, 1.0);
        for s in [w, end] {
            b.transition(s, go, end, 1.0);
        }
        // q's branch stays private to n
        b.transition(q, go, qq, 1.0).transition(qq, go, qq, 1.0);
        let _util = b.consideration(Consideration::new("utility", ConsiderationKind::Utility));
        let law = b.consideration(Consideration::new("law", ConsiderationKind::Absolute));
        for (s, act, to) in [(r, a, w), (r, bb, y), (n, c, u), (x, g2, end)] {
            b.judge(law, s, act, to, Worth::Flag(true));
        }
        b.theory("law", law, BigRational::from_integer(0.into()));
        let m = b.build().unwrap();
        let h = default_heuristic(&m);
        let sol = mplan(&m, &h, SolverConfig::default()).unwrap();
        let oracle: BTreeSet<Policy> =
            oracle_undominated_policies(&m, EnumerationBound::default()).unwrap().into_iter().collect();
        assert!(oracle.iter().any(|p| p.get(n, 1) == Some(c)));
        assert_eq!(sol.policies.into_iter().collect::<BTreeSet<_>>(), oracle);
    }

    #[test]
    fn convergence_relation() {
        let cons = vec![Consideration::<f64>::new("u", ConsiderationKind::Utility)];
        let table = |x: f64| BTreeMap::from([((StateId(0), 0), vec![WorthVector(vec![Worth::Real(x)])])]);
        assert!(converged(&table(1.0), &table(1.0), &cons));
        assert!(!converged(&table(1.0), &table(1.0 + 2e-6), &cons));
        assert!(converged(&table(1.0), &table(1.0 + 5e-7), &cons));
        assert!(!converged(&table(1.0), &BTreeMap::new(), &cons));
    }
}
