//! The `.domain` text format: a JSON document describing one problem, its
//! heuristic estimates and solver limits.
//!
//! Numbers are read from their literal text, so `0.1` is exactly one tenth
//! under `BigRational` and the nearest double under `f64`. Values that have
//! no finite decimal form may be given as strings such as `"1/3"`.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristic::{default_heuristic, Heuristic};
use crate::model::{validate, Consideration, Mmmdp, ModelBuilder, StateId, Violation};
use crate::scalar::{parse_rational, rational_to_decimal, Scalar};
use crate::solver::SolverConfig;
use crate::worth::{ConsiderationKind, Worth};

pub const SCHEMA_VERSION: u32 = 1;

/// Conventional file extension, without the dot.
pub const EXTENSION: &str = "domain";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("line {line}, column {column} at `{path}`: {message}")]
    Syntax { path: String, line: usize, column: usize, message: String },
    #[error("{field}: unknown {what} `{name}`")]
    UnknownName { field: String, what: &'static str, name: String },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("cannot serialize: {0}")]
    Unrepresentable(String),
}

impl DomainError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        DomainError::Field { field: field.into(), message: message.into() }
    }
}

/// A number kept as its literal text.
#[derive(Debug, Clone, PartialEq)]
struct Decimal(String);

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match serde_json::Number::from_str(&self.0) {
            Ok(n) => n.serialize(s),
            Err(_) => s.serialize_str(&self.0),
        }
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => Ok(Decimal(n.to_string())),
            serde_json::Value::String(s) => Ok(Decimal(s)),
            other => Err(de::Error::custom(format!("expected a number, found {other}"))),
        }
    }
}

/// A judgement or estimate: a boolean violation flag or a number.
#[derive(Debug, Clone, PartialEq)]
enum Value {
    Flag(bool),
    Num(Decimal),
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Flag(b) => s.serialize_bool(*b),
            Value::Num(d) => d.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Bool(b) => Ok(Value::Flag(b)),
            serde_json::Value::Number(n) => Ok(Value::Num(Decimal(n.to_string()))),
            serde_json::Value::String(s) => Ok(Value::Num(Decimal(s))),
            other => Err(de::Error::custom(format!("expected a number or boolean, found {other}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainFile {
    schema_version: u32,
    states: Vec<String>,
    actions: Vec<String>,
    initial: String,
    horizon: usize,
    transitions: Vec<TransitionRecord>,
    considerations: Vec<ConsiderationRecord>,
    #[serde(default)]
    theories: Vec<TheoryRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goals: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budget: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heuristics: Option<BTreeMap<String, Vec<EstimateRecord>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<SolverRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionRecord {
    from: String,
    action: String,
    to: String,
    prob: Decimal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsiderationRecord {
    name: String,
    kind: ConsiderationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default: Option<Value>,
    #[serde(default)]
    judgements: Vec<JudgementRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgementRecord {
    from: String,
    action: String,
    to: String,
    value: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TheoryRecord {
    name: String,
    consideration: String,
    rank: Decimal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateRecord {
    state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time: Option<usize>,
    value: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_policies: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vector_cap: Option<usize>,
}

/// Everything a `.domain` file describes.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T> {
    pub model: Mmmdp<T>,
    pub heuristic: Heuristic<T>,
    pub solver: SolverConfig,
}

/// Parses and validates a `.domain` document.
pub fn parse<T: Scalar>(text: &str) -> Result<Domain<T>, DomainError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: DomainFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        DomainError::Syntax {
            path,
            line: inner.line(),
            column: inner.column(),
            message: strip_position(inner.to_string()),
        }
    })?;
    build(file)
}

// serde_json appends the position, which is reported separately
fn strip_position(mut message: String) -> String {
    if let Some(i) = message.rfind(" at line ") {
        message.truncate(i);
    }
    message
}

/// Reads a `.domain` file from disk.
pub fn parse_file<T: Scalar>(path: &std::path::Path) -> Result<Domain<T>, DomainError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| DomainError::field(path.display().to_string(), e.to_string()))?;
    parse(&text)
}

fn number<T: Scalar>(field: &str, d: &Decimal) -> Result<T, DomainError> {
    T::parse_decimal(&d.0).ok_or_else(|| DomainError::field(field, format!("`{}` is not a finite number", d.0)))
}

fn worth<T: Scalar>(field: &str, kind: ConsiderationKind, v: &Value) -> Result<Worth<T>, DomainError> {
    match (kind.is_real(), v) {
        (true, Value::Num(d)) => Ok(Worth::Real(number(field, d)?)),
        (false, Value::Flag(b)) => Ok(Worth::Flag(*b)),
        (true, Value::Flag(_)) => Err(DomainError::field(field, format!("{kind:?} worth must be a number"))),
        (false, Value::Num(_)) => Err(DomainError::field(field, "absolute worth must be true or false")),
    }
}

/// Name → index, rejecting duplicates.
fn names(field: &str, list: &[String]) -> Result<BTreeMap<String, usize>, DomainError> {
    let mut out = BTreeMap::new();
    for (i, n) in list.iter().enumerate() {
        if out.insert(n.clone(), i).is_some() {
            return Err(DomainError::field(format!("{field}[{i}]"), format!("duplicate name `{n}`")));
        }
    }
    Ok(out)
}

fn lookup(map: &BTreeMap<String, usize>, field: String, what: &'static str, name: &str) -> Result<usize, DomainError> {
    map.get(name).copied().ok_or_else(|| DomainError::UnknownName { field, what, name: name.to_owned() })
}

fn build<T: Scalar>(file: DomainFile) -> Result<Domain<T>, DomainError> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(DomainError::field(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", file.schema_version),
        ));
    }
    let states = names("states", &file.states)?;
    let actions = names("actions", &file.actions)?;
    let con_names: Vec<String> = file.considerations.iter().map(|c| c.name.clone()).collect();
    let cons = names("considerations", &con_names)?;

    let mut b = ModelBuilder::<T>::new();
    for s in &file.states {
        b.state(s);
    }
    for a in &file.actions {
        b.action(a);
    }
    if file.states.is_empty() {
        return Err(DomainError::field("states", "at least one state is required"));
    }
    if file.actions.is_empty() {
        return Err(DomainError::field("actions", "at least one action is required"));
    }
    let state = |field: String, name: &str| lookup(&states, field, "state", name).map(StateId);
    let action = |field: String, name: &str| lookup(&actions, field, "action", name).map(crate::model::ActionId);

    b.initial(state("initial".into(), &file.initial)?).horizon(file.horizon);
    for (i, t) in file.transitions.iter().enumerate() {
        let f = format!("transitions[{i}]");
        let from = state(format!("{f}.from"), &t.from)?;
        let a = action(format!("{f}.action"), &t.action)?;
        let to = state(format!("{f}.to"), &t.to)?;
        b.transition(from, a, to, number(&format!("{f}.prob"), &t.prob)?);
    }

    let mut cost = None;
    for (i, c) in file.considerations.iter().enumerate() {
        let f = format!("considerations[{i}]");
        let mut con = Consideration::new(c.name.clone(), c.kind);
        if let Some(e) = &c.epsilon {
            con.epsilon = number(&format!("{f}.epsilon"), e)?;
        }
        if let Some(d) = &c.default {
            con.default_judgement = worth(&format!("{f}.default"), c.kind, d)?;
        }
        for (j, jr) in c.judgements.iter().enumerate() {
            let jf = format!("{f}.judgements[{j}]");
            let key = (
                state(format!("{jf}.from"), &jr.from)?,
                action(format!("{jf}.action"), &jr.action)?,
                state(format!("{jf}.to"), &jr.to)?,
            );
            let w = worth(&format!("{jf}.value"), c.kind, &jr.value)?;
            if con.judgements.insert(key, w).is_some() {
                return Err(DomainError::field(jf, "duplicate judgement"));
            }
        }
        if c.kind == ConsiderationKind::Cost && cost.is_none() {
            cost = Some(i);
        }
        b.consideration(con);
    }

    for (i, t) in file.theories.iter().enumerate() {
        let f = format!("theories[{i}]");
        let c = lookup(&cons, format!("{f}.consideration"), "consideration", &t.consideration)?;
        let rank = parse_rational(t.rank.0.trim())
            .ok_or_else(|| DomainError::field(format!("{f}.rank"), format!("`{}` is not a number", t.rank.0)))?;
        b.theory(&t.name, c, rank);
    }

    match (&file.goals, &file.budget) {
        (Some(goals), Some(budget)) => {
            let mut set = BTreeSet::new();
            for (i, g) in goals.iter().enumerate() {
                if !set.insert(state(format!("goals[{i}]"), g)?) {
                    return Err(DomainError::field(format!("goals[{i}]"), format!("duplicate goal `{g}`")));
                }
            }
            let cost =
                cost.ok_or_else(|| DomainError::field("considerations", "goals require a cost consideration"))?;
            b.ssp(set, number("budget", budget)?, cost);
        }
        (None, None) => {}
        (Some(_), None) => return Err(DomainError::field("budget", "goals require a budget")),
        (None, Some(_)) => return Err(DomainError::field("goals", "a budget requires goals")),
    }

    let model = b.build().map_err(|e| DomainError::field("", e.to_string()))?;
    let violations = validate(&model);
    if !violations.is_empty() {
        return Err(DomainError::Invalid(violations));
    }

    let mut heuristic = default_heuristic(&model);
    for (name, entries) in file.heuristics.iter().flatten() {
        let f = format!("heuristics.{name}");
        let c = lookup(&cons, f.clone(), "consideration", name)?;
        let kind = model.consideration(c).kind;
        let table = &mut heuristic.per_consideration[c];
        for (i, e) in entries.iter().enumerate() {
            let ef = format!("{f}[{i}]");
            let s = state(format!("{ef}.state"), &e.state)?;
            let w = worth(&format!("{ef}.value"), kind, &e.value)?;
            let fresh = match e.time {
                Some(t) if t >= model.horizon() => {
                    return Err(DomainError::field(format!("{ef}.time"), "time must be below the horizon"))
                }
                Some(t) => table.timed.insert((s, t), w).is_none(),
                None => table.untimed.insert(s, w).is_none(),
            };
            if !fresh {
                return Err(DomainError::field(ef, "duplicate estimate"));
            }
        }
    }

    let mut solver = SolverConfig::default();
    if let Some(s) = &file.solver {
        if let Some(v) = s.max_policies {
            solver.max_policies = v;
        }
        if let Some(v) = s.vector_cap {
            solver.vector_cap = v;
        }
    }
    Ok(Domain { model, heuristic, solver })
}

fn decimal<T: Scalar>(v: &T) -> Decimal {
    Decimal(v.to_decimal())
}

fn value<T: Scalar>(w: &Worth<T>) -> Value {
    match w {
        Worth::Real(v) => Value::Num(decimal(v)),
        Worth::Flag(b) => Value::Flag(*b),
    }
}

/// Text that [`parse`] maps back to an identical model and heuristic.
pub fn serialize<T: Scalar>(model: &Mmmdp<T>, heuristic: &Heuristic<T>) -> Result<String, DomainError> {
    serialize_with(model, heuristic, None)
}

/// As [`serialize`], also recording solver limits.
pub fn serialize_with<T: Scalar>(
    model: &Mmmdp<T>,
    heuristic: &Heuristic<T>,
    solver: Option<&SolverConfig>,
) -> Result<String, DomainError> {
    let sn = |s: StateId| model.state_name(s).to_owned();
    let an = |a: crate::model::ActionId| model.action_name(a).to_owned();
    if heuristic.len() != model.considerations().len() {
        return Err(DomainError::Unrepresentable(format!(
            "heuristic has {} tables for {} considerations",
            heuristic.len(),
            model.considerations().len()
        )));
    }
    let default_epsilon = T::constant(Consideration::<T>::DEFAULT_EPSILON);

    let considerations = model
        .considerations()
        .iter()
        .map(|c| ConsiderationRecord {
            name: c.name.clone(),
            kind: c.kind,
            epsilon: (c.epsilon != default_epsilon).then(|| decimal(&c.epsilon)),
            default: (c.default_judgement != c.identity()).then(|| value(&c.default_judgement)),
            judgements: c
                .judgements
                .iter()
                .map(|(&(from, a, to), w)| JudgementRecord {
                    from: sn(from),
                    action: an(a),
                    to: sn(to),
                    value: value(w),
                })
                .collect(),
        })
        .collect();

    let mut heuristics = BTreeMap::new();
    for (c, table) in heuristic.per_consideration.iter().enumerate() {
        let con = model.consideration(c);
        if table.default != con.identity() {
            return Err(DomainError::Unrepresentable(format!(
                "heuristic default for `{}` differs from the identity worth",
                con.name
            )));
        }
        let mut entries: Vec<EstimateRecord> =
            table.untimed.iter().map(|(&s, w)| EstimateRecord { state: sn(s), time: None, value: value(w) }).collect();
        entries.extend(table.timed.iter().map(|(&(s, t), w)| EstimateRecord {
            state: sn(s),
            time: Some(t),
            value: value(w),
        }));
        if !entries.is_empty() && heuristics.insert(con.name.clone(), entries).is_some() {
            return Err(DomainError::Unrepresentable(format!("two considerations named `{}`", con.name)));
        }
    }

    let file = DomainFile {
        schema_version: SCHEMA_VERSION,
        states: model.states().to_vec(),
        actions: model.actions().to_vec(),
        initial: sn(model.initial()),
        horizon: model.horizon(),
        transitions: model
            .transitions()
            .iter()
            .map(|t| TransitionRecord { from: sn(t.from), action: an(t.action), to: sn(t.to), prob: decimal(&t.prob) })
            .collect(),
        considerations,
        theories: model
            .theories()
            .iter()
            .map(|t| TheoryRecord {
                name: t.name.clone(),
                consideration: model.consideration(t.consideration).name.clone(),
                rank: Decimal(rational_to_decimal(&t.rank)),
            })
            .collect(),
        goals: model.ssp().map(|s| s.goals.iter().map(|&g| sn(g)).collect()),
        budget: model.ssp().map(|s| decimal(&s.budget)),
        heuristics: (!heuristics.is_empty()).then_some(heuristics),
        solver: solver.map(|s| SolverRecord { max_policies: Some(s.max_policies), vector_cap: Some(s.vector_cap) }),
    };
    let value = serde_json::to_value(&file).map_err(|e| DomainError::Unrepresentable(e.to_string()))?;
    Ok(render(&value))
}

/// Writes any JSON value in the layout used for `.domain` files.
pub fn render(value: &serde_json::Value) -> String {
    let mut out = String::new();
    layout(value, 0, &mut out);
    out.push('\n');
    out
}

fn is_flat(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Array(items) => items.iter().all(|i| !i.is_array() && !i.is_object()),
        serde_json::Value::Object(map) => map.values().all(|i| !i.is_array() && !i.is_object()),
        _ => true,
    }
}

/// Indented JSON with flat records and scalar lists kept on one line.
fn layout(v: &serde_json::Value, indent: usize, out: &mut String) {
    use serde_json::Value as J;
    let pad = |n: usize| "  ".repeat(n);
    if is_flat(v) {
        match v {
            J::Object(map) if !map.is_empty() => {
                let fields: Vec<String> = map.iter().map(|(k, x)| format!("{}: {x}", J::String(k.clone()))).collect();
                out.push_str(&format!("{{{}}}", fields.join(", ")));
            }
            J::Array(items) if !items.is_empty() => {
                let items: Vec<String> = items.iter().map(|x| x.to_string()).collect();
                out.push_str(&format!("[{}]", items.join(", ")));
            }
            _ => out.push_str(&v.to_string()),
        }
        return;
    }
    match v {
        J::Object(map) => {
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                out.push_str(&format!("{}{}: ", pad(indent + 1), J::String(k.clone())));
                layout(x, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&format!("{}}}", pad(indent)));
        }
        J::Array(items) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                layout(x, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&format!("{}]", pad(indent)));
        }
        _ => out.push_str(&v.to_string()),
    }
}
