//! Seeded random instances small enough for the oracle.

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::consideration_optimal;
use crate::heuristic::{default_heuristic, ConsiderationHeuristic, Heuristic};
use crate::model::{Consideration, Mmmdp, ModelBuilder, StateId};
use crate::scalar::Scalar;
use crate::worth::{ConsiderationKind, Worth};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_horizon: usize,
    pub max_considerations: usize,
    pub max_theories: usize,
    /// Add an absorbing goal, a cost consideration and a budget.
    pub budgeted: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_states: 4,
            max_actions: 3,
            max_horizon: 3,
            max_considerations: 3,
            max_theories: 3,
            budgeted: false,
        }
    }
}

/// Splits ten tenths into `parts` positive pieces.
fn tenths(rng: &mut ChaCha8Rng, parts: usize) -> Vec<u32> {
    let mut cuts: Vec<u32> = (1..10).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<u32> = cuts.into_iter().take(parts - 1).collect();
    cuts.sort();
    let mut out = Vec::with_capacity(parts);
    let mut last = 0;
    for c in cuts {
        out.push(c - last);
        last = c;
    }
    out.push(10 - last);
    out
}

fn prob_text(k: u32) -> String {
    if k == 10 {
        "1".into()
    } else {
        format!("0.{k}")
    }
}

/// A valid model and an admissible heuristic for it.
pub fn random_instance<T: Scalar>(seed: u64, config: GeneratorConfig) -> (Mmmdp<T>, Heuristic<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // the goal counts towards the state limit
    let ns = rng.gen_range(1..=config.max_states.saturating_sub(usize::from(config.budgeted)).max(1));
    let na = rng.gen_range(1..=config.max_actions);
    let h = rng.gen_range(1..=config.max_horizon);
    let nc = rng.gen_range(1..=config.max_considerations);
    let nt = rng.gen_range(1..=config.max_theories);

    let mut b = ModelBuilder::<T>::new();
    let states: Vec<StateId> = (0..ns).map(|i| b.state(&format!("s{i}"))).collect();
    let goal = config.budgeted.then(|| b.state("goal"));
    let actions: Vec<_> = (0..na).map(|i| b.action(&format!("a{i}"))).collect();
    b.initial(states[0]).horizon(h);

    let mut kinds = Vec::new();
    for i in 0..nc {
        let kind = if rng.gen_bool(0.5) { ConsiderationKind::Utility } else { ConsiderationKind::Absolute };
        kinds.push((b.consideration(Consideration::new(format!("c{i}"), kind)), kind));
    }
    let cost = config.budgeted.then(|| {
        let mut c = Consideration::new("cost", ConsiderationKind::Cost);
        c.default_judgement = Worth::Real(T::one());
        b.consideration(c)
    });

    let mut targets = states.clone();
    targets.extend(goal);
    let mut edges = Vec::new();
    for &s in &states {
        let mut applicable: Vec<_> = actions.iter().copied().filter(|_| rng.gen_bool(0.8)).collect();
        if applicable.is_empty() {
            applicable.push(*actions.choose(&mut rng).expect("at least one action"));
        }
        for a in applicable {
            let k = rng.gen_range(1..=3.min(targets.len()));
            let succ: Vec<StateId> = targets.choose_multiple(&mut rng, k).copied().collect();
            for (to, p) in succ.iter().zip(tenths(&mut rng, k)) {
                b.transition(s, a, *to, T::constant(&prob_text(p)));
                edges.push((s, a, *to));
            }
            // occasionally a listed but impossible outcome
            if rng.gen_bool(0.1) {
                if let Some(&to) = targets.iter().find(|t| !succ.contains(t)) {
                    b.transition(s, a, to, T::zero());
                    edges.push((s, a, to));
                }
            }
        }
    }
    if let Some(g) = goal {
        b.transition(g, actions[0], g, T::one());
        if let Some(c) = cost {
            b.judge(c, g, actions[0], g, Worth::Real(T::zero()));
            for &(s, a, to) in &edges {
                let v = rng.gen_range(1..=3);
                b.judge(c, s, a, to, Worth::Real(T::from_i32(v).expect("small int")));
            }
        }
    }

    for &(s, a, to) in &edges {
        for &(c, kind) in &kinds {
            if rng.gen_bool(0.5) {
                continue;
            }
            let w = match kind {
                ConsiderationKind::Absolute => Worth::Flag(rng.gen_bool(0.4)),
                _ => Worth::Real(T::from_i32(rng.gen_range(-3..=3)).expect("small int")),
            };
            b.judge(c, s, a, to, w);
        }
    }

    for i in 0..nt {
        let c = kinds[rng.gen_range(0..kinds.len())].0;
        let rank = BigRational::from_integer(rng.gen_range(0..=2).into());
        b.theory(&format!("m{i}"), c, rank);
    }
    if let (Some(g), Some(c)) = (goal, cost) {
        let budget = T::from_i32(rng.gen_range(1..=3 * h as i32)).expect("small int");
        b.ssp([g].into_iter().collect(), budget, c);
    }

    let model = b.build().expect("generated indices are valid");
    let heuristic = random_heuristic(&model, &mut rng);
    (model, heuristic)
}

/// Per consideration: either the exact optimum or a loose optimistic bound.
fn random_heuristic<T: Scalar>(model: &Mmmdp<T>, rng: &mut ChaCha8Rng) -> Heuristic<T> {
    let mut heuristic = default_heuristic(model);
    let h = model.horizon();
    for (c, con) in model.considerations().iter().enumerate() {
        let table = &mut heuristic.per_consideration[c];
        if rng.gen_bool(0.5) {
            let opt = consideration_optimal(model, c).expect("valid model");
            let mut exact = ConsiderationHeuristic::constant(con.identity());
            for t in 0..h {
                for s in model.state_ids() {
                    exact.timed.insert((s, t), opt.at(t, s).clone());
                }
            }
            *table = exact;
        } else if con.kind == ConsiderationKind::Utility {
            let best = model
                .transitions()
                .iter()
                .filter_map(|tr| con.judgement(tr.from, tr.action, tr.to).as_real().cloned())
                .fold(T::zero(), |acc, v| if v > acc { v } else { acc });
            for t in 0..h {
                for s in model.state_ids() {
                    let steps = T::from_usize(h - t).expect("small int");
                    table.timed.insert((s, t), Worth::Real(steps * best.clone()));
                }
            }
        }
        // absolute: ⊥ and cost: 0 are already optimistic
    }
    heuristic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn generated_models_are_valid() {
        for seed in 0..200 {
            for budgeted in [false, true] {
                let (m, h) = random_instance::<f64>(seed, GeneratorConfig { budgeted, ..Default::default() });
                assert!(validate(&m).is_empty(), "seed {seed}: {:?}", validate(&m));
                assert_eq!(h.len(), m.considerations().len());
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = random_instance::<f64>(7, GeneratorConfig::default());
        let b = random_instance::<f64>(7, GeneratorConfig::default());
        assert_eq!(a, b);
    }
}
