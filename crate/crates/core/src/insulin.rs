//! The Lost Insulin dilemma: Hal, a diabetic, has lost his insulin and can
//! either wait or take Carla's.

use num_rational::BigRational;

use crate::model::{Consideration, Mmmdp, ModelBuilder};
use crate::policy::Policy;
use crate::scalar::Scalar;
use crate::worth::{ConsiderationKind, Worth};

/// Which considerations and theories the two-step model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmallTheories {
    /// Utility consideration only, with one utilitarian theory.
    UtilityOnly,
    /// Utility and no-stealing considerations, only the utilitarian theory.
    #[default]
    UtilityTheoryOnly,
    /// Both considerations, both theories at rank 0.
    EqualRanks,
    /// Both theories, utilitarianism strictly first.
    UtilityFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SmallConfig {
    pub theories: SmallTheories,
}

fn rank(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// States `s0`..`s5`, actions `wait` and `steal`, `H = 2`.
///
/// `s0` Hal has no insulin, `s1` Hal dies waiting, `s2` both live,
/// `s3` Hal dies, `s4` Carla dies, `s5` both die. `s1`..`s5` absorb under `wait`.
pub fn lost_insulin<T: Scalar>(config: SmallConfig) -> Mmmdp<T> {
    let n = |x: &str| T::constant(x);
    let mut b = ModelBuilder::new();
    let s: Vec<_> = (0..6).map(|i| b.state(&format!("s{i}"))).collect();
    let wait = b.action("wait");
    let steal = b.action("steal");
    b.initial(s[0]).horizon(2);
    b.transition(s[0], wait, s[0], n("0.4")).transition(s[0], wait, s[1], n("0.6"));
    b.transition(s[0], steal, s[2], n("0.6"))
        .transition(s[0], steal, s[3], n("0.15"))
        .transition(s[0], steal, s[4], n("0.15"))
        .transition(s[0], steal, s[5], n("0.1"));
    for &x in &s[1..] {
        b.transition(x, wait, x, T::one());
    }

    let utility = b.consideration(Consideration::new("utility", ConsiderationKind::Utility));
    b.judge(utility, s[0], wait, s[1], Worth::Real(n("-10")));
    b.judge(utility, s[0], steal, s[3], Worth::Real(n("-10")));
    b.judge(utility, s[0], steal, s[4], Worth::Real(n("-10")));
    b.judge(utility, s[0], steal, s[5], Worth::Real(n("-20")));

    if config.theories != SmallTheories::UtilityOnly {
        let law = b.consideration(Consideration::new("no-stealing", ConsiderationKind::Absolute));
        for &x in &s[2..] {
            b.judge(law, s[0], steal, x, Worth::Flag(true));
        }
        match config.theories {
            SmallTheories::EqualRanks => {
                b.theory("utilitarianism", utility, rank(0));
                b.theory("law", law, rank(0));
            }
            SmallTheories::UtilityFirst => {
                b.theory("utilitarianism", utility, rank(0));
                b.theory("law", law, rank(1));
            }
            _ => {
                b.theory("utilitarianism", utility, rank(0));
            }
        }
    } else {
        b.theory("utilitarianism", utility, rank(0));
    }
    b.build().expect("fixture is well formed")
}

fn fill<T: Scalar>(model: &Mmmdp<T>, choose: impl Fn(usize, usize) -> &'static str) -> Policy {
    let mut p = Policy::new();
    for s in model.state_ids() {
        for t in 0..model.horizon() {
            let name = if s.0 == 0 { choose(s.0, t) } else { "wait" };
            p.set(s, t, model.action_id(name).unwrap());
        }
    }
    p.canonical(model).unwrap()
}

pub fn wait_policy<T: Scalar>(model: &Mmmdp<T>) -> Policy {
    fill(model, |_, _| "wait")
}

pub fn steal_policy<T: Scalar>(model: &Mmmdp<T>) -> Policy {
    fill(model, |_, _| "steal")
}

pub fn wait_then_steal_policy<T: Scalar>(model: &Mmmdp<T>) -> Policy {
    fill(model, |_, t| if t == 0 { "wait" } else { "steal" })
}

/// Theories available in the twenty-step model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExpandedTheory {
    /// Hal's wellbeing only.
    Egoism,
    /// Carla's wellbeing only.
    Altruism,
    /// Absolute: never steal.
    NoStealing,
    /// Absolute: stealing is allowed when the money left covers the insulin.
    Compensation,
}

impl ExpandedTheory {
    pub fn name(self) -> &'static str {
        match self {
            ExpandedTheory::Egoism => "egoism",
            ExpandedTheory::Altruism => "altruism",
            ExpandedTheory::NoStealing => "no-stealing",
            ExpandedTheory::Compensation => "compensation",
        }
    }

    fn consideration(self) -> (&'static str, ConsiderationKind) {
        match self {
            ExpandedTheory::Egoism => ("hal-wellbeing", ConsiderationKind::Utility),
            ExpandedTheory::Altruism => ("carla-wellbeing", ConsiderationKind::Utility),
            ExpandedTheory::NoStealing => ("theft", ConsiderationKind::Absolute),
            ExpandedTheory::Compensation => ("uncompensated-theft", ConsiderationKind::Absolute),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedConfig {
    /// Theories with their ranks; smaller ranks come first.
    pub theories: Vec<(ExpandedTheory, i64)>,
    /// Make states where Hal has insulin absorbing goals, with unit costs and
    /// a budget of 18.5.
    pub budgeted: bool,
    pub horizon: usize,
}

impl ExpandedConfig {
    pub fn new(theories: Vec<(ExpandedTheory, i64)>, budgeted: bool) -> Self {
        ExpandedConfig { theories, budgeted, horizon: EXPANDED_HORIZON }
    }
}

pub const EXPANDED_HORIZON: usize = 20;
pub const EXPANDED_BUDGET: &str = "18.5";

/// Dynamics of the twenty-step model.
pub mod expanded {
    /// Hal dies in any ten-minute step spent without insulin.
    pub const HAL_DEATH: &str = "0.6";
    /// Chance of being caught in a step away from home, given Hal survives it.
    pub const CAUGHT: &str = "0.2";
    pub const HIGH_COVER: &str = "0.7";
    pub const LOW_COVER: &str = "0.1";
    /// Carla dies in a step spent without her insulin.
    pub const CARLA_DEATH: &str = "0.1";
    /// Hal's disutility of being arrested, against -1 for dying.
    pub const ARREST: &str = "-0.05";
    pub const HAL_WAIT_ESTIMATE: &str = "-0.4";
    pub const CARLA_LOSS_ESTIMATE: &str = "-0.1";
}

/// The twenty-step model and its estimates.
///
/// Hal waits at home or walks to Carla's house. There he searches, choosing
/// how much money to leave, or walks back and waits. A search step that Hal
/// survives without being caught finds the insulin, which he then steals or
/// leaves before walking home. Every step without insulin carries Hal's
/// death risk, and every step away from home the risk of arrest, after
/// which he is held until the delivery. After a theft Carla is at risk in
/// the theft step and every step after it; in the budgeted variant only the
/// theft step counts, so that states where Hal has insulin can absorb.
pub fn expanded_insulin<T: Scalar>(config: &ExpandedConfig) -> (Mmmdp<T>, crate::heuristic::Heuristic<T>) {
    use crate::scalar::{parse_rational, rational_to_decimal};
    use expanded::*;

    let q = |x: &str| parse_rational(x).expect("constant");
    let zero = BigRational::from_integer(0.into());
    let one = BigRational::from_integer(1.into());
    let num = |r: &BigRational| T::constant(&rational_to_decimal(r));
    let real = |x: &str| Worth::Real(T::constant(x));

    let death = q(HAL_DEATH);
    let alive = &one - &death;
    let caught = &alive * q(CAUGHT);
    let free = &alive - &caught;
    let carla_risk = q(CARLA_DEATH);

    let levels = [("none", zero.clone()), ("low", q(LOW_COVER)), ("high", q(HIGH_COVER))];
    let mut b = ModelBuilder::<T>::new();
    let home = b.state("home");
    let arrested = b.state("arrested");
    let hal_dead = b.state("hal-dead");
    let walked_home = b.state("walked-home");
    let carla_house = b.state("carla-house");
    let found: Vec<_> = levels.iter().map(|(l, _)| b.state(&format!("found-leaving-{l}"))).collect();
    // (state, covered, carla dead)
    let mut saved = Vec::new();
    for covered in [true, false] {
        for dead in [false, true] {
            let c = if covered { "covered" } else { "uncovered" };
            let d = if dead { "-carla-dead" } else { "" };
            saved.push((b.state(&format!("saved-{c}{d}")), covered, dead));
        }
    }

    let wait = b.action("wait");
    let go = b.action("go-to-carla");
    let go_home = b.action("go-home");
    let search: Vec<_> = levels.iter().map(|(l, _)| b.action(&format!("search-leaving-{l}"))).collect();
    let steal = b.action("steal");
    b.initial(home).horizon(config.horizon);

    // (from, action) pairs that risk Hal's life, and which of them also risk arrest
    let mut risky = Vec::new();
    let mut away = |b: &mut ModelBuilder<T>, from, a, to| {
        b.transition(from, a, hal_dead, num(&death));
        b.transition(from, a, arrested, num(&caught));
        b.transition(from, a, to, num(&free));
        risky.push((from, a, true));
    };
    away(&mut b, home, go, carla_house);
    away(&mut b, carla_house, go_home, walked_home);
    for i in 0..levels.len() {
        away(&mut b, carla_house, search[i], found[i]);
        away(&mut b, found[i], go_home, walked_home);
    }
    for s in [home, arrested, walked_home] {
        b.transition(s, wait, hal_dead, num(&death)).transition(s, wait, s, num(&alive));
        risky.push((s, wait, false));
    }
    b.transition(hal_dead, wait, hal_dead, T::one());

    // (found state, target, covered, carla dies)
    let mut thefts = Vec::new();
    for (i, (_, cover)) in levels.iter().enumerate() {
        for &(to, covered, dead) in &saved {
            let mut p = if covered { cover.clone() } else { &one - cover };
            p *= if dead { carla_risk.clone() } else { &one - &carla_risk };
            if p != zero {
                b.transition(found[i], steal, to, num(&p));
                thefts.push((found[i], to, covered, dead));
            }
        }
    }
    // (Carla alive without insulin, the same after her death)
    let at_risk = [(saved[0].0, saved[1].0), (saved[2].0, saved[3].0)];
    for &(s, dead) in &at_risk {
        if config.budgeted {
            b.transition(s, wait, s, T::one());
        } else {
            b.transition(s, wait, dead, num(&carla_risk)).transition(s, wait, s, num(&(&one - &carla_risk)));
        }
        b.transition(dead, wait, dead, T::one());
    }

    let mut index: Vec<(ExpandedTheory, usize)> = Vec::new();
    for &(th, _) in &config.theories {
        if index.iter().any(|&(t, _)| t == th) {
            continue;
        }
        let (name, kind) = th.consideration();
        index.push((th, b.consideration(Consideration::new(name, kind))));
    }
    for &(th, c) in &index {
        match th {
            ExpandedTheory::Egoism => {
                for &(s, a, arrest) in &risky {
                    b.judge(c, s, a, hal_dead, real("-1"));
                    if arrest {
                        b.judge(c, s, a, arrested, real(ARREST));
                    }
                }
            }
            ExpandedTheory::Altruism => {
                for &(f, to, _, dead) in &thefts {
                    if dead {
                        b.judge(c, f, steal, to, real("-1"));
                    }
                }
                if !config.budgeted {
                    for &(s, dead) in &at_risk {
                        b.judge(c, s, wait, dead, real("-1"));
                    }
                }
            }
            ExpandedTheory::NoStealing => {
                for &(f, to, _, _) in &thefts {
                    b.judge(c, f, steal, to, Worth::Flag(true));
                }
            }
            ExpandedTheory::Compensation => {
                for &(f, to, covered, _) in &thefts {
                    if !covered {
                        b.judge(c, f, steal, to, Worth::Flag(true));
                    }
                }
            }
        }
    }
    for &(th, r) in &config.theories {
        let c = index.iter().find(|&&(t, _)| t == th).expect("registered").1;
        b.theory(th.name(), c, rank(r));
    }
    if config.budgeted {
        let mut cost = Consideration::new("time", ConsiderationKind::Cost);
        cost.default_judgement = Worth::Real(T::one());
        let c = b.consideration(cost);
        for &(g, _, _) in &saved {
            b.judge(c, g, wait, g, Worth::Real(T::zero()));
        }
        b.ssp(saved.iter().map(|&(g, _, _)| g).collect(), T::constant(EXPANDED_BUDGET), c);
    }

    let model = b.build().expect("fixture is well formed");
    let mut heuristic = crate::heuristic::default_heuristic(&model);
    for &(th, c) in &index {
        let table = &mut heuristic.per_consideration[c];
        match th {
            ExpandedTheory::Egoism => {
                for s in [home, arrested, walked_home] {
                    table.untimed.insert(s, Worth::Real(T::constant(HAL_WAIT_ESTIMATE)));
                }
            }
            ExpandedTheory::Altruism if !config.budgeted => {
                for &(s, _) in &at_risk {
                    table.untimed.insert(s, Worth::Real(T::constant(CARLA_LOSS_ESTIMATE)));
                }
            }
            _ => {}
        }
    }
    (model, heuristic)
}
