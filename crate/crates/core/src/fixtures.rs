//! Named problem instances shipped as `.domain` files.

use crate::heuristic::{default_heuristic, Heuristic};
use crate::insulin::{expanded_insulin, lost_insulin, ExpandedConfig, ExpandedTheory, SmallConfig, SmallTheories};
use crate::model::Mmmdp;

pub struct Fixture {
    pub name: &'static str,
    pub model: Mmmdp<f64>,
    pub heuristic: Heuristic<f64>,
}

fn small(name: &'static str, theories: SmallTheories) -> Fixture {
    let model = lost_insulin(SmallConfig { theories });
    let heuristic = default_heuristic(&model);
    Fixture { name, model, heuristic }
}

fn expanded(name: &'static str, theories: &[(ExpandedTheory, i64)], budgeted: bool) -> Fixture {
    let (model, heuristic) = expanded_insulin(&ExpandedConfig::new(theories.to_vec(), budgeted));
    Fixture { name, model, heuristic }
}

/// Every fixture, in file-name order of generation.
pub fn all_fixtures() -> Vec<Fixture> {
    use ExpandedTheory::*;
    vec![
        small("insulin_small", SmallTheories::UtilityTheoryOnly),
        small("insulin_small_utility_only", SmallTheories::UtilityOnly),
        small("insulin_small_equal", SmallTheories::EqualRanks),
        small("insulin_small_utility_first", SmallTheories::UtilityFirst),
        expanded("insulin_expanded", &[(Egoism, 0), (Altruism, 0)], true),
        expanded("insulin_expanded_carla_first_budget", &[(Egoism, 1), (Altruism, 0)], true),
        expanded("insulin_expanded_equal", &[(Egoism, 0), (Altruism, 0)], false),
        expanded("insulin_expanded_hal_first", &[(Egoism, 0), (Altruism, 1)], false),
        expanded("insulin_expanded_carla_first", &[(Egoism, 1), (Altruism, 0)], false),
        expanded("insulin_expanded_law", &[(Egoism, 0), (Altruism, 0), (NoStealing, 0)], false),
        expanded("insulin_expanded_compensation", &[(Egoism, 0), (Altruism, 0), (Compensation, 0)], false),
        expanded(
            "insulin_expanded_law_compensation",
            &[(Egoism, 0), (Altruism, 0), (NoStealing, 0), (Compensation, 0)],
            false,
        ),
    ]
}

/// One fixture by name.
pub fn fixture(name: &str) -> Option<Fixture> {
    all_fixtures().into_iter().find(|f| f.name == name)
}
