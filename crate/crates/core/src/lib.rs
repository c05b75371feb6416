//! Planning under moral uncertainty.
//!
//! Problems are finite-horizon MDPs whose reward is replaced by typed moral
//! considerations owned by ranked moral theories. [`solver::mplan`] finds the
//! Pareto-undominated non-stationary policies and [`retrospection::select`]
//! picks among them by hypothetical retrospection.

pub mod domain_io;
pub mod eval;
pub mod fixtures;
pub mod generate;
pub mod heuristic;
pub mod insulin;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod retrospection;
pub mod scalar;
pub mod solver;
pub mod worth;

pub use num_rational::BigRational;

pub use eval::{consideration_optimal, policy_worth, q_state_action, q_with_outcome, NonStationaryWorth, WorthMatrix};
pub use heuristic::{default_heuristic, Heuristic};
pub use model::{validate, ActionId, Consideration, Mmmdp, ModelBuilder, StateId, Theory, Violation};
pub use policy::Policy;
pub use scalar::Scalar;
pub use worth::{pareto_dominates, pprune, ConsiderationKind, Worth, WorthVector};

/// Floating-point scalar.
pub type Real = f64;
/// Exact rational scalar.
pub type Exact = BigRational;

pub type RealModel = Mmmdp<Real>;
pub type ExactModel = Mmmdp<Exact>;
pub type RealWorth = Worth<Real>;
pub type RealWorthVector = WorthVector<Real>;
pub type RealHeuristic = Heuristic<Real>;
