//! Moral worth values and their per-kind algebra.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// One element of a consideration's worth space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Worth<T> {
    Real(T),
    /// `true` means the consideration is violated.
    Flag(bool),
}

impl<T: Scalar> Worth<T> {
    pub fn as_real(&self) -> Option<&T> {
        match self {
            Worth::Real(v) => Some(v),
            Worth::Flag(_) => None,
        }
    }

    pub fn as_flag(&self) -> Option<bool> {
        match self {
            Worth::Flag(v) => Some(*v),
            Worth::Real(_) => None,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            Worth::Real(_) => "real",
            Worth::Flag(_) => "flag",
        }
    }
}

impl<T: Scalar> fmt::Display for Worth<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Worth::Real(v) => write!(f, "{}", v.to_decimal()),
            Worth::Flag(true) => write!(f, "T"),
            Worth::Flag(false) => write!(f, "F"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorthError {
    #[error("expected {expected} worth, found {found}")]
    TagMismatch { expected: &'static str, found: &'static str },
    #[error("aggregation inputs have different lengths ({baseline}, {successors}, {probs})")]
    LengthMismatch { baseline: usize, successors: usize, probs: usize },
    #[error("non-finite value in aggregation input")]
    NonFinite,
    #[error("probability outside [0, 1]")]
    ProbabilityRange,
    #[error("worth vectors have lengths {left} and {right}, expected {expected}")]
    VectorLength { left: usize, right: usize, expected: usize },
}

/// The built-in consideration kinds.
///
/// `Utility` and `Cost` aggregate expected sums and differ only in the
/// preference direction. `Absolute` tracks whether any positive-probability
/// branch violates a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsiderationKind {
    Utility,
    Absolute,
    Cost,
}

impl ConsiderationKind {
    pub fn is_real(self) -> bool {
        !matches!(self, ConsiderationKind::Absolute)
    }

    /// The null worth that leaves aggregation unchanged: `Real(0)` or `Flag(false)`.
    pub fn identity<T: Scalar>(self) -> Worth<T> {
        match self {
            ConsiderationKind::Absolute => Worth::Flag(false),
            _ => Worth::Real(T::zero()),
        }
    }

    pub fn check_tag<T: Scalar>(self, w: &Worth<T>) -> Result<(), WorthError> {
        let expected = if self.is_real() { "real" } else { "flag" };
        if w.tag() == expected {
            if let Worth::Real(v) = w {
                if !v.is_finite_value() {
                    return Err(WorthError::NonFinite);
                }
            }
            Ok(())
        } else {
            Err(WorthError::TagMismatch { expected, found: w.tag() })
        }
    }

    /// `Greater` when `a` is strictly preferred to `b`.
    pub fn compare<T: Scalar>(self, a: &Worth<T>, b: &Worth<T>) -> Result<Ordering, WorthError> {
        self.check_tag(a)?;
        self.check_tag(b)?;
        Ok(match (self, a, b) {
            (ConsiderationKind::Utility, Worth::Real(x), Worth::Real(y)) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
            (ConsiderationKind::Cost, Worth::Real(x), Worth::Real(y)) => y.partial_cmp(x).unwrap_or(Ordering::Equal),
            // not violated is preferred to violated
            (ConsiderationKind::Absolute, Worth::Flag(x), Worth::Flag(y)) => y.cmp(x),
            _ => unreachable!("tags checked above"),
        })
    }

    pub fn prefers<T: Scalar>(self, a: &Worth<T>, b: &Worth<T>) -> Result<bool, WorthError> {
        Ok(self.compare(a, b)? == Ordering::Greater)
    }

    /// Aggregates index-aligned successor judgements with baseline worth.
    ///
    /// Real kinds: `Σ pᵢ·(judgementᵢ + baselineᵢ)`.
    /// Absolute: `⋁ pᵢ > 0 ∧ (judgementᵢ ∨ baselineᵢ)`.
    pub fn aggregate<T: Scalar>(
        self,
        baseline: &[Worth<T>],
        judgements: &[Worth<T>],
        probs: &[T],
    ) -> Result<Worth<T>, WorthError> {
        if baseline.len() != judgements.len() || judgements.len() != probs.len() {
            return Err(WorthError::LengthMismatch {
                baseline: baseline.len(),
                successors: judgements.len(),
                probs: probs.len(),
            });
        }
        let mut acc = Aggregator::new(self);
        for ((b, j), p) in baseline.iter().zip(judgements).zip(probs) {
            acc.push(p, j, b)?;
        }
        Ok(acc.finish())
    }
}

/// Streaming form of [`ConsiderationKind::aggregate`].
///
/// Every evaluation path in the crate goes through this so that solver,
/// evaluator and history folds perform identical arithmetic.
#[derive(Debug, Clone)]
pub struct Aggregator<T> {
    kind: ConsiderationKind,
    sum: T,
    flag: bool,
}

impl<T: Scalar> Aggregator<T> {
    pub fn new(kind: ConsiderationKind) -> Self {
        Aggregator { kind, sum: T::zero(), flag: false }
    }

    pub fn push(&mut self, prob: &T, judgement: &Worth<T>, baseline: &Worth<T>) -> Result<(), WorthError> {
        if !prob.is_finite_value() {
            return Err(WorthError::NonFinite);
        }
        if *prob < T::zero() || *prob > T::one() {
            return Err(WorthError::ProbabilityRange);
        }
        self.kind.check_tag(judgement)?;
        self.kind.check_tag(baseline)?;
        // zero-probability branches contribute nothing under either algebra
        if prob.is_zero() {
            return Ok(());
        }
        match (judgement, baseline) {
            (Worth::Real(j), Worth::Real(b)) => {
                let term = prob.clone() * (j.clone() + b.clone());
                self.sum = self.sum.clone() + term;
            }
            (Worth::Flag(j), Worth::Flag(b)) => self.flag |= *j || *b,
            _ => unreachable!("tags checked above"),
        }
        Ok(())
    }

    pub fn finish(self) -> Worth<T> {
        if self.kind.is_real() {
            Worth::Real(self.sum)
        } else {
            Worth::Flag(self.flag)
        }
    }
}

/// One worth per consideration, in consideration order.
#[derive(Debug, Clone, PartialEq)]
pub struct WorthVector<T>(pub Vec<Worth<T>>);

impl<T: Scalar> WorthVector<T> {
    pub fn identity(kinds: &[ConsiderationKind]) -> Self {
        WorthVector(kinds.iter().map(|k| k.identity()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> &Worth<T> {
        &self.0[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Worth<T>> {
        self.0.iter()
    }
}

impl<T: Scalar> fmt::Display for WorthVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, ")")
    }
}

/// Pareto dominance under per-consideration preference directions.
///
/// Lexicographic theory ranks play no part here.
pub fn pareto_dominates<T: Scalar>(
    a: &WorthVector<T>,
    b: &WorthVector<T>,
    kinds: &[ConsiderationKind],
) -> Result<bool, WorthError> {
    if a.len() != kinds.len() || b.len() != kinds.len() {
        return Err(WorthError::VectorLength { left: a.len(), right: b.len(), expected: kinds.len() });
    }
    let mut strict = false;
    for ((x, y), kind) in a.iter().zip(b.iter()).zip(kinds) {
        match kind.compare(x, y)? {
            Ordering::Less => return Ok(false),
            Ordering::Greater => strict = true,
            Ordering::Equal => {}
        }
    }
    Ok(strict)
}

/// Removes every vector dominated by another member and collapses duplicates.
///
/// First occurrences are kept, so the output order follows the input order.
pub fn pprune<T: Scalar>(
    vectors: &[WorthVector<T>],
    kinds: &[ConsiderationKind],
) -> Result<Vec<WorthVector<T>>, WorthError> {
    let mut kept: Vec<WorthVector<T>> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        if kept.contains(v) {
            continue;
        }
        let mut dominated = false;
        for (j, other) in vectors.iter().enumerate() {
            if i != j && pareto_dominates(other, v, kinds)? {
                dominated = true;
                break;
            }
        }
        if !dominated {
            kept.push(v.clone());
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConsiderationKind::*;

    fn r(v: f64) -> Worth<f64> {
        Worth::Real(v)
    }

    #[test]
    fn utility_expected_value_of_stealing() {
        let out =
            Utility.aggregate(&[r(0.0); 4], &[r(0.0), r(-10.0), r(-10.0), r(-20.0)], &[0.6, 0.15, 0.15, 0.1]).unwrap();
        assert!((out.as_real().copied().unwrap() - -5.0).abs() < 1e-12);
        let id = Utility.aggregate(&[r(0.0)], &[r(0.0)], &[1.0]).unwrap();
        assert_eq!(id, r(0.0));
    }

    #[test]
    fn absolute_any_positive_probability() {
        let f = |b| Worth::<f64>::Flag(b);
        assert_eq!(Absolute.aggregate(&[f(false), f(false)], &[f(true), f(false)], &[0.6, 0.4]).unwrap(), f(true));
        assert_eq!(Absolute.aggregate(&[f(false)], &[f(true)], &[0.0]).unwrap(), f(false));
        // baseline violations are also gated by probability
        assert_eq!(Absolute.aggregate(&[f(true)], &[f(false)], &[0.0]).unwrap(), f(false));
        assert_eq!(Absolute.aggregate(&[f(true)], &[f(false)], &[0.5]).unwrap(), f(true));
    }

    #[test]
    fn aggregation_errors() {
        assert!(matches!(
            Utility.aggregate(&[r(0.0)], &[r(0.0), r(1.0)], &[1.0]),
            Err(WorthError::LengthMismatch { .. })
        ));
        assert!(matches!(
            Utility.aggregate(&[Worth::Flag(false)], &[r(0.0)], &[1.0]),
            Err(WorthError::TagMismatch { .. })
        ));
        assert_eq!(Utility.aggregate(&[r(0.0)], &[r(f64::NAN)], &[1.0]), Err(WorthError::NonFinite));
        assert_eq!(Utility.aggregate(&[r(0.0)], &[r(1.0)], &[1.5]), Err(WorthError::ProbabilityRange));
    }

    #[test]
    fn preference_directions() {
        assert!(Utility.prefers(&r(1.0), &r(0.0)).unwrap());
        assert!(Cost.prefers(&r(0.0), &r(1.0)).unwrap());
        assert!(Absolute.prefers::<f64>(&Worth::Flag(false), &Worth::Flag(true)).unwrap());
        assert!(!Absolute.prefers::<f64>(&Worth::Flag(true), &Worth::Flag(true)).unwrap());
    }

    #[test]
    fn dominance_examples() {
        let kinds = [Utility, Absolute];
        let v = |u: f64, b: bool| WorthVector(vec![r(u), Worth::Flag(b)]);
        assert!(pareto_dominates(&v(-5.0, true), &v(-8.4, true), &kinds).unwrap());
        assert!(!pareto_dominates(&v(-5.0, true), &v(-5.0, true), &kinds).unwrap());
        assert!(!pareto_dominates(&v(-5.0, true), &v(-8.4, false), &kinds).unwrap());
        assert!(pareto_dominates(&v(-5.0, true), &WorthVector(vec![r(0.0)]), &kinds).is_err());
    }

    #[test]
    fn pprune_examples() {
        let single = [Utility];
        let u = |x: f64| WorthVector(vec![r(x)]);
        assert_eq!(pprune(&[u(-5.0), u(-8.4)], &single).unwrap(), vec![u(-5.0)]);
        assert_eq!(pprune(&[u(1.0), u(1.0), u(1.0)], &single).unwrap(), vec![u(1.0)]);
        let kinds = [Utility, Absolute];
        let v = |x: f64, b: bool| WorthVector(vec![r(x), Worth::Flag(b)]);
        assert_eq!(pprune(&[v(-5.0, true), v(-8.4, false)], &kinds).unwrap().len(), 2);
    }
}
