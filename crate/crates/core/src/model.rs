//! Points, box bounds, the problem interface, and evaluation accounting.

use std::ops::Deref;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::descent::Jacobian;
use crate::error::{Error, Result};

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{what} must have at least one entry")));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "{what} has a non-finite entry at index {i}"
        )));
    }
    Ok(())
}

/// A point in decision space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionVector(Vec<f64>);

impl DecisionVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_finite(&coords, "decision vector")?;
        Ok(Self(coords))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Builds a vector without the finiteness check. Callers guarantee finite input.
    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl Deref for DecisionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for DecisionVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A point in objective space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "objective vector")?;
        Ok(Self(values))
    }

    /// For values produced by closed-form formulas on finite input.
    pub(crate) fn from_values(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ObjectiveVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ObjectiveVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Axis-aligned box `[lower, upper]` in decision space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid(format!(
                "bounds need equal non-zero lengths, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "bound {i} is not a proper interval: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lower, upper]` on every one of `n` coordinates.
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// A multi-objective minimization problem `f: R^n -> R^m` over a box.
///
/// `evaluate` must be deterministic. Code that needs evaluation accounting
/// goes through [`EvaluationBudget::evaluate`] instead of calling it directly.
pub trait Problem: Send + Sync {
    fn name(&self) -> String;

    fn n_var(&self) -> usize;

    fn n_obj(&self) -> usize;

    fn bounds(&self) -> &BoxBounds;

    fn evaluate(&self, x: &[f64]) -> Result<ObjectiveVector>;

    /// Exact Jacobian, when the problem can supply one.
    fn analytic_jacobian(&self, _x: &[f64]) -> Option<Jacobian> {
        None
    }
}

impl<P: Problem + ?Sized> Problem for &P {
    fn name(&self) -> String {
        (**self).name()
    }
    fn n_var(&self) -> usize {
        (**self).n_var()
    }
    fn n_obj(&self) -> usize {
        (**self).n_obj()
    }
    fn bounds(&self) -> &BoxBounds {
        (**self).bounds()
    }
    fn evaluate(&self, x: &[f64]) -> Result<ObjectiveVector> {
        (**self).evaluate(x)
    }
    fn analytic_jacobian(&self, x: &[f64]) -> Option<Jacobian> {
        (**self).analytic_jacobian(x)
    }
}

impl<P: Problem + ?Sized> Problem for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn n_var(&self) -> usize {
        (**self).n_var()
    }
    fn n_obj(&self) -> usize {
        (**self).n_obj()
    }
    fn bounds(&self) -> &BoxBounds {
        (**self).bounds()
    }
    fn evaluate(&self, x: &[f64]) -> Result<ObjectiveVector> {
        (**self).evaluate(x)
    }
    fn analytic_jacobian(&self, x: &[f64]) -> Option<Jacobian> {
        (**self).analytic_jacobian(x)
    }
}

/// Counting gateway for objective evaluations.
///
/// All evaluations made by the optimizers pass through here. The counter is
/// atomic so concurrently running particles can share one budget.
#[derive(Debug)]
pub struct EvaluationBudget {
    limit: u64,
    used: AtomicU64,
}

impl EvaluationBudget {
    pub fn new(limit: u64) -> Self {
        Self {
            limit,
            used: AtomicU64::new(0),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(u64::MAX)
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.used()
    }

    /// Atomically reserves `count` evaluations, or reserves nothing and fails.
    pub(crate) fn reserve(&self, count: u64) -> Result<()> {
        let mut current = self.used.load(Ordering::SeqCst);
        loop {
            let remaining = self.limit - current;
            if count > remaining {
                return Err(Error::BudgetExceeded {
                    requested: count,
                    remaining,
                });
            }
            match self.used.compare_exchange(
                current,
                current + count,
                Ordering::SeqCst,
                Ordering::SeqCst,
            ) {
                Ok(_) => return Ok(()),
                Err(actual) => current = actual,
            }
        }
    }

    /// Returns reserved evaluations that were never performed.
    pub(crate) fn refund(&self, count: u64) {
        self.used.fetch_sub(count, Ordering::SeqCst);
    }

    /// Evaluates `problem` at `x`, charging exactly one evaluation.
    pub fn evaluate<P: Problem + ?Sized>(&self, problem: &P, x: &[f64]) -> Result<ObjectiveVector> {
        self.reserve(1)?;
        checked_evaluate(problem, x)
    }
}

/// Evaluates and rejects non-finite objective values. Does not touch any budget.
pub(crate) fn checked_evaluate<P: Problem + ?Sized>(problem: &P, x: &[f64]) -> Result<ObjectiveVector> {
    let f = problem.evaluate(x)?;
    if f.len() != problem.n_obj() {
        return Err(Error::Evaluation(format!(
            "{} returned {} objectives, expected {}",
            problem.name(),
            f.len(),
            problem.n_obj()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!(
            "{} produced a non-finite objective at {:?}",
            problem.name(),
            x
        )));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors_reject_non_finite_and_empty() {
        assert!(DecisionVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(DecisionVector::new(vec![]).is_err());
        assert!(ObjectiveVector::new(vec![f64::INFINITY]).is_err());
        assert!(ObjectiveVector::new(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn bounds_require_lower_below_upper() {
        assert!(BoxBounds::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(BoxBounds::new(vec![0.0], vec![1.0, 2.0]).is_err());
        let b = BoxBounds::uniform(2, 0.0, 1.0).unwrap();
        assert!(b.contains(&[0.0, 1.0]));
        assert!(!b.contains(&[0.0, 1.5]));
    }

    #[test]
    fn reserve_is_all_or_nothing() {
        let budget = EvaluationBudget::new(5);
        budget.reserve(3).unwrap();
        let err = budget.reserve(3).unwrap_err();
        assert!(matches!(
            err,
            Error::BudgetExceeded {
                requested: 3,
                remaining: 2
            }
        ));
        assert_eq!(budget.used(), 3);
        budget.reserve(2).unwrap();
        assert_eq!(budget.remaining(), 0);
    }

    #[test]
    fn concurrent_charges_are_counted_exactly() {
        use rayon::prelude::*;
        let budget = EvaluationBudget::new(10_000);
        (0..8_000).into_par_iter().for_each(|_| budget.reserve(1).unwrap());
        assert_eq!(budget.used(), 8_000);
        let failures = (0..4_000)
            .into_par_iter()
            .filter(|_| budget.reserve(1).is_err())
            .count();
        assert_eq!(failures, 2_000);
        assert_eq!(budget.used(), 10_000);
    }
}
