//! Pareto dominance and the external non-dominated archive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionVector, ObjectiveVector};
use crate::nsga2::crowding_distance;

/// `a` Pareto-dominates `b`: no worse in every objective and not identical.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "cannot compare objective vectors of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dominates_unchecked(a, b))
}

pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly_better = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly_better = true;
        }
    }
    strictly_better
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub x: DecisionVector,
    pub f: ObjectiveVector,
}

/// Mutually non-dominated `(x, f(x))` pairs, in insertion order.
///
/// Unbounded by default. With a capacity set, an insertion that overflows it
/// evicts the entry with the smallest crowding distance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
    capacity: Option<usize>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_limit(capacity: usize) -> Self {
        Self {
            entries: Vec::new(),
            capacity: Some(capacity.max(1)),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn objectives(&self) -> Vec<&[f64]> {
        self.entries.iter().map(|e| e.f.as_slice()).collect()
    }

    /// Offers `(x, f)` to the archive. Returns whether it was kept.
    ///
    /// A candidate dominated by, or equal to, an incumbent is discarded.
    /// Otherwise it is appended and every incumbent it dominates is removed.
    pub fn insert(&mut self, x: DecisionVector, f: ObjectiveVector) -> bool {
        let rejected = self
            .entries
            .iter()
            .any(|e| e.f == f || dominates_unchecked(&e.f, &f));
        if rejected {
            return false;
        }
        self.entries.retain(|e| !dominates_unchecked(&f, &e.f));
        self.entries.push(ArchiveEntry { x, f });
        if let Some(cap) = self.capacity {
            if self.entries.len() > cap {
                self.prune_most_crowded();
            }
        }
        true
    }

    fn prune_most_crowded(&mut self) {
        let front: Vec<&[f64]> = self.objectives();
        let crowding = crowding_distance(&front);
        let victim = crowding
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("archive is non-empty");
        self.entries.remove(victim);
    }

    /// Exhaustive pairwise check of the archive invariants.
    pub fn is_mutually_nondominated(&self) -> bool {
        let n = self.entries.len();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (a, b) = (&self.entries[i].f, &self.entries[j].f);
                if a == b || dominates_unchecked(a, b) {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec()).unwrap()
    }

    fn dv(v: &[f64]) -> DecisionVector {
        DecisionVector::new(v.to_vec()).unwrap()
    }

    fn fronts(a: &ParetoArchive) -> Vec<Vec<f64>> {
        a.entries().iter().map(|e| e.f.to_vec()).collect()
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[1.0, 1.0], &[2.0, 2.0]).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[2.0, 1.0]).unwrap());
        assert!(!dominates(&[1.0, 1.0], &[1.0, 1.0]).unwrap());
        assert!(dominates(&[1.0, 2.0], &[1.0, 3.0]).unwrap());
        assert!(matches!(
            dominates(&[1.0], &[1.0, 2.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn insert_examples() {
        let mut a = ParetoArchive::new();
        a.insert(dv(&[0.0]), ov(&[1.0, 1.0]));
        assert!(!a.insert(dv(&[1.0]), ov(&[2.0, 2.0])));
        assert_eq!(fronts(&a), vec![vec![1.0, 1.0]]);

        a.insert(dv(&[2.0]), ov(&[2.0, 0.5]));
        assert!(a.insert(dv(&[3.0]), ov(&[0.0, 0.0])));
        assert_eq!(fronts(&a), vec![vec![0.0, 0.0]]);

        let mut b = ParetoArchive::new();
        b.insert(dv(&[0.0]), ov(&[1.0, 1.0]));
        assert!(b.insert(dv(&[1.0]), ov(&[0.5, 2.0])));
        assert_eq!(fronts(&b), vec![vec![1.0, 1.0], vec![0.5, 2.0]]);
    }

    #[test]
    fn duplicate_objectives_keep_incumbent() {
        let mut a = ParetoArchive::new();
        a.insert(dv(&[0.0]), ov(&[1.0, 1.0]));
        assert!(!a.insert(dv(&[5.0]), ov(&[1.0, 1.0])));
        assert_eq!(a.entries()[0].x.as_slice(), &[0.0]);
    }

    #[test]
    fn capped_archive_stays_within_capacity() {
        let mut a = ParetoArchive::with_capacity_limit(5);
        for i in 0..20 {
            let t = i as f64 / 19.0;
            a.insert(dv(&[t]), ov(&[t, 1.0 - t]));
        }
        assert_eq!(a.len(), 5);
        assert!(a.is_mutually_nondominated());
        // Extremes carry infinite crowding distance and survive.
        assert!(a.entries().iter().any(|e| e.f[0] == 0.0));
        assert!(a.entries().iter().any(|e| e.f[0] == 1.0));
    }

    fn small_vec() -> impl Strategy<Value = Vec<f64>> {
        // Coarse grid values so ties and equalities actually occur.
        prop::collection::vec((0i32..4).prop_map(f64::from), 3)
    }

    proptest! {
        #[test]
        fn dominance_is_strict_partial_order(a in small_vec(), b in small_vec(), c in small_vec()) {
            prop_assert!(!dominates_unchecked(&a, &a));
            if dominates_unchecked(&a, &b) {
                prop_assert!(!dominates_unchecked(&b, &a));
            }
            if dominates_unchecked(&a, &b) && dominates_unchecked(&b, &c) {
                prop_assert!(dominates_unchecked(&a, &c));
            }
        }

        #[test]
        fn insert_is_idempotent_and_keeps_invariant(points in prop::collection::vec(small_vec(), 1..40)) {
            let mut a = ParetoArchive::new();
            for (i, p) in points.iter().enumerate() {
                a.insert(dv(&[i as f64]), ov(p));
                let snapshot = a.clone();
                a.insert(dv(&[i as f64]), ov(p));
                prop_assert_eq!(&snapshot, &a);
                prop_assert!(a.is_mutually_nondominated());
            }
            // Every offered point is either in the archive or weakly dominated by a member.
            for p in &points {
                prop_assert!(a.entries().iter().any(|e| e.f.as_slice() == p.as_slice() || dominates_unchecked(&e.f, p)));
            }
        }
    }
}
