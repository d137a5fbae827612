//! Finite unions of disjoint closed intervals.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval endpoints out of order: {lo} > {hi}");
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `count ≥ 2` equally spaced points including both endpoints.
    pub fn samples(&self, count: usize) -> impl Iterator<Item = f64> + '_ {
        let count = count.max(2);
        let step = self.len() / (count - 1) as f64;
        (0..count).map(move |i| {
            if i + 1 == count {
                self.hi
            } else {
                self.lo + step * i as f64
            }
        })
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then(|| Interval::new(lo, hi))
    }
}

/// Sorted, pairwise disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    /// Sorts and merges overlapping or touching intervals.
    pub fn from_intervals(items: impl IntoIterator<Item = Interval>) -> Self {
        let mut items: Vec<Interval> = items.into_iter().collect();
        items.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(items.len());
        for it in items {
            match merged.last_mut() {
                Some(last) if it.lo <= last.hi => last.hi = last.hi.max(it.hi),
                _ => merged.push(it),
            }
        }
        IntervalSet { intervals: merged }
    }

    pub fn single(lo: f64, hi: f64) -> Self {
        IntervalSet {
            intervals: vec![Interval::new(lo, hi)],
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Lebesgue measure with compensated summation.
    pub fn measure(&self) -> f64 {
        let (mut sum, mut carry) = (0f64, 0f64);
        for it in &self.intervals {
            let y = it.len() - carry;
            let t = sum + y;
            carry = (t - sum) - y;
            sum = t;
        }
        sum
    }

    pub fn contains(&self, t: f64) -> bool {
        let i = self.intervals.partition_point(|it| it.hi < t);
        self.intervals.get(i).is_some_and(|it| it.contains(t))
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::from_intervals(self.intervals.iter().chain(&other.intervals).copied())
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a, b) = (self.intervals[i], other.intervals[j]);
            if let Some(x) = a.intersect(&b) {
                out.push(x);
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::from_intervals(out)
    }

    /// Closure of `self` minus the interiors of `other`'s intervals.
    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for it in &self.intervals {
            let mut lo = it.lo;
            for cut in other
                .intervals
                .iter()
                .filter(|c| c.hi > it.lo && c.lo < it.hi)
            {
                if cut.lo > lo {
                    out.push(Interval::new(lo, cut.lo));
                }
                lo = lo.max(cut.hi);
            }
            if lo < it.hi {
                out.push(Interval::new(lo, it.hi));
            }
        }
        IntervalSet::from_intervals(out)
    }

    pub fn lower(&self) -> Option<f64> {
        self.intervals.first().map(|i| i.lo)
    }

    pub fn upper(&self) -> Option<f64> {
        self.intervals.last().map(|i| i.hi)
    }

    /// The point below which a fraction `u ∈ [0, 1]` of the measure lies.
    pub fn at_fraction(&self, u: f64) -> Option<f64> {
        let mut rest = u.clamp(0.0, 1.0) * self.measure();
        for it in &self.intervals {
            if rest <= it.len() {
                return Some(it.lo + rest);
            }
            rest -= it.len();
        }
        self.upper()
    }

    /// `count` points at the measure midpoints `(i + ½) / count`.
    pub fn spread(&self, count: usize) -> Vec<f64> {
        (0..count)
            .filter_map(|i| self.at_fraction((i as f64 + 0.5) / count as f64))
            .collect()
    }
}
