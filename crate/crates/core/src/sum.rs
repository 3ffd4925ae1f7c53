//! Compensated summation.
//!
//! All quadratic and higher structured sums in this crate accumulate through
//! [`Neumaier`], so that the error stays O(ε) independently of the number of
//! terms. Partial accumulators are merged in a fixed order, which keeps
//! parallel reductions bit-reproducible.

/// Neumaier (improved Kahan–Babuška) running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub const fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another accumulator into this one, keeping both error terms.
    #[inline]
    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<Neumaier>().value()
}

/// Merges per-block accumulators in index order.
pub fn merge_ordered<'a, I: IntoIterator<Item = &'a Neumaier>>(parts: I) -> f64 {
    let mut acc = Neumaier::new();
    for p in parts {
        acc.merge(p);
    }
    acc.value()
}
