//! Float helpers that `core` does not provide without `std`.

pub(crate) use libm::{atan2, ceil, cos, erf, exp, floor, log10, pow, sin, sqrt};

pub(crate) const TAU: f64 = core::f64::consts::TAU;

#[inline]
pub(crate) fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `x mod 1` into `[0, 1)`.
#[inline]
pub(crate) fn wrap01(x: f64) -> f64 {
    let w = x - floor(x);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Sum in index order. Used wherever cross-run bit-identical reductions matter.
#[inline]
pub(crate) fn ordered_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, |acc, v| acc + v)
}

/// Exact floating-point accumulator (Shewchuk partials). [`ExactSum::value`]
/// is the correctly rounded total, so two accumulators holding the same
/// multiset of terms round to the same `f64` whatever the insertion order.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: alloc::vec::Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one finite term.
    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                core::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Adds every term held by `other`.
    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// Correctly rounded value of the exact sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round-half-even fix-up when the remainder sits exactly on a tie.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

impl core::ops::Add for ExactSum {
    type Output = ExactSum;

    fn add(mut self, rhs: ExactSum) -> ExactSum {
        self.merge(&rhs);
        self
    }
}

/// Equality of the exact (unrounded) sums.
impl PartialEq for ExactSum {
    fn eq(&self, other: &Self) -> bool {
        let mut diff = self.clone();
        for &p in &other.partials {
            diff.add(-p);
        }
        diff.value() == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sum_examples() {
        let mut s = ExactSum::new();
        for x in [1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 1.0);
        let mut t = ExactSum::new();
        for _ in 0..10 {
            t.add(0.1);
        }
        assert_eq!(t.value(), 1.0);
        assert_eq!(ExactSum::new().value(), 0.0);
    }

    #[test]
    fn exact_sum_is_order_independent() {
        let xs: alloc::vec::Vec<f64> = (0..500).map(|i| ((i * 7919) % 1000) as f64 * 1.37e-3 / (1 + i % 13) as f64).collect();
        let mut a = ExactSum::new();
        let mut b = ExactSum::new();
        xs.iter().for_each(|&x| a.add(x));
        xs.iter().rev().for_each(|&x| b.add(x));
        assert_eq!(a.value(), b.value());
        assert_eq!(a, b);
        let (l, r) = xs.split_at(137);
        let mut sl = ExactSum::new();
        let mut sr = ExactSum::new();
        l.iter().for_each(|&x| sl.add(x));
        r.iter().for_each(|&x| sr.add(x));
        assert_eq!(sl + sr, a);
    }
}
