//! Branch-and-bound semirings.
//!
//! A solver is parameterized statically over [`Semiring`]; the two
//! instantiations are the reals ([`RealValue`], used for marginal MAP) and the
//! expectation semiring ([`ExpectationValue`], used for expected utility).
//!
//! Besides the semiring operations each value carries a partial order `⊑`
//! with joins and meets, plus a compatible total order `≤`: `a ⊑ b` implies
//! `a ≤ b`. Bounds are compared with `⊑`, incumbents with `≤`.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Operations a branch-and-bound solver needs from its value domain.
pub trait Semiring: Copy + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(self, other: Self) -> Self;
    fn mul(self, other: Self) -> Self;
    /// Least upper bound under `⊑`.
    fn join(self, other: Self) -> Self;
    /// Greatest lower bound under `⊑`.
    fn meet(self, other: Self) -> Self;
    /// The lattice order `⊑`.
    fn partial_le(self, other: Self) -> bool;
    /// The total order `≤` used to rank incumbents.
    fn total_le(self, other: Self) -> bool;
    /// Smallest element under `≤`; the initial incumbent.
    fn bottom() -> Self;
    /// Scalar projection used by heuristics and reporting.
    fn score(self) -> f64;
    /// Encloses `{x ⊗ y : lo_a ⊑ x ⊑ hi_a, lo_b ⊑ y ⊑ hi_b}` in a `⊑`-interval.
    ///
    /// `⊗` need not be monotone in `⊑` (a negative utility flips it), so
    /// bounds are carried as intervals rather than multiplied corner-wise.
    fn mul_box(a: (Self, Self), b: (Self, Self)) -> (Self, Self) {
        let c = [a.0.mul(b.0), a.0.mul(b.1), a.1.mul(b.0), a.1.mul(b.1)];
        let lo = c[1..].iter().fold(c[0], |m, &x| m.meet(x));
        let hi = c[1..].iter().fold(c[0], |m, &x| m.join(x));
        (lo, hi)
    }
}

/// Range of `x · y` over two closed intervals.
fn product_range(x: (f64, f64), y: (f64, f64)) -> (f64, f64) {
    let c = [
        scale(x.0, y.0),
        scale(x.0, y.1),
        scale(x.1, y.0),
        scale(x.1, y.1),
    ];
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Product that treats `0 · ±∞` as `0`.
#[inline]
fn scale(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// An element of the real semiring: ordinary `+`, `×`, with `max`/`min` as
/// the lattice operations and `≤` as both orders.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RealValue(pub f64);

impl Semiring for RealValue {
    fn zero() -> Self {
        RealValue(0.0)
    }
    fn one() -> Self {
        RealValue(1.0)
    }
    fn add(self, o: Self) -> Self {
        RealValue(self.0 + o.0)
    }
    fn mul(self, o: Self) -> Self {
        RealValue(scale(self.0, o.0))
    }
    fn join(self, o: Self) -> Self {
        RealValue(self.0.max(o.0))
    }
    fn meet(self, o: Self) -> Self {
        RealValue(self.0.min(o.0))
    }
    fn partial_le(self, o: Self) -> bool {
        self.0 <= o.0
    }
    fn total_le(self, o: Self) -> bool {
        self.0 <= o.0
    }
    fn bottom() -> Self {
        RealValue(f64::NEG_INFINITY)
    }
    fn score(self) -> f64 {
        self.0
    }
}

/// An element `(p, u)` of the expectation semiring.
///
/// `⊕` is componentwise and `(p,u) ⊗ (q,v) = (pq, pv + qu)`. The lattice
/// order is coordinatewise; the total order compares utility first and
/// breaks ties on probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationValue {
    pub prob: f64,
    pub util: f64,
}

impl ExpectationValue {
    pub const fn new(prob: f64, util: f64) -> Self {
        ExpectationValue { prob, util }
    }

    /// `(p/r, u/r)`, or the sentinel `(0, −∞)` when `r = 0`.
    pub fn scalar_div(self, r: f64) -> Self {
        if r == 0.0 {
            ExpectationValue::new(0.0, f64::NEG_INFINITY)
        } else {
            ExpectationValue::new(self.prob / r, self.util / r)
        }
    }
}

impl fmt::Display for ExpectationValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.prob, self.util)
    }
}

impl Semiring for ExpectationValue {
    fn zero() -> Self {
        ExpectationValue::new(0.0, 0.0)
    }
    fn one() -> Self {
        ExpectationValue::new(1.0, 0.0)
    }
    fn add(self, o: Self) -> Self {
        ExpectationValue::new(self.prob + o.prob, self.util + o.util)
    }
    fn mul(self, o: Self) -> Self {
        ExpectationValue::new(
            scale(self.prob, o.prob),
            scale(self.prob, o.util) + scale(o.prob, self.util),
        )
    }
    fn join(self, o: Self) -> Self {
        ExpectationValue::new(self.prob.max(o.prob), self.util.max(o.util))
    }
    fn meet(self, o: Self) -> Self {
        ExpectationValue::new(self.prob.min(o.prob), self.util.min(o.util))
    }
    fn partial_le(self, o: Self) -> bool {
        self.prob <= o.prob && self.util <= o.util
    }
    fn total_le(self, o: Self) -> bool {
        self.util < o.util || (self.util == o.util && self.prob <= o.prob)
    }
    fn bottom() -> Self {
        ExpectationValue::new(0.0, f64::NEG_INFINITY)
    }
    fn score(self) -> f64 {
        self.util
    }
    fn mul_box(a: (Self, Self), b: (Self, Self)) -> (Self, Self) {
        // Probability and utility vary independently inside each box.
        let (pa, pb) = ((a.0.prob, a.1.prob), (b.0.prob, b.1.prob));
        let (ua, ub) = ((a.0.util, a.1.util), (b.0.util, b.1.util));
        let p = product_range(pa, pb);
        let (x, y) = (product_range(pa, ub), product_range(pb, ua));
        (
            ExpectationValue::new(p.0, x.0 + y.0),
            ExpectationValue::new(p.1, x.1 + y.1),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(p: f64, u: f64) -> ExpectationValue {
        ExpectationValue::new(p, u)
    }

    fn close(a: ExpectationValue, b: ExpectationValue) -> bool {
        (a.prob - b.prob).abs() < 1e-9 && (a.util - b.util).abs() < 1e-9
    }

    #[test]
    fn add_examples() {
        assert!(close(ev(0.1, 1.0).add(ev(0.9, -4.5)), ev(1.0, -3.5)));
        assert_eq!(ev(0.3, 2.0).add(ExpectationValue::zero()), ev(0.3, 2.0));
        assert!(close(ev(0.35, 2.0).add(ev(0.15, -7.0)), ev(0.5, -5.0)));
    }

    #[test]
    fn mul_examples() {
        assert!(close(ev(0.1, 0.0).mul(ev(1.0, 10.0)), ev(0.1, 1.0)));
        assert_eq!(ev(0.3, 2.0).mul(ExpectationValue::one()), ev(0.3, 2.0));
        assert!(close(ev(0.5, 2.0).mul(ev(0.5, 2.0)), ev(0.25, 2.0)));
    }

    #[test]
    fn lattice_examples() {
        assert_eq!(ev(1.0, 10.0).join(ev(1.0, -100.0)), ev(1.0, 10.0));
        assert_eq!(ev(0.4, 3.0).join(ev(0.4, 3.0)), ev(0.4, 3.0));
        assert_eq!(ev(0.5, 1.0).meet(ev(1.0, 0.0)), ev(0.5, 0.0));
    }

    #[test]
    fn total_order_examples() {
        assert!(ev(1.0, -10.0).total_le(ev(1.0, -3.5)));
        assert!(ev(0.3, 5.0).total_le(ev(0.3, 5.0)));
        assert!(!ev(0.9, 5.0).total_le(ev(0.1, 5.0)));
    }

    #[test]
    fn scalar_division() {
        assert!(close(ev(0.35, 3.5).scalar_div(0.35), ev(1.0, 10.0)));
        assert_eq!(ev(0.7, -2.0).scalar_div(1.0), ev(0.7, -2.0));
        let z = ev(0.2, 4.0).scalar_div(0.0);
        assert_eq!(z.prob, 0.0);
        assert_eq!(z.util, f64::NEG_INFINITY);
    }

    #[test]
    fn neg_infinity_sits_below_everything() {
        let sentinel = ExpectationValue::bottom();
        assert!(sentinel.total_le(ev(0.0, -1e300)));
        assert!(sentinel.total_le(ExpectationValue::zero()));
        // annihilated by a zero-probability factor rather than producing NaN
        let prod = sentinel.mul(ExpectationValue::zero());
        assert_eq!(prod, ExpectationValue::zero());
    }

    #[test]
    fn reals() {
        assert_eq!(RealValue(0.3).add(RealValue(0.2)), RealValue(0.5));
        assert_eq!(RealValue(0.3).mul(RealValue(0.5)), RealValue(0.15));
        assert_eq!(RealValue(0.3).join(RealValue(0.5)), RealValue(0.5));
        assert!(RealValue::bottom().total_le(RealValue(-1e308)));
    }

    #[test]
    fn negative_weights_break_monotone_products() {
        // (0.1, 0) ⊑ (1, 0), yet scaling by a penalty reverses the utilities
        let w = ev(1.0, -5.0);
        let (a, b) = (w.mul(ev(0.1, 0.0)), w.mul(ev(1.0, 0.0)));
        assert!(!a.partial_le(b));
        let (lo, hi) = ExpectationValue::mul_box((w, w), (ev(0.1, 0.0), ev(1.0, 0.0)));
        assert!(lo.partial_le(a) && lo.partial_le(b) && a.partial_le(hi) && b.partial_le(hi));
        assert!(close(hi, ev(1.0, -0.5)) && close(lo, ev(0.1, -5.0)));
    }

    #[test]
    fn degenerate_boxes_multiply_exactly() {
        let (a, b) = (ev(0.3, 2.0), ev(0.5, -4.0));
        let (lo, hi) = ExpectationValue::mul_box((a, a), (b, b));
        assert!(close(lo, a.mul(b)) && close(hi, a.mul(b)));
        let (lo, hi) = RealValue::mul_box(
            (RealValue(-1.0), RealValue(2.0)),
            (RealValue(3.0), RealValue(3.0)),
        );
        assert_eq!((lo, hi), (RealValue(-3.0), RealValue(6.0)));
    }
}
