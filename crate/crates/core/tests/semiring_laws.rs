use bbopt_core::semiring::{ExpectationValue, RealValue, Semiring};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn ev() -> impl Strategy<Value = ExpectationValue> {
    (0.0f64..2.0, -10.0f64..10.0).prop_map(|(p, u)| ExpectationValue::new(p, u))
}

fn real() -> impl Strategy<Value = RealValue> {
    (-10.0f64..10.0).prop_map(RealValue)
}

fn close(a: ExpectationValue, b: ExpectationValue) -> bool {
    (a.prob - b.prob).abs() <= TOL && (a.util - b.util).abs() <= TOL
}

fn le_tol(a: ExpectationValue, b: ExpectationValue) -> bool {
    a.prob <= b.prob + TOL && a.util <= b.util + TOL
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn expectation_axioms(a in ev(), b in ev(), c in ev()) {
        prop_assert!(close(a.add(b).add(c), a.add(b.add(c))));
        prop_assert!(close(a.add(b), b.add(a)));
        prop_assert!(close(a.mul(b).mul(c), a.mul(b.mul(c))));
        prop_assert!(close(a.mul(b), b.mul(a)));
        prop_assert!(close(a.mul(b.add(c)), a.mul(b).add(a.mul(c))));
        prop_assert!(close(b.add(c).mul(a), b.mul(a).add(c.mul(a))));
        prop_assert!(close(a.add(ExpectationValue::zero()), a));
        prop_assert!(close(a.mul(ExpectationValue::one()), a));
        prop_assert!(close(a.mul(ExpectationValue::zero()), ExpectationValue::zero()));
    }

    #[test]
    fn expectation_order(a in ev(), b in ev(), c in ev(), d in ev()) {
        if a.partial_le(b) {
            prop_assert!(a.total_le(b));
        }
        if a.partial_le(b) && c.partial_le(d) {
            prop_assert!(le_tol(a.add(c), b.add(d)));
        }
        let j = a.join(b);
        prop_assert!(a.partial_le(j) && b.partial_le(j));
        let m = a.meet(b);
        prop_assert!(m.partial_le(a) && m.partial_le(b));
        if a.partial_le(c) && b.partial_le(c) {
            prop_assert!(j.partial_le(c));
        }
        if c.partial_le(a) && c.partial_le(b) {
            prop_assert!(c.partial_le(m));
        }
        prop_assert!(a.total_le(b) || b.total_le(a));
    }

    #[test]
    fn commuting_bound(table in prop::collection::vec(prop::collection::vec(ev(), 1..5), 1..5)) {
        // Rows indexed by x, columns by y; ragged rows are truncated.
        let cols = table.iter().map(Vec::len).min().unwrap();
        let sum_then_join = table
            .iter()
            .map(|row| row[..cols].iter().fold(ExpectationValue::zero(), |s, &v| s.add(v)))
            .reduce(|a, b| a.join(b))
            .unwrap();
        let join_then_sum = (0..cols)
            .map(|y| table.iter().map(|row| row[y]).reduce(|a, b| a.join(b)).unwrap())
            .fold(ExpectationValue::zero(), |s, v| s.add(v));
        prop_assert!(le_tol(sum_then_join, join_then_sum));
    }

    #[test]
    fn interval_product_encloses(a in ev(), b in ev(), c in ev(), d in ev(), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let (alo, ahi) = (a.meet(b), a.join(b));
        let (blo, bhi) = (c.meet(d), c.join(d));
        // arbitrary points inside each box
        let x = ExpectationValue::new(alo.prob + s * (ahi.prob - alo.prob), alo.util + t * (ahi.util - alo.util));
        let y = ExpectationValue::new(blo.prob + t * (bhi.prob - blo.prob), blo.util + s * (bhi.util - blo.util));
        let (lo, hi) = ExpectationValue::mul_box((alo, ahi), (blo, bhi));
        let xy = x.mul(y);
        prop_assert!(le_tol(lo, xy) && le_tol(xy, hi), "{lo:?} {xy:?} {hi:?}");
    }

    #[test]
    fn real_axioms(a in real(), b in real(), c in real()) {
        let close = |x: RealValue, y: RealValue| (x.0 - y.0).abs() <= TOL;
        prop_assert!(close(a.add(b).add(c), a.add(b.add(c))));
        prop_assert!(close(a.add(b), b.add(a)));
        prop_assert!(close(a.mul(b).mul(c), a.mul(b.mul(c))));
        prop_assert!(close(a.mul(b.add(c)), a.mul(b).add(a.mul(c))));
        prop_assert!(close(a.mul(RealValue::zero()), RealValue::zero()));
        if a.partial_le(b) {
            prop_assert!(a.total_le(b));
        }
        prop_assert!(a.partial_le(a.join(b)) && a.meet(b).partial_le(b));
    }
}

#[test]
fn neg_infinity_is_least() {
    let bot = ExpectationValue::bottom();
    for v in [
        ExpectationValue::new(0.0, -1e300),
        ExpectationValue::new(1.0, 0.0),
        ExpectationValue::zero(),
    ] {
        assert!(bot.total_le(v));
    }
}
