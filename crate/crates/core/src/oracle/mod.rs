//! Brute-force reference implementations.
//!
//! Nothing here touches the BDD engine: formulas are evaluated by truth
//! table, programs by explicit enumeration of traces. Floating-point sums
//! are taken over sorted terms so results do not depend on enumeration order.

mod interp;
mod util;

pub use interp::{pineappl_interp, InterpResult, Valuation};
pub use util::{dappl_meu_enum, util_eu, util_eval, Outcome, UtilDist};

use crate::error::{Error, Result};
use crate::semiring::Semiring;

/// Largest universe `brute_amc` enumerates.
pub const MAX_AMC_VARS: usize = 20;
/// Largest decision set `mmap_enum` enumerates.
pub const MAX_MMAP_VARS: usize = 14;

/// A Boolean formula over variables `0..n`, evaluated by truth table.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Var(usize),
    Const(bool),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Xor(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn eval(&self, a: &[bool]) -> bool {
        match self {
            Formula::Var(i) => a[*i],
            Formula::Const(b) => *b,
            Formula::Not(x) => !x.eval(a),
            Formula::And(x, y) => x.eval(a) && y.eval(a),
            Formula::Or(x, y) => x.eval(a) || y.eval(a),
            Formula::Xor(x, y) => x.eval(a) != y.eval(a),
            Formula::Iff(x, y) => x.eval(a) == y.eval(a),
        }
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }
    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }
    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }
}

/// Iterates over all assignments to `n` variables; variable 0 is the most
/// significant, `false` first.
pub fn assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u64..(1u64 << n)).map(move |bits| (0..n).map(|i| bits >> (n - 1 - i) & 1 == 1).collect())
}

/// Sum of floats in ascending order.
pub fn sorted_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.into_iter().sum()
}

/// `Σ_{m ⊨ f} ⊗_{ℓ ∈ m} w(ℓ)` over all assignments to the universe
/// `0..weights.len()`; `weights[i]` is `(w(x_i), w(¬x_i))`.
pub fn brute_amc<S: Semiring>(f: &Formula, weights: &[(S, S)]) -> Result<S> {
    let n = weights.len();
    if n > MAX_AMC_VARS {
        return Err(Error::TooLarge(format!("{n} variables")));
    }
    let mut acc = S::zero();
    for a in assignments(n) {
        if f.eval(&a) {
            let w = a
                .iter()
                .zip(weights)
                .fold(S::one(), |p, (&b, &(pos, neg))| {
                    p.mul(if b { pos } else { neg })
                });
            acc = acc.add(w);
        }
    }
    Ok(acc)
}

/// Exhaustive marginal MAP: the assignment to `m` maximizing
/// `Σ_{v} w(m, v)[f ∧ evidence] / Σ w[f ∧ evidence]`. Ties go to the
/// lexicographically smallest assignment (in the order of `m`, false first).
pub fn mmap_enum(
    f: &Formula,
    m: &[usize],
    weights: &[f64],
    evidence: &Formula,
) -> Result<(Vec<bool>, f64)> {
    let n = weights.len();
    if n > MAX_AMC_VARS || m.len() > MAX_MMAP_VARS {
        return Err(Error::TooLarge(format!(
            "{n} variables, {} decisions",
            m.len()
        )));
    }
    let mut per: Vec<Vec<f64>> = vec![Vec::new(); 1 << m.len()];
    let mut all = Vec::new();
    for a in assignments(n) {
        if f.eval(&a) && evidence.eval(&a) {
            let w: f64 = a
                .iter()
                .enumerate()
                .map(|(i, &b)| if b { weights[i] } else { 1.0 - weights[i] })
                .product();
            let idx = m.iter().fold(0usize, |acc, &v| acc << 1 | a[v] as usize);
            per[idx].push(w);
            all.push(w);
        }
    }
    let z = sorted_sum(all);
    if z <= 0.0 {
        return Err(Error::ZeroEvidence(String::new()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (idx, ws) in per.into_iter().enumerate() {
        let v = sorted_sum(ws) / z;
        if best.is_none_or(|(_, b)| v > b + crate::bbir::MMAP_TIE_EPS) {
            best = Some((idx, v));
        }
    }
    let (idx, v) = best.expect("at least the empty assignment");
    let k = m.len();
    Ok(((0..k).map(|i| idx >> (k - 1 - i) & 1 == 1).collect(), v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::ExpectationValue;

    fn ev(p: f64, u: f64) -> ExpectationValue {
        ExpectationValue::new(p, u)
    }

    #[test]
    fn umbrella_formula() {
        // Variables: r, R10, R-5, R-100.
        let v = Formula::Var;
        let phi = Formula::or(
            Formula::and(
                v(0),
                Formula::and(v(1), Formula::and(Formula::not(v(2)), Formula::not(v(3)))),
            ),
            Formula::and(
                Formula::not(v(0)),
                Formula::and(Formula::not(v(1)), Formula::and(v(2), Formula::not(v(3)))),
            ),
        );
        let w = [
            (ev(0.1, 0.0), ev(0.9, 0.0)),
            (ev(1.0, 10.0), ev(1.0, 0.0)),
            (ev(1.0, -5.0), ev(1.0, 0.0)),
            (ev(1.0, -100.0), ev(1.0, 0.0)),
        ];
        let r = brute_amc(&phi, &w).unwrap();
        assert!((r.prob - 1.0).abs() < 1e-12 && (r.util + 3.5).abs() < 1e-12);
        assert_eq!(
            brute_amc(&Formula::Const(false), &w).unwrap(),
            ExpectationValue::new(0.0, 0.0)
        );
    }

    #[test]
    fn gap_factors() {
        let w = [(ev(0.3, 0.0), ev(0.7, 0.0)), (ev(1.0, 5.0), ev(1.0, 0.0))];
        assert_eq!(brute_amc(&Formula::Const(true), &w).unwrap(), ev(2.0, 5.0));
    }

    #[test]
    fn diagnosis_mmap() {
        // disease, headache, f_0.5, f_0.7, f_0.1; program variables get
        // weight 1/2 each side and are scaled back out by the ratio.
        let v = Formula::Var;
        let f = Formula::and(
            Formula::iff(v(0), v(2)),
            Formula::iff(
                v(1),
                Formula::or(
                    Formula::and(v(0), v(3)),
                    Formula::and(Formula::not(v(0)), v(4)),
                ),
            ),
        );
        let (a, p) = mmap_enum(&f, &[0], &[0.5, 0.5, 0.5, 0.7, 0.1], &v(1)).unwrap();
        assert_eq!(a, [true]);
        assert!((p - 0.875).abs() < 1e-12);
        let (a, p) = mmap_enum(&f, &[], &[0.5, 0.5, 0.5, 0.7, 0.1], &v(1)).unwrap();
        assert!(a.is_empty() && (p - 1.0).abs() < 1e-12);
    }
}
