//! Seeded instance generators: random programs and BBIRs for differential
//! testing, the benchmark families, and Bayesian-network translation.
//!
//! Every generator is a pure function of its parameters and seed.

pub mod bn;
pub mod families;
pub mod random;

pub use bn::{BayesNet, BnStrategy, BnVariable};
pub use families::{gen_dr, gen_gridworld, gen_ladder, gen_nested_mmap};
pub use random::{random_bbir, random_dappl, random_formula, random_pineappl, RandomBbir};

use crate::bdd::{BddHandle, BddManager, VarId};
use crate::oracle::Formula;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Builds the BDD of an oracle formula, mapping `Var(i)` to `vars[i]`.
pub fn formula_to_bdd(mgr: &mut BddManager, f: &Formula, vars: &[VarId]) -> BddHandle {
    match f {
        Formula::Var(i) => mgr.var(vars[*i]),
        Formula::Const(b) => mgr.constant(*b),
        Formula::Not(a) => {
            let a = formula_to_bdd(mgr, a, vars);
            mgr.not(a)
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Xor(a, b) | Formula::Iff(a, b) => {
            let (x, y) = (formula_to_bdd(mgr, a, vars), formula_to_bdd(mgr, b, vars));
            match f {
                Formula::And(..) => mgr.and(x, y),
                Formula::Or(..) => mgr.or(x, y),
                Formula::Xor(..) => mgr.xor(x, y),
                _ => mgr.iff(x, y),
            }
        }
    }
}

/// Formats a probability with at most three decimals.
pub(crate) fn prob(p: f64) -> String {
    let s = format!("{p:.3}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}
