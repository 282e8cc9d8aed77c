//! Direct enumeration semantics for the choice-free fragment, and
//! exhaustive policy search on top of it.

use super::sorted_sum;
use crate::dappl::ast::{Pure, UtilExpr};
use crate::dappl::{desugar, parser, reduce};
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// `None` is the failed-observation outcome ⊥; otherwise the returned value
/// and the reward accumulated along the trace.
pub type Outcome = Option<(bool, f64)>;
/// Outcomes with their probabilities; zero-probability entries are dropped.
pub type UtilDist = Vec<(Outcome, f64)>;

/// Largest policy space `dappl_meu_enum` will walk.
pub const MAX_POLICIES: usize = 1 << 14;

fn pure(p: &Pure, env: &BTreeMap<String, bool>) -> Result<bool> {
    Ok(match p {
        Pure::Var(x, _) => *env.get(x).ok_or_else(|| Error::Undefined(x.clone()))?,
        Pure::Const(b) => *b,
        Pure::And(a, b) => pure(a, env)? && pure(b, env)?,
        Pure::Or(a, b) => pure(a, env)? || pure(b, env)?,
        Pure::Not(a) => !pure(a, env)?,
    })
}

fn eval(e: &UtilExpr, env: &mut BTreeMap<String, bool>) -> Result<UtilDist> {
    Ok(match e {
        UtilExpr::Return(p) => vec![(Some((pure(p, env)?, 0.0)), 1.0)],
        UtilExpr::Flip(t) => [(Some((true, 0.0)), *t), (Some((false, 0.0)), 1.0 - t)]
            .into_iter()
            .filter(|(_, p)| *p > 0.0)
            .collect(),
        UtilExpr::Reward(k, e) => eval(e, env)?
            .into_iter()
            .map(|(o, p)| (o.map(|(v, r)| (v, r + k)), p))
            .collect(),
        UtilExpr::Ite(g, t, e) => {
            if pure(g, env)? {
                eval(t, env)?
            } else {
                eval(e, env)?
            }
        }
        UtilExpr::Observe(p, e) => {
            if pure(p, env)? {
                eval(e, env)?
            } else {
                vec![(None, 1.0)]
            }
        }
        UtilExpr::Bind(x, e, body) => {
            let mut out = Vec::new();
            let saved = env.get(x).copied();
            for (o, p) in eval(e, env)? {
                match o {
                    None => out.push((None, p)),
                    Some((v, r)) => {
                        env.insert(x.clone(), v);
                        for (o2, q) in eval(body, env)? {
                            out.push((o2.map(|(v2, r2)| (v2, r + r2)), p * q));
                        }
                    }
                }
            }
            match saved {
                Some(v) => env.insert(x.clone(), v),
                None => env.remove(x),
            };
            out.retain(|(_, p)| *p > 0.0);
            out
        }
    })
}

/// The outcome distribution of a closed choice-free program.
pub fn util_eval(e: &UtilExpr) -> Result<UtilDist> {
    eval(e, &mut BTreeMap::new())
}

/// Expected reward on traces returning true, conditioned on the
/// observations holding; `-∞` when they never do.
pub fn util_eu(e: &UtilExpr) -> Result<f64> {
    let dist = util_eval(e)?;
    let den = sorted_sum(
        dist.iter()
            .filter(|(o, _)| o.is_some())
            .map(|(_, p)| *p)
            .collect(),
    );
    if den <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let num = sorted_sum(
        dist.iter()
            .filter_map(|(o, p)| match o {
                Some((true, r)) => Some(p * r),
                _ => None,
            })
            .collect(),
    );
    Ok(num / den)
}

/// Maximum expected utility by trying every policy. Ties keep the first
/// policy in lexicographic alternative order.
pub fn dappl_meu_enum(src: &str) -> Result<(f64, BTreeMap<String, String>)> {
    let d = desugar::desugar(&parser::parse(src)?)?;
    let size = d.sites.iter().try_fold(1usize, |acc, s| {
        acc.checked_mul(s.alternatives.len())
            .filter(|&n| n <= MAX_POLICIES)
    });
    if size.is_none() {
        return Err(Error::TooLarge(format!("{} choice sites", d.sites.len())));
    }
    let mut best: Option<(f64, BTreeMap<String, String>)> = None;
    for policy in reduce::all_policies(&d) {
        let eu = util_eu(&reduce::reduce(&d, &policy)?)?;
        if best.as_ref().is_none_or(|(b, _)| eu > *b) {
            best = Some((eu, policy));
        }
    }
    Ok(best.unwrap_or((f64::NEG_INFINITY, BTreeMap::new())))
}
