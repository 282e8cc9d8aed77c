#![allow(dead_code)]

use bbopt_core::bbir::{bb, evaluate_objective, lb, ub, PartialPolicy, Policy, SolveOptions};
use bbopt_core::dappl::{reduce, Pipeline};
use bbopt_core::gen::random_bbir;
use bbopt_core::oracle::{brute_amc, dappl_meu_enum, pineappl_interp, util_eu};
use bbopt_core::pineappl::compile::QueryValue;
use bbopt_core::semiring::{ExpectationValue, Semiring};
use bbopt_core::Error;

pub fn same(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol
}

fn le_tol(a: ExpectationValue, b: ExpectationValue) -> bool {
    a.prob <= b.prob + 1e-9 && (a.util <= b.util + 1e-9 || b.util == f64::INFINITY)
}

fn close_ev(a: ExpectationValue, b: ExpectationValue) -> bool {
    same(a.prob, b.prob, 1e-9) && same(a.util, b.util, 1e-9)
}

/// Every partial policy over `k` variables as a vector of `None/Some(b)`.
fn partials(k: usize) -> Vec<Vec<Option<bool>>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p| {
                [None, Some(false), Some(true)].into_iter().map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// Checks bound dominance over every completion of every partial policy and
/// exactness at total policies; returns the number of violations.
pub fn bound_violations(seed: u64) -> usize {
    let mut r = random_bbir(seed, 8, 6);
    let k = r.branch.len();
    let mut bad = 0;
    for formula in [r.phi.clone(), r.gamma.clone()] {
        let handle = bbopt_core::gen::formula_to_bdd(&mut r.mgr, &formula, &r.vars);
        let completion_value = |t: &[bool]| {
            let mut w = r.weights.clone();
            for (j, &i) in r.branch.iter().enumerate() {
                let (p, q) = w[i];
                w[i] = if t[j] {
                    (p, ExpectationValue::zero())
                } else {
                    (ExpectationValue::zero(), q)
                };
            }
            brute_amc(&formula, &w).unwrap()
        };
        for p in partials(k) {
            let partial: PartialPolicy = p
                .iter()
                .enumerate()
                .filter_map(|(j, b)| b.map(|b| (r.vars[r.branch[j]], b)))
                .collect();
            let upper = ub(&mut r.mgr, &r.bbir, handle, &partial).unwrap();
            let lower = lb(&mut r.mgr, &r.bbir, handle, &partial).unwrap();
            let free: Vec<usize> = (0..k).filter(|&j| p[j].is_none()).collect();
            for bits in 0u32..(1 << free.len()) {
                let mut t: Vec<bool> = p.iter().map(|b| b.unwrap_or(false)).collect();
                for (n, &j) in free.iter().enumerate() {
                    t[j] = bits >> n & 1 == 1;
                }
                let v = completion_value(&t);
                if !le_tol(v, upper) || !le_tol(lower, v) {
                    bad += 1;
                }
                if free.is_empty() && !(close_ev(upper, v) && close_ev(lower, v)) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Solves a random BBIR with and without pruning; `Err` describes a mismatch.
pub fn bbir_prune_check(seed: u64) -> Result<(), String> {
    let mut r = random_bbir(seed, 8, 6);
    let a = bb(
        &mut r.mgr,
        &r.objective,
        &r.bbir,
        SolveOptions {
            prune: true,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let b = bb(
        &mut r.mgr,
        &r.objective,
        &r.bbir,
        SolveOptions {
            prune: false,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    if !same(a.value.util, b.value.util, 1e-9) {
        return Err(format!(
            "seed {seed}: pruned {} vs exhaustive {}",
            a.value.util, b.value.util
        ));
    }
    let w: Policy = a.witness.clone();
    let v = evaluate_objective(&mut r.mgr, &r.objective, &r.bbir, &w).map_err(|e| e.to_string())?;
    if !same(v.util, a.value.util, 1e-9) {
        return Err(format!(
            "seed {seed}: witness evaluates to {} not {}",
            v.util, a.value.util
        ));
    }
    if !a.stats.conserved() || !b.stats.conserved() {
        return Err(format!("seed {seed}: search counters not conserved"));
    }
    Ok(())
}

#[derive(Default, Debug)]
pub struct DapplDiff {
    pub policies_checked: usize,
    pub prunes: u64,
}

/// Compares the compiled solver with policy enumeration on one program:
/// the optimum, every policy's value, and pruned vs exhaustive search.
pub fn dappl_diff(src: &str) -> Result<DapplDiff, String> {
    let ctx = |e: Error| format!("{e}\n{src}");
    let mut p = Pipeline::build(src, None).map_err(ctx)?;
    let (oracle, _) = dappl_meu_enum(src).map_err(ctx)?;
    let pruned = p.solve(SolveOptions::default()).map_err(ctx)?;
    let full = p
        .solve(SolveOptions {
            prune: false,
            ..Default::default()
        })
        .map_err(ctx)?;
    if !same(pruned.meu, oracle, 1e-6) {
        return Err(format!("meu {} vs oracle {oracle}\n{src}", pruned.meu));
    }
    if !same(pruned.meu, full.meu, 1e-9) {
        return Err(format!(
            "pruned {} vs exhaustive {}\n{src}",
            pruned.meu, full.meu
        ));
    }
    let mut out = DapplDiff {
        policies_checked: 0,
        prunes: pruned.stats.prunes,
    };
    for policy in reduce::all_policies(&p.desugared) {
        let got = p.evaluate(&policy).map_err(ctx)?;
        let want = util_eu(&reduce::reduce(&p.desugared, &policy).map_err(ctx)?).map_err(ctx)?;
        if !same(got, want, 1e-6) {
            return Err(format!("policy {policy:?}: {got} vs {want}\n{src}"));
        }
        out.policies_checked += 1;
    }
    Ok(out)
}

fn same_value(a: &QueryValue, b: &QueryValue) -> bool {
    match (a, b) {
        (QueryValue::Probability(x), QueryValue::Probability(y)) => same(*x, *y, 1e-6),
        (QueryValue::Mmap(x), QueryValue::Mmap(y)) => {
            x.assignment == y.assignment && same(x.posterior, y.posterior, 1e-6)
        }
        _ => false,
    }
}

/// Compares the staged compiler with the trace interpreter on one program.
/// Both sides failing with the same kind of error counts as agreement.
pub fn pineappl_diff(src: &str) -> Result<usize, String> {
    let compiled = bbopt_core::pineappl::run(src);
    let interp = pineappl_interp(src);
    match (compiled, interp) {
        (Ok(c), Ok(i)) => {
            if c.queries.len() != i.queries.len() || c.decisions.len() != i.decisions.len() {
                return Err(format!("shape mismatch\n{src}"));
            }
            for (d, e) in c.decisions.iter().zip(&i.decisions) {
                let post = match (d.posterior, e.posterior) {
                    (Some(x), Some(y)) => same(x, y, 1e-6),
                    (x, y) => x == y,
                };
                if d.assignment != e.assignment || !post {
                    return Err(format!("decision {d:?} vs {e:?}\n{src}"));
                }
            }
            for (q, v) in c.queries.iter().zip(&i.queries) {
                if !same_value(&q.value, v) {
                    return Err(format!("{}: {:?} vs {v:?}\n{src}", q.query, q.value));
                }
            }
            Ok(c.queries.len())
        }
        (Err(a), Err(b)) if std::mem::discriminant(&a) == std::mem::discriminant(&b) => Ok(0),
        (a, b) => Err(format!(
            "compiled {:?} vs interpreter {:?}\n{src}",
            a.map(|r| r.queries.len()),
            b.map(|r| r.queries.len())
        )),
    }
}
