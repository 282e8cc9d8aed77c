//! A trace-enumerating interpreter for the imperative language.
//!
//! The interpreter carries the whole weighted set of traces through the
//! program. An `if` splits the set on its guard; each `mmap` statement is
//! answered by exhaustive argmax over the traces reaching it. After each
//! statement, names nothing later reads are forgotten and traces that became
//! identical are merged, which keeps sequential programs small.

use super::sorted_sum;
use crate::error::{Error, Result};
use crate::pineappl::ast::{PExpr, Query, Stmt};
use crate::pineappl::compile::{Decision, MmapAnswer, QueryValue};
use crate::pineappl::{expand, parser};
use std::collections::{BTreeMap, BTreeSet, HashMap};

pub type Valuation = BTreeMap<String, bool>;

/// Largest number of live traces before giving up.
pub const MAX_TRACES: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq)]
pub struct InterpResult {
    pub queries: Vec<QueryValue>,
    pub decisions: Vec<Decision>,
}

type Traces = Vec<(Valuation, f64)>;

struct Interp {
    /// Name → position of its first binding, which is the order the compiler
    /// allocates variables in.
    rank: HashMap<String, usize>,
    decisions: Vec<Decision>,
}

fn bound_names(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match s {
            Stmt::Assign(x, _, _) | Stmt::Flip(x, _, _) => {
                out.insert(x.clone());
            }
            Stmt::If(_, t, e, _) => {
                bound_names(t, out);
                bound_names(e, out);
            }
            Stmt::Mmap(ms, _, _, _) => out.extend(ms.iter().cloned()),
            Stmt::Loop(_, b, _) => bound_names(b, out),
        }
    }
}

fn rank_names(stmts: &[Stmt], rank: &mut HashMap<String, usize>) {
    for s in stmts {
        let mut add = |x: &String| {
            let n = rank.len();
            rank.entry(x.clone()).or_insert(n);
        };
        match s {
            Stmt::Assign(x, _, _) | Stmt::Flip(x, _, _) => add(x),
            Stmt::Mmap(ms, _, _, _) => ms.iter().for_each(add),
            Stmt::If(_, t, e, _) => {
                rank_names(t, rank);
                rank_names(e, rank);
            }
            Stmt::Loop(_, b, _) => rank_names(b, rank),
        }
    }
}

/// Names a statement reads, including inside nested blocks.
fn reads(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match s {
            Stmt::Flip(..) => {}
            Stmt::Assign(_, e, _) => e.vars(out),
            Stmt::If(g, t, e, _) => {
                g.vars(out);
                reads(t, out);
                reads(e, out);
            }
            Stmt::Mmap(_, xs, ev, _) => {
                out.extend(xs.iter().cloned());
                if let Some(e) = ev {
                    e.vars(out);
                }
            }
            Stmt::Loop(_, b, _) => reads(b, out),
        }
    }
}

/// Restricts every trace to `live` and merges duplicates.
fn project(ts: Traces, live: &BTreeSet<String>) -> Traces {
    let mut merged: BTreeMap<Valuation, f64> = BTreeMap::new();
    for (mut v, p) in ts {
        v.retain(|k, _| live.contains(k));
        *merged.entry(v).or_insert(0.0) += p;
    }
    merged.into_iter().collect()
}

fn eval(e: &PExpr, v: &Valuation) -> Result<bool> {
    let mut missing = BTreeSet::new();
    e.vars(&mut missing);
    if let Some(x) = missing.iter().find(|x| !v.contains_key(*x)) {
        return Err(Error::Undefined(x.clone()));
    }
    Ok(e.eval(&|x| v[x]))
}

fn mass(ts: &Traces) -> f64 {
    sorted_sum(ts.iter().map(|t| t.1).collect())
}

impl Interp {
    /// Runs `stmts`; `live_after` is what the continuation reads.
    fn block(
        &mut self,
        stmts: &[Stmt],
        mut ts: Traces,
        live_after: &BTreeSet<String>,
    ) -> Result<Traces> {
        for (i, s) in stmts.iter().enumerate() {
            let mut live = live_after.clone();
            reads(&stmts[i + 1..], &mut live);
            ts = self.stmt(s, ts, &live)?;
            ts = project(ts, &live);
            if ts.len() > MAX_TRACES {
                return Err(Error::TooLarge(format!("more than {MAX_TRACES} traces")));
            }
        }
        Ok(ts)
    }

    fn stmt(&mut self, s: &Stmt, ts: Traces, live: &BTreeSet<String>) -> Result<Traces> {
        Ok(match s {
            Stmt::Flip(x, theta, _) => {
                let mut out = Vec::with_capacity(ts.len() * 2);
                for (v, p) in ts {
                    for (b, q) in [(true, *theta), (false, 1.0 - theta)] {
                        if p * q > 0.0 {
                            let mut v = v.clone();
                            v.insert(x.clone(), b);
                            out.push((v, p * q));
                        }
                    }
                }
                out
            }
            Stmt::Assign(x, e, _) => ts
                .into_iter()
                .map(|(mut v, p)| {
                    let b = eval(e, &v)?;
                    v.insert(x.clone(), b);
                    Ok((v, p))
                })
                .collect::<Result<_>>()?,
            Stmt::If(g, t, e, _) => {
                let (mut yes, mut no) = (Vec::new(), Vec::new());
                for (v, p) in ts {
                    if eval(g, &v)? {
                        yes.push((v, p));
                    } else {
                        no.push((v, p));
                    }
                }
                let yes = self.block(t, yes, live)?;
                let no = self.block(e, no, live)?;
                let mut names = BTreeSet::new();
                bound_names(t, &mut names);
                bound_names(e, &mut names);
                let mut out = Vec::with_capacity(yes.len() + no.len());
                for (mut v, p) in yes.into_iter().chain(no) {
                    for n in &names {
                        v.entry(n.clone()).or_insert(false);
                    }
                    out.push((v, p));
                }
                out
            }
            Stmt::Mmap(ms, xs, ev, _) => {
                let (assignment, posterior) = self.mmap(xs, ev.as_ref(), &ts)?;
                let mut decision = BTreeMap::new();
                for (m, x) in ms.iter().zip(xs) {
                    decision.insert(m.clone(), assignment[x]);
                }
                self.decisions.push(Decision {
                    assignment: decision.clone(),
                    posterior,
                });
                ts.into_iter()
                    .map(|(mut v, p)| {
                        v.extend(decision.iter().map(|(k, b)| (k.clone(), *b)));
                        (v, p)
                    })
                    .collect()
            }
            Stmt::Loop(..) => return Err(Error::Invalid("loops must be expanded first".into())),
        })
    }

    fn mmap(
        &self,
        xs: &[String],
        ev: Option<&PExpr>,
        ts: &Traces,
    ) -> Result<(BTreeMap<String, bool>, Option<f64>)> {
        if mass(ts) <= 0.0 {
            return Ok((xs.iter().map(|x| (x.clone(), false)).collect(), None));
        }
        let mut order: Vec<&String> = xs.iter().collect();
        order.sort_by_key(|x| self.rank.get(*x).copied().unwrap_or(usize::MAX));
        order.dedup();
        let k = order.len();
        let mut per: Vec<Vec<f64>> = vec![Vec::new(); 1 << k];
        let mut all = Vec::new();
        for (v, p) in ts {
            if ev.map(|e| eval(e, v)).transpose()?.unwrap_or(true) {
                let mut idx = 0usize;
                for x in &order {
                    let b = *v.get(*x).ok_or_else(|| Error::Undefined((*x).clone()))?;
                    idx = idx << 1 | b as usize;
                }
                per[idx].push(*p);
                all.push(*p);
            }
        }
        let z = sorted_sum(all);
        if z <= 0.0 {
            return Err(Error::ZeroEvidence(format!(" for mmap({})", xs.join(", "))));
        }
        let mut best = (0usize, f64::NEG_INFINITY);
        for (idx, ws) in per.into_iter().enumerate() {
            let val = sorted_sum(ws) / z;
            if val > best.1 + crate::bbir::MMAP_TIE_EPS {
                best = (idx, val);
            }
        }
        let assignment = order
            .iter()
            .enumerate()
            .map(|(i, x)| ((*x).clone(), best.0 >> (k - 1 - i) & 1 == 1))
            .collect();
        Ok((assignment, Some(best.1)))
    }
}

/// Runs a program by enumerating its traces.
pub fn pineappl_interp(src: &str) -> Result<InterpResult> {
    let prog = expand::expand_loops(&parser::parse(src)?)?;
    let mut rank = HashMap::new();
    rank_names(&prog.stmts, &mut rank);
    let mut it = Interp {
        rank,
        decisions: Vec::new(),
    };
    let mut live = BTreeSet::new();
    for q in &prog.queries {
        match q {
            Query::Pr(e, ev) => {
                e.vars(&mut live);
                if let Some(ev) = ev {
                    ev.vars(&mut live);
                }
            }
            Query::Mmap(xs, ev) => {
                live.extend(xs.iter().cloned());
                if let Some(ev) = ev {
                    ev.vars(&mut live);
                }
            }
        }
    }
    let ts = it.block(&prog.stmts, vec![(Valuation::new(), 1.0)], &live)?;
    let mut queries = Vec::new();
    for q in &prog.queries {
        queries.push(match q {
            Query::Pr(e, ev) => {
                let (mut num, mut den) = (Vec::new(), Vec::new());
                for (v, p) in &ts {
                    if ev.as_ref().map(|e| eval(e, v)).transpose()?.unwrap_or(true) {
                        den.push(*p);
                        if eval(e, v)? {
                            num.push(*p);
                        }
                    }
                }
                let den = sorted_sum(den);
                if den <= 0.0 {
                    return Err(Error::ZeroEvidence(format!(" in query pr({e})")));
                }
                QueryValue::Probability(sorted_sum(num) / den)
            }
            Query::Mmap(xs, ev) => {
                let (assignment, posterior) = it.mmap(xs, ev.as_ref(), &ts)?;
                QueryValue::Mmap(MmapAnswer {
                    assignment,
                    posterior: posterior.unwrap_or(0.0),
                })
            }
        });
    }
    Ok(InterpResult {
        queries,
        decisions: it.decisions,
    })
}
