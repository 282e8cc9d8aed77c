//! Staged compilation: statements extend a constraint `⋀ x ↔ φ`, and each
//! `mmap` statement is solved immediately against the constraint so far, its
//! answer baked in through indicator variables.

use super::ast::{PExpr, Query, Stmt};
use crate::bbir::{bb, Bbir, MmapObjective, SolveOptions, SolveStats};
use crate::bdd::{BddHandle, BddManager, VarId, WeightMap};
use crate::error::{Error, Result};
use crate::semiring::RealValue;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

/// The outcome of one staged `mmap` statement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decision {
    /// Bound name → chosen value.
    pub assignment: BTreeMap<String, bool>,
    /// Conditional probability of the chosen assignment; `None` when the
    /// enclosing path has probability zero and the default was used.
    pub posterior: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MmapAnswer {
    pub assignment: BTreeMap<String, bool>,
    pub posterior: f64,
}

pub struct CompileState {
    pub mgr: BddManager,
    pub weights: WeightMap<RealValue>,
    /// `(x, φ)` pairs in binding order, for `x ↔ φ`.
    pub defs: Vec<(VarId, BddHandle)>,
    /// Conjunction of the definitions in scope, except those in `pending`.
    constraint: BddHandle,
    /// Definitions not yet conjoined; branch-local ones are usually
    /// discarded before anything needs the full constraint.
    pending: Vec<BddHandle>,
    env: BTreeMap<String, VarId>,
    /// Sibling branches binding the same name share its variable.
    alloc: HashMap<String, VarId>,
    pub decisions: Vec<Decision>,
    pub opts: SolveOptions,
    pub stats: SolveStats,
}

impl CompileState {
    pub fn new(mgr: BddManager, opts: SolveOptions) -> Self {
        let t = mgr.mk_true();
        CompileState {
            mgr,
            weights: WeightMap::new(),
            defs: Vec::new(),
            constraint: t,
            pending: Vec::new(),
            env: BTreeMap::new(),
            alloc: HashMap::new(),
            decisions: Vec::new(),
            opts,
            stats: SolveStats::default(),
        }
    }

    pub fn lookup(&self, x: &str) -> Result<VarId> {
        self.env
            .get(x)
            .copied()
            .ok_or_else(|| Error::Undefined(x.to_string()))
    }

    pub fn expr(&mut self, e: &PExpr) -> Result<BddHandle> {
        Ok(match e {
            PExpr::Var(x, _) => {
                let v = self.lookup(x)?;
                self.mgr.var(v)
            }
            PExpr::Const(b) => self.mgr.constant(*b),
            PExpr::And(a, b) => {
                let (a, b) = (self.expr(a)?, self.expr(b)?);
                self.mgr.and(a, b)
            }
            PExpr::Or(a, b) => {
                let (a, b) = (self.expr(a)?, self.expr(b)?);
                self.mgr.or(a, b)
            }
            PExpr::Not(a) => {
                let a = self.expr(a)?;
                self.mgr.not(a)
            }
        })
    }

    fn program_var(&mut self, x: &str) -> Result<VarId> {
        if self.env.contains_key(x) {
            return Err(Error::DuplicateBinding(x.to_string()));
        }
        let v = match self.alloc.get(x) {
            Some(&v) => v,
            None => {
                let v = self.mgr.new_var(x);
                self.weights.insert(v, RealValue(1.0), RealValue(1.0))?;
                self.alloc.insert(x.to_string(), v);
                v
            }
        };
        self.env.insert(x.to_string(), v);
        Ok(v)
    }

    fn define(&mut self, x: VarId, def: BddHandle) {
        let xv = self.mgr.var(x);
        let iff = self.mgr.iff(xv, def);
        self.pending.push(iff);
        self.defs.push((x, def));
    }

    /// Conjunction of every definition in scope.
    pub fn constraint(&mut self) -> BddHandle {
        if !self.pending.is_empty() {
            // the new definitions are small; walk the large constraint once
            let local = self.mgr.and_all(std::mem::take(&mut self.pending));
            self.constraint = self.mgr.and(self.constraint, local);
        }
        self.constraint
    }

    /// Compiles a block under a path condition, returning the bindings it
    /// made (name, variable, definition) in order.
    pub fn block(
        &mut self,
        stmts: &[Stmt],
        path: BddHandle,
    ) -> Result<Vec<(String, VarId, BddHandle)>> {
        let mut out = Vec::new();
        for s in stmts {
            self.stmt(s, path, &mut out)?;
        }
        Ok(out)
    }

    fn stmt(
        &mut self,
        s: &Stmt,
        path: BddHandle,
        out: &mut Vec<(String, VarId, BddHandle)>,
    ) -> Result<()> {
        match s {
            Stmt::Flip(x, theta, _) => {
                let xv = self.program_var(x)?;
                let f = self.mgr.new_var(&format!("f_{theta}"));
                self.weights
                    .insert(f, RealValue(*theta), RealValue(1.0 - theta))?;
                let def = self.mgr.var(f);
                self.define(xv, def);
                out.push((x.clone(), xv, def));
            }
            Stmt::Assign(x, e, _) => {
                let def = self.expr(e)?;
                let xv = self.program_var(x)?;
                self.define(xv, def);
                out.push((x.clone(), xv, def));
            }
            Stmt::If(g, t, e, _) => {
                let chi = self.expr(g)?;
                let nchi = self.mgr.not(chi);
                let (saved_c, saved_env, saved_defs) =
                    (self.constraint, self.env.clone(), self.defs.len());
                let saved_pending = self.pending.clone();
                let pt = self.mgr.and(path, chi);
                let tb = self.block(t, pt)?;
                self.constraint = saved_c;
                self.pending.clone_from(&saved_pending);
                self.env = saved_env.clone();
                self.defs.truncate(saved_defs);
                let pe = self.mgr.and(path, nchi);
                let eb = self.block(e, pe)?;
                self.constraint = saved_c;
                self.pending = saved_pending;
                self.env = saved_env;
                self.defs.truncate(saved_defs);
                let mut names: Vec<(String, VarId)> = Vec::new();
                for (n, v, _) in tb.iter().chain(&eb) {
                    if !names.iter().any(|(m, _)| m == n) {
                        names.push((n.clone(), *v));
                    }
                }
                for (n, _) in &names {
                    let find = |b: &[(String, VarId, BddHandle)]| {
                        b.iter().rev().find(|(m, _, _)| m == n).map(|t| t.2)
                    };
                    let (dt, de) = (find(&tb), find(&eb));
                    let ff = self.mgr.mk_false();
                    let a = self.mgr.and(chi, dt.unwrap_or(ff));
                    let b = self.mgr.and(nchi, de.unwrap_or(ff));
                    let def = self.mgr.or(a, b);
                    let xv = self.program_var(n)?;
                    self.define(xv, def);
                    out.push((n.clone(), xv, def));
                }
            }
            Stmt::Mmap(ms, xs, ev, _) => {
                let (assignment, posterior) = self.solve_mmap(xs, ev.as_ref(), path)?;
                let mut decision = BTreeMap::new();
                for (m, x) in ms.iter().zip(xs) {
                    let val = assignment[x];
                    let k = self.mgr.new_var(&format!("k_{m}"));
                    let (pos, neg) = if val { (1.0, 0.0) } else { (0.0, 1.0) };
                    self.weights.insert(k, RealValue(pos), RealValue(neg))?;
                    let mv = self.program_var(m)?;
                    let def = self.mgr.var(k);
                    self.define(mv, def);
                    out.push((m.clone(), mv, def));
                    decision.insert(m.clone(), val);
                }
                self.decisions.push(Decision {
                    assignment: decision,
                    posterior,
                });
            }
            Stmt::Loop(..) => {
                return Err(Error::Invalid(
                    "loops must be expanded before compilation".into(),
                ))
            }
        }
        Ok(())
    }

    /// Marginal MAP of `xs` given the constraint, evidence and path. A path
    /// of probability zero yields the all-false assignment.
    pub fn solve_mmap(
        &mut self,
        xs: &[String],
        ev: Option<&PExpr>,
        path: BddHandle,
    ) -> Result<(BTreeMap<String, bool>, Option<f64>)> {
        let mut vars: Vec<(VarId, String)> = xs
            .iter()
            .map(|x| Ok((self.lookup(x)?, x.clone())))
            .collect::<Result<_>>()?;
        vars.sort();
        let c = self.constraint();
        let phi = self.mgr.and(c, path);
        let path_mass = self.mgr.amc(phi, &self.weights)?.0;
        if path_mass <= 0.0 {
            return Ok((xs.iter().map(|x| (x.clone(), false)).collect(), None));
        }
        let gamma = match ev {
            Some(e) => self.expr(e)?,
            None => self.mgr.mk_true(),
        };
        let obj = MmapObjective::new(phi, gamma);
        let bbir = Bbir::new(
            vec![phi, gamma],
            vars.iter().map(|(v, _)| *v).collect(),
            self.weights.clone(),
        );
        let res = bb(&mut self.mgr, &obj, &bbir, self.opts).map_err(|e| match e {
            Error::ZeroEvidence(_) => Error::ZeroEvidence(format!(" for mmap({})", xs.join(", "))),
            other => other,
        })?;
        self.accumulate(&res.stats);
        let assignment = vars
            .iter()
            .map(|(v, x)| (x.clone(), res.witness[v]))
            .collect();
        Ok((assignment, Some(res.value.0)))
    }

    fn accumulate(&mut self, s: &SolveStats) {
        self.stats.bound_calls += s.bound_calls;
        self.stats.prunes += s.prunes;
        self.stats.base_cases += s.base_cases;
        self.stats.infeasible += s.infeasible;
        self.stats.interior += s.interior;
        self.stats.elapsed_ms += s.elapsed_ms;
    }

    /// `AMC(χ ∧ C ∧ ψ) / AMC(C ∧ ψ)`.
    pub fn probability(&mut self, e: &PExpr, ev: Option<&PExpr>) -> Result<f64> {
        let chi = self.expr(e)?;
        let psi = match ev {
            Some(o) => self.expr(o)?,
            None => self.mgr.mk_true(),
        };
        let c = self.constraint();
        let den_f = self.mgr.and(c, psi);
        let num_f = self.mgr.and(den_f, chi);
        let den = self.mgr.amc(den_f, &self.weights)?.0;
        if den <= 0.0 {
            return Err(Error::ZeroEvidence(format!(" in query pr({e})")));
        }
        let num = self.mgr.amc(num_f, &self.weights)?.0;
        Ok(num / den)
    }

    /// Evaluates one query against the compiled statements.
    pub fn run_query(&mut self, q: &Query) -> Result<QueryValue> {
        match q {
            Query::Pr(e, ev) => Ok(QueryValue::Probability(self.probability(e, ev.as_ref())?)),
            Query::Mmap(xs, ev) => {
                let t = self.mgr.mk_true();
                let (assignment, posterior) = self.solve_mmap(xs, ev.as_ref(), t)?;
                Ok(QueryValue::Mmap(MmapAnswer {
                    assignment,
                    posterior: posterior.unwrap_or(0.0),
                }))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum QueryValue {
    Probability(f64),
    Mmap(MmapAnswer),
}

impl QueryValue {
    pub fn probability(&self) -> Option<f64> {
        match self {
            QueryValue::Probability(p) => Some(*p),
            QueryValue::Mmap(_) => None,
        }
    }
}
