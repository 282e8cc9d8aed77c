//! Boolean compilation of desugared programs.
//!
//! Each subterm compiles to a piece `(v, τ, γ, R, D)`: the value formula, a
//! trace constraint pinning the reward variables of discharged branches, the
//! observations, the pending reward variables, and every reward variable the
//! subterm can emit. Branch points (ite/choose) discharge pending rewards
//! into `τ`: the taken arm's rewards positively, all of the other arms'
//! rewards negatively.

use super::ast::{Expr, ExprKind, Pure};
use super::desugar::{Desugared, Site};
use crate::bbir::{Bbir, MeuObjective};
use crate::bdd::{BddHandle, BddManager, VarId, WeightMap};
use crate::error::{Error, Result};
use crate::semiring::ExpectationValue;

/// A compiled decision site.
#[derive(Clone, Debug)]
pub struct CompiledSite {
    pub site: Site,
    /// One variable per alternative, in alternative order.
    pub vars: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct CompiledDappl {
    /// Value formula of the program (before trace and reward pinning).
    pub phi: BddHandle,
    /// Trace constraint from discharged branch points.
    pub trace: BddHandle,
    /// Accepting formula (conjunction of observations).
    pub gamma: BddHandle,
    pub weights: WeightMap<ExpectationValue>,
    /// Reward variables still pending at the top level.
    pub pending_rewards: Vec<VarId>,
    pub sites: Vec<CompiledSite>,
}

struct Piece {
    v: BddHandle,
    tau: BddHandle,
    gamma: BddHandle,
    r: Vec<VarId>,
    d: Vec<VarId>,
}

#[derive(Clone, Copy)]
enum Val {
    Bool(BddHandle),
    Site(usize),
}

struct Compiler<'a> {
    mgr: &'a mut BddManager,
    weights: WeightMap<ExpectationValue>,
    sites: Vec<Option<CompiledSite>>,
    decl: &'a [Site],
    env: Vec<(String, Val)>,
}

pub fn compile(mgr: &mut BddManager, d: &Desugared) -> Result<CompiledDappl> {
    let mut c = Compiler {
        mgr,
        weights: WeightMap::new(),
        sites: vec![None; d.sites.len()],
        decl: &d.sites,
        env: Vec::new(),
    };
    let p = c.expr(&d.expr)?;
    let sites = c
        .sites
        .into_iter()
        .map(|s| s.ok_or_else(|| Error::Invalid("choice site never compiled".into())))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompiledDappl {
        phi: p.v,
        trace: p.tau,
        gamma: p.gamma,
        weights: c.weights,
        pending_rewards: p.r,
        sites,
    })
}

fn num_label(x: f64) -> String {
    format!("{x}")
}

impl Compiler<'_> {
    fn pure(&mut self, p: &Pure) -> Result<BddHandle> {
        Ok(match p {
            Pure::Const(b) => self.mgr.constant(*b),
            Pure::Var(x, _) => match self.env.iter().rev().find(|(n, _)| n == x) {
                Some((_, Val::Bool(h))) => *h,
                Some((_, Val::Site(_))) => {
                    return Err(Error::Invalid(format!("`{x}` is a decision")))
                }
                None => return Err(Error::Undefined(x.clone())),
            },
            Pure::And(a, b) => {
                let (a, b) = (self.pure(a)?, self.pure(b)?);
                self.mgr.and(a, b)
            }
            Pure::Or(a, b) => {
                let (a, b) = (self.pure(a)?, self.pure(b)?);
                self.mgr.or(a, b)
            }
            Pure::Not(a) => {
                let a = self.pure(a)?;
                self.mgr.not(a)
            }
        })
    }

    fn leaf(&self, v: BddHandle) -> Piece {
        let t = self.mgr.mk_true();
        Piece {
            v,
            tau: t,
            gamma: t,
            r: Vec::new(),
            d: Vec::new(),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<Piece> {
        match &e.kind {
            ExprKind::Pure(p) | ExprKind::Return(p) => {
                let v = self.pure(p)?;
                Ok(self.leaf(v))
            }
            ExprKind::Flip(theta) => {
                let f = self.mgr.new_var(&format!("f_{}", num_label(*theta)));
                self.weights.insert(
                    f,
                    ExpectationValue::new(*theta, 0.0),
                    ExpectationValue::new(1.0 - theta, 0.0),
                )?;
                let v = self.mgr.var(f);
                Ok(self.leaf(v))
            }
            ExprKind::Reward(k, b) => {
                let r = self.mgr.new_var(&format!("r_{}", num_label(*k)));
                self.weights.insert(
                    r,
                    ExpectationValue::new(1.0, *k),
                    ExpectationValue::new(1.0, 0.0),
                )?;
                let mut p = self.expr(b)?;
                p.r.push(r);
                p.d.push(r);
                Ok(p)
            }
            ExprKind::Observe(g, b) => {
                let g = self.pure(g)?;
                let mut p = self.expr(b)?;
                p.gamma = self.mgr.and(g, p.gamma);
                Ok(p)
            }
            ExprKind::Ite(g, t, f) => {
                let g = self.pure(g)?;
                let ng = self.mgr.not(g);
                let t = self.expr(t)?;
                let f = self.expr(f)?;
                Ok(self.branch(vec![(g, t), (ng, f)]))
            }
            ExprKind::Intro(_, site) => {
                let k =
                    site.ok_or_else(|| Error::Invalid("choice literal without a site".into()))?;
                self.intro(k)?;
                Ok(self.leaf(self.mgr.mk_true()))
            }
            ExprKind::Choose(s, arms) => {
                let ExprKind::Pure(Pure::Var(x, _)) = &s.kind else {
                    return Err(Error::Invalid(
                        "choose over a non-variable after desugaring".into(),
                    ));
                };
                let k = match self.env.iter().rev().find(|(n, _)| n == x) {
                    Some((_, Val::Site(k))) => *k,
                    _ => return Err(Error::Invalid(format!("`{x}` is not a decision"))),
                };
                let site = self.sites[k].clone().expect("intro precedes use");
                let lits: Vec<BddHandle> = site.vars.iter().map(|&v| self.mgr.var(v)).collect();
                let mut arms_c = Vec::new();
                let mut none_before = self.mgr.mk_true();
                for (i, alt) in site.site.alternatives.iter().enumerate() {
                    let arm = arms
                        .iter()
                        .find(|a| &a.name == alt)
                        .ok_or_else(|| Error::Invalid(format!("no arm for `{alt}`")))?;
                    let sel = if i + 1 == lits.len() {
                        none_before
                    } else {
                        self.mgr.and(lits[i], none_before)
                    };
                    let nl = self.mgr.not(lits[i]);
                    none_before = self.mgr.and(none_before, nl);
                    let p = self.expr(&arm.body)?;
                    arms_c.push((sel, p));
                }
                Ok(self.branch(arms_c))
            }
            ExprKind::Bind(x, rhs, body) => {
                let p1 = self.expr(rhs)?;
                let val = match rhs.kind {
                    ExprKind::Intro(_, Some(k)) => Val::Site(k),
                    _ => Val::Bool(p1.v),
                };
                self.env.push((x.clone(), val));
                let p2 = self.expr(body);
                self.env.pop();
                let mut p2 = p2?;
                p2.tau = self.mgr.and(p1.tau, p2.tau);
                p2.gamma = self.mgr.and(p1.gamma, p2.gamma);
                let mut r = p1.r;
                r.extend(p2.r);
                p2.r = r;
                let mut d = p1.d;
                d.extend(p2.d);
                p2.d = d;
                Ok(p2)
            }
            ExprKind::Disc(_) | ExprKind::Loop(..) => {
                Err(Error::Invalid("compile expects a desugared program".into()))
            }
        }
    }

    fn intro(&mut self, k: usize) -> Result<()> {
        if self.sites[k].is_some() {
            return Err(Error::Invalid(format!("site c{k} introduced twice")));
        }
        let site = self.decl[k].clone();
        let vars: Vec<VarId> = site
            .alternatives
            .iter()
            .map(|a| self.mgr.new_var(&format!("{}.{}", site.label, a)))
            .collect();
        for &v in &vars {
            self.weights.insert(
                v,
                ExpectationValue::new(1.0, 0.0),
                ExpectationValue::new(1.0, 0.0),
            )?;
        }
        self.sites[k] = Some(CompiledSite { site, vars });
        Ok(())
    }

    /// Merges arms under mutually exclusive, exhaustive selectors.
    fn branch(&mut self, arms: Vec<(BddHandle, Piece)>) -> Piece {
        let ds: Vec<BddHandle> = arms
            .iter()
            .map(|(_, p)| {
                let negs: Vec<BddHandle> =
                    p.d.iter()
                        .map(|&r| {
                            let h = self.mgr.var(r);
                            self.mgr.not(h)
                        })
                        .collect();
                self.mgr.and_all(negs)
            })
            .collect();
        let (mut v, mut tau, mut gamma) = (
            self.mgr.mk_false(),
            self.mgr.mk_false(),
            self.mgr.mk_false(),
        );
        let mut d_all = Vec::new();
        for (i, (sel, p)) in arms.iter().enumerate() {
            let sv = self.mgr.and(*sel, p.v);
            v = self.mgr.or(v, sv);
            let sg = self.mgr.and(*sel, p.gamma);
            gamma = self.mgr.or(gamma, sg);
            let pending: Vec<BddHandle> = p.r.iter().map(|&r| self.mgr.var(r)).collect();
            let mut t = self.mgr.and(*sel, p.tau);
            let pend = self.mgr.and_all(pending);
            t = self.mgr.and(t, pend);
            for (j, dj) in ds.iter().enumerate() {
                if j != i {
                    t = self.mgr.and(t, *dj);
                }
            }
            tau = self.mgr.or(tau, t);
            d_all.extend(p.d.iter().copied());
        }
        Piece {
            v,
            tau,
            gamma,
            r: Vec::new(),
            d: d_all,
        }
    }
}

impl CompiledDappl {
    /// `(φ ∧ τ ∧ ⋀R ∧ V, γ ∧ τ ∧ ⋀R)` with the choice variables as branch
    /// variables and one one-hot group per site.
    pub fn finalize(&self, mgr: &mut BddManager) -> Result<(Bbir<ExpectationValue>, MeuObjective)> {
        let pending: Vec<BddHandle> = self.pending_rewards.iter().map(|&r| mgr.var(r)).collect();
        let pend = mgr.and_all(pending);
        let mut validity = mgr.mk_true();
        for s in &self.sites {
            let one = mgr.exactly_one(&s.vars)?;
            validity = mgr.and(validity, one);
        }
        let base = mgr.and(self.trace, pend);
        let phi = mgr.and_all([self.phi, base, validity]);
        let gamma = mgr.and(self.gamma, base);
        let branch: Vec<VarId> = self
            .sites
            .iter()
            .flat_map(|s| s.vars.iter().copied())
            .collect();
        let groups: Vec<Vec<VarId>> = self.sites.iter().map(|s| s.vars.clone()).collect();
        let bbir = Bbir::new(vec![phi, gamma], branch, self.weights.clone()).with_groups(groups);
        Ok((bbir, MeuObjective { phi, gamma }))
    }

    pub fn branch_vars(&self) -> Vec<VarId> {
        self.sites
            .iter()
            .flat_map(|s| s.vars.iter().copied())
            .collect()
    }
}
