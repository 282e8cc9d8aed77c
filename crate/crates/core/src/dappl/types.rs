use super::ast::{Expr, ExprKind, Pure};
use crate::error::{Error, Result, Span};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DapplType {
    Bool,
    /// Distribution over Booleans.
    Dist,
    /// A decision between named alternatives.
    Choice(BTreeSet<String>),
    /// A categorical distribution; only meaningful before desugaring.
    Categorical(Vec<String>),
}

impl fmt::Display for DapplType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DapplType::Bool => write!(f, "Bool"),
            DapplType::Dist => write!(f, "G Bool"),
            DapplType::Choice(ns) => write!(
                f,
                "Choice{{{}}}",
                ns.iter().cloned().collect::<Vec<_>>().join(", ")
            ),
            DapplType::Categorical(ns) => write!(f, "Categorical{{{}}}", ns.join(", ")),
        }
    }
}

/// Result of type checking: the program type plus the choice sites (keyed by
/// the span of their literal) that are used as if-guards.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeInfo {
    pub ty: DapplType,
    pub binary_sites: BTreeSet<Span>,
}

#[derive(Clone, Debug)]
enum VarTy {
    Bool,
    Choice(Vec<String>, Span),
    Categorical(Vec<String>),
}

struct Checker {
    env: Vec<(String, VarTy)>,
    binary: BTreeSet<Span>,
    matched: BTreeSet<Span>,
}

fn err<T>(span: Span, msg: impl Into<String>) -> Result<T> {
    Err(Error::Type {
        span,
        msg: msg.into(),
    })
}

/// Types a closed program.
pub fn typecheck(e: &Expr) -> Result<DapplType> {
    Ok(check(e)?.ty)
}

pub fn check(e: &Expr) -> Result<TypeInfo> {
    let mut c = Checker {
        env: Vec::new(),
        binary: BTreeSet::new(),
        matched: BTreeSet::new(),
    };
    let ty = c.expr(e)?;
    if let Some(s) = c.binary.intersection(&c.matched).next() {
        return err(
            *s,
            "a single-alternative decision cannot be both an if-guard and a choose scrutinee",
        );
    }
    match ty {
        DapplType::Bool | DapplType::Dist => Ok(TypeInfo {
            ty,
            binary_sites: c.binary,
        }),
        other => err(
            e.span,
            format!("a program must produce a Boolean, not {other}"),
        ),
    }
}

impl Checker {
    fn lookup(&self, x: &str) -> Option<&VarTy> {
        self.env.iter().rev().find(|(n, _)| n == x).map(|(_, t)| t)
    }

    fn pure(&self, p: &Pure) -> Result<()> {
        let mut vs = Vec::new();
        p.free_vars(&mut vs);
        for (x, s) in vs {
            match self.lookup(&x) {
                None => return err(s, format!("unbound variable `{x}`")),
                Some(VarTy::Bool) => {}
                Some(_) => return err(s, format!("`{x}` is a decision, expected Bool")),
            }
        }
        Ok(())
    }

    fn distish(&self, t: &DapplType, span: Span) -> Result<()> {
        match t {
            DapplType::Bool | DapplType::Dist => Ok(()),
            other => err(
                span,
                format!("expected a Boolean computation, found {other}"),
            ),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<DapplType> {
        match &e.kind {
            ExprKind::Pure(p) => {
                self.pure(p)?;
                Ok(DapplType::Bool)
            }
            ExprKind::Return(p) => {
                self.pure(p)?;
                Ok(DapplType::Dist)
            }
            ExprKind::Flip(_) => Ok(DapplType::Dist),
            ExprKind::Reward(_, b) => {
                let t = self.expr(b)?;
                self.distish(&t, b.span)?;
                Ok(DapplType::Dist)
            }
            ExprKind::Observe(p, b) => {
                self.pure(p)?;
                let t = self.expr(b)?;
                self.distish(&t, b.span)?;
                Ok(DapplType::Dist)
            }
            ExprKind::Ite(g, t, f) => {
                let mut guard_done = false;
                if let Pure::Var(x, s) = g {
                    if let Some(VarTy::Choice(names, site)) = self.lookup(x) {
                        if names.len() != 1 {
                            return err(*s, format!("`{x}` has {} alternatives; only a single-alternative decision can guard an if", names.len()));
                        }
                        self.binary.insert(*site);
                        guard_done = true;
                    }
                }
                if !guard_done {
                    self.pure(g)?;
                }
                let a = self.expr(t)?;
                let b = self.expr(f)?;
                join(a, b, e.span)
            }
            ExprKind::Bind(x, rhs, body) => {
                let t = self.expr(rhs)?;
                let vt = match t {
                    DapplType::Bool | DapplType::Dist => VarTy::Bool,
                    DapplType::Choice(_) => match &rhs.kind {
                        ExprKind::Intro(names, _) => VarTy::Choice(names.clone(), rhs.span),
                        ExprKind::Pure(Pure::Var(y, _)) => self.lookup(y).cloned().expect("checked above"),
                        _ => return err(rhs.span, "unsupported: decisions must be bound from a literal or another decision variable"),
                    },
                    DapplType::Categorical(names) => match &rhs.kind {
                        ExprKind::Disc(_) => VarTy::Categorical(names),
                        ExprKind::Pure(Pure::Var(y, _)) => self.lookup(y).cloned().expect("checked above"),
                        _ => return err(rhs.span, "unsupported: categorical values must be bound from disc or another variable"),
                    },
                };
                self.env.push((x.clone(), vt));
                let r = self.expr(body);
                self.env.pop();
                r
            }
            ExprKind::Intro(names, _) => Ok(DapplType::Choice(names.iter().cloned().collect())),
            ExprKind::Disc(cs) => Ok(DapplType::Categorical(
                cs.iter().map(|(n, _)| n.clone()).collect(),
            )),
            ExprKind::Choose(s, arms) => {
                let (names, site): (Vec<String>, Option<Span>) = match &s.kind {
                    ExprKind::Intro(ns, _) => (ns.clone(), Some(s.span)),
                    ExprKind::Disc(cs) => (cs.iter().map(|(n, _)| n.clone()).collect(), None),
                    ExprKind::Pure(Pure::Var(x, sp)) => match self.lookup(x) {
                        Some(VarTy::Choice(ns, site)) => (ns.clone(), Some(*site)),
                        Some(VarTy::Categorical(ns)) => (ns.clone(), None),
                        Some(VarTy::Bool) => return err(*sp, format!("`{x}` is not a decision")),
                        None => return err(*sp, format!("unbound variable `{x}`")),
                    },
                    _ => return err(s.span, "choose scrutinee is not a decision"),
                };
                if let (Some(site), 1) = (site, names.len()) {
                    self.matched.insert(site);
                }
                let want: BTreeSet<&String> = names.iter().collect();
                let have: BTreeSet<&String> = arms.iter().map(|a| &a.name).collect();
                if want != have || have.len() != arms.len() {
                    return err(
                        e.span,
                        format!("arms {:?} do not match alternatives {:?}", have, want),
                    );
                }
                let mut ty: Option<DapplType> = None;
                for a in arms {
                    let t = self.expr(&a.body)?;
                    ty = Some(match ty {
                        None => t,
                        Some(prev) => join(prev, t, a.span)?,
                    });
                }
                Ok(ty.expect("at least one arm"))
            }
            ExprKind::Loop(_, b) => {
                let t = self.expr(b)?;
                self.distish(&t, b.span)?;
                Ok(DapplType::Dist)
            }
        }
    }
}

fn join(a: DapplType, b: DapplType, span: Span) -> Result<DapplType> {
    match (&a, &b) {
        (DapplType::Bool, DapplType::Bool) => Ok(DapplType::Bool),
        (DapplType::Bool | DapplType::Dist, DapplType::Bool | DapplType::Dist) => {
            Ok(DapplType::Dist)
        }
        _ => err(
            span,
            format!("branch types differ or are unsupported: {a} vs {b}"),
        ),
    }
}
