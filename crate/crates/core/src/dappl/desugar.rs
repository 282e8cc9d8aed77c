//! Removes surface sugar: loops, categorical distributions, non-variable
//! guards, and choice literals outside a binding. Every choice literal that
//! survives is bound to a fresh name and numbered as a site.

use super::ast::{Arm, Expr, ExprKind, Pure};
use super::types::check;
use crate::error::{Error, Result, Span};
use std::collections::BTreeSet;

const DISC_EPS: f64 = 1e-9;

/// A decision point: one choice literal after expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    /// `c0`, `c1`, ... in source order.
    pub label: String,
    pub span: Span,
    pub alternatives: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Desugared {
    pub expr: Expr,
    pub sites: Vec<Site>,
}

#[derive(Clone, Debug)]
enum Binding {
    Bool,
    Choice {
        site: usize,
        name: String,
    },
    /// Indicator variable per outcome, in declaration order.
    Cat(Vec<(String, String)>),
}

struct Desugarer {
    env: Vec<(String, Binding)>,
    sites: Vec<Site>,
    binary: BTreeSet<Span>,
    fresh: usize,
}

/// Typechecks and desugars a program.
pub fn desugar(e: &Expr) -> Result<Desugared> {
    let info = check(e)?;
    let mut d = Desugarer {
        env: Vec::new(),
        sites: Vec::new(),
        binary: info.binary_sites,
        fresh: 0,
    };
    let expr = d.expr(e)?;
    Ok(Desugared {
        expr,
        sites: d.sites,
    })
}

fn derr<T>(span: Span, msg: impl Into<String>) -> Result<T> {
    Err(Error::Desugar {
        span,
        msg: msg.into(),
    })
}

fn var(name: &str, span: Span) -> Pure {
    Pure::Var(name.to_string(), span)
}

impl Desugarer {
    fn fresh(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("%{prefix}{}", self.fresh)
    }

    fn lookup(&self, x: &str) -> Option<&Binding> {
        self.env.iter().rev().find(|(n, _)| n == x).map(|(_, b)| b)
    }

    fn with<T>(
        &mut self,
        x: &str,
        b: Binding,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        self.env.push((x.to_string(), b));
        let r = f(self);
        self.env.pop();
        r
    }

    fn new_site(&mut self, names: &[String], span: Span) -> usize {
        let alternatives = if names.len() == 1 && self.binary.contains(&span) {
            vec![names[0].clone(), format!("!{}", names[0])]
        } else {
            names.to_vec()
        };
        let k = self.sites.len();
        self.sites.push(Site {
            label: format!("c{k}"),
            span,
            alternatives,
        });
        k
    }

    fn expr(&mut self, e: &Expr) -> Result<Expr> {
        let span = e.span;
        let mk = |kind| Expr::new(kind, span);
        Ok(match &e.kind {
            ExprKind::Pure(_) | ExprKind::Return(_) | ExprKind::Flip(_) => e.clone(),
            ExprKind::Reward(k, b) => mk(ExprKind::Reward(*k, Box::new(self.expr(b)?))),
            ExprKind::Observe(g, b) => {
                let body = self.expr(b)?;
                match g {
                    Pure::Var(..) => mk(ExprKind::Observe(g.clone(), Box::new(body))),
                    _ => {
                        let n = self.fresh("g");
                        let obs = mk(ExprKind::Observe(var(&n, span), Box::new(body)));
                        Expr::bind(&n, Expr::ret(g.clone(), span), obs)
                    }
                }
            }
            ExprKind::Ite(g, t, f) => {
                if let Pure::Var(x, _) = g {
                    if let Some(Binding::Choice { site, name }) = self.lookup(x).cloned() {
                        let alts = self.sites[site].alternatives.clone();
                        let arms = vec![
                            Arm {
                                name: alts[0].clone(),
                                body: self.expr(t)?,
                                span: t.span,
                            },
                            Arm {
                                name: alts[1].clone(),
                                body: self.expr(f)?,
                                span: f.span,
                            },
                        ];
                        return Ok(mk(ExprKind::Choose(
                            Box::new(Expr::new(ExprKind::Pure(var(&name, span)), span)),
                            arms,
                        )));
                    }
                }
                let (t, f) = (self.expr(t)?, self.expr(f)?);
                match g {
                    Pure::Var(..) => mk(ExprKind::Ite(g.clone(), Box::new(t), Box::new(f))),
                    _ => {
                        let n = self.fresh("g");
                        let ite = mk(ExprKind::Ite(var(&n, span), Box::new(t), Box::new(f)));
                        Expr::bind(&n, Expr::ret(g.clone(), span), ite)
                    }
                }
            }
            ExprKind::Bind(x, rhs, body) => match &rhs.kind {
                ExprKind::Intro(names, _) => {
                    let site = self.new_site(names, rhs.span);
                    let name = format!("%c{site}");
                    let alts = self.sites[site].alternatives.clone();
                    let body = self.with(
                        x,
                        Binding::Choice {
                            site,
                            name: name.clone(),
                        },
                        |d| d.expr(body),
                    )?;
                    Expr::bind(
                        &name,
                        Expr::new(ExprKind::Intro(alts, Some(site)), rhs.span),
                        body,
                    )
                }
                ExprKind::Pure(Pure::Var(y, _))
                    if !matches!(self.lookup(y), Some(Binding::Bool) | None) =>
                {
                    let b = self.lookup(y).cloned().expect("checked");
                    self.with(x, b, |d| d.expr(body))?
                }
                ExprKind::Disc(cs) => {
                    let (inds, wrap) = self.indicators(cs, rhs.span)?;
                    let body = self.with(x, Binding::Cat(inds), |d| d.expr(body))?;
                    wrap(body)
                }
                _ => {
                    let rhs = self.expr(rhs)?;
                    let body = self.with(x, Binding::Bool, |d| d.expr(body))?;
                    Expr::bind(x, rhs, body)
                }
            },
            ExprKind::Intro(names, _) => {
                // A choice literal in value position behaves as `return tt`
                // but still introduces a decision.
                let site = self.new_site(names, span);
                let alts = self.sites[site].alternatives.clone();
                mk(ExprKind::Intro(alts, Some(site)))
            }
            ExprKind::Disc(cs) => {
                let (_, wrap) = self.indicators(cs, span)?;
                wrap(Expr::ret(Pure::Const(true), span))
            }
            ExprKind::Choose(s, arms) => match &s.kind {
                ExprKind::Intro(names, _) => {
                    let site = self.new_site(names, s.span);
                    let name = format!("%c{site}");
                    let alts = self.sites[site].alternatives.clone();
                    let arms = self.ordered_arms(arms, &alts)?;
                    let choose = mk(ExprKind::Choose(
                        Box::new(Expr::new(ExprKind::Pure(var(&name, s.span)), s.span)),
                        arms,
                    ));
                    Expr::bind(
                        &name,
                        Expr::new(ExprKind::Intro(alts, Some(site)), s.span),
                        choose,
                    )
                }
                ExprKind::Disc(cs) => {
                    let (inds, wrap) = self.indicators(cs, s.span)?;
                    let body = self.categorical_choose(&inds, arms, span)?;
                    wrap(body)
                }
                ExprKind::Pure(Pure::Var(x, sp)) => match self.lookup(x).cloned() {
                    Some(Binding::Choice { site, name }) => {
                        let alts = self.sites[site].alternatives.clone();
                        let arms = self.ordered_arms(arms, &alts)?;
                        mk(ExprKind::Choose(
                            Box::new(Expr::new(ExprKind::Pure(var(&name, *sp)), *sp)),
                            arms,
                        ))
                    }
                    Some(Binding::Cat(inds)) => self.categorical_choose(&inds, arms, span)?,
                    _ => return derr(*sp, format!("`{x}` is not a decision")),
                },
                _ => return derr(s.span, "choose scrutinee is not a decision"),
            },
            ExprKind::Loop(n, b) => {
                if *n < 1 {
                    return derr(span, "loop bound must be at least 1");
                }
                let mut copies = Vec::new();
                for _ in 0..*n {
                    copies.push(self.expr(b)?);
                }
                let mut acc = copies.pop().expect("n >= 1");
                while let Some(c) = copies.pop() {
                    acc = Expr::bind("_", c, acc);
                }
                acc
            }
        })
    }

    fn ordered_arms(&mut self, arms: &[Arm], alts: &[String]) -> Result<Vec<Arm>> {
        let mut out = Vec::new();
        for a in alts {
            let arm = arms.iter().find(|x| &x.name == a).expect("typechecked");
            out.push(Arm {
                name: a.clone(),
                body: self.expr(&arm.body)?,
                span: arm.span,
            });
        }
        Ok(out)
    }

    /// `if i_1 then e_1 else if i_2 then e_2 ... else e_n`.
    fn categorical_choose(
        &mut self,
        inds: &[(String, String)],
        arms: &[Arm],
        span: Span,
    ) -> Result<Expr> {
        let mut bodies = Vec::new();
        for (outcome, ind) in inds {
            let arm = arms
                .iter()
                .find(|a| &a.name == outcome)
                .expect("typechecked");
            bodies.push((ind.clone(), self.expr(&arm.body)?));
        }
        let (_, mut acc) = bodies.pop().expect("nonempty");
        while let Some((ind, body)) = bodies.pop() {
            acc = Expr::new(
                ExprKind::Ite(var(&ind, span), Box::new(body), Box::new(acc)),
                span,
            );
        }
        Ok(acc)
    }

    /// One-hot indicators for a categorical distribution. Returns the
    /// (outcome, indicator) pairs and a wrapper that binds them around a body.
    #[allow(clippy::type_complexity)]
    fn indicators(
        &mut self,
        cs: &[(String, f64)],
        span: Span,
    ) -> Result<(Vec<(String, String)>, Box<dyn FnOnce(Expr) -> Expr>)> {
        let total: f64 = cs.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > DISC_EPS {
            return derr(span, format!("disc probabilities sum to {total}, not 1"));
        }
        let mut binds: Vec<(String, Expr)> = Vec::new();
        let mut inds = Vec::new();
        let mut any: Option<String> = None;
        let mut remaining = 1.0;
        for (i, (outcome, p)) in cs.iter().enumerate() {
            let ind = self.fresh("d");
            let last = i + 1 == cs.len();
            let rhs = match (&any, last) {
                (None, true) => Expr::ret(Pure::Const(true), span),
                (None, false) => Expr::new(ExprKind::Flip(*p), span),
                (Some(a), true) => Expr::ret(Pure::not(var(a, span)), span),
                (Some(a), false) => {
                    let q = if remaining > 0.0 {
                        (p / remaining).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    Expr::new(
                        ExprKind::Ite(
                            var(a, span),
                            Box::new(Expr::ret(Pure::Const(false), span)),
                            Box::new(Expr::new(ExprKind::Flip(q), span)),
                        ),
                        span,
                    )
                }
            };
            remaining -= p;
            binds.push((ind.clone(), rhs));
            if !last {
                let a = self.fresh("any");
                let val = match &any {
                    None => var(&ind, span),
                    Some(prev) => Pure::or(var(prev, span), var(&ind, span)),
                };
                binds.push((a.clone(), Expr::ret(val, span)));
                any = Some(a);
            }
            inds.push((outcome.clone(), ind));
        }
        // The guard on `any` goes through a variable already, so no further
        // normalization is needed.
        let wrap = move |body: Expr| {
            binds
                .into_iter()
                .rev()
                .fold(body, |acc, (x, rhs)| Expr::bind(&x, rhs, acc))
        };
        Ok((inds, Box::new(wrap)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dappl::parser::parse;

    fn has(e: &Expr, pred: &dyn Fn(&ExprKind) -> bool) -> bool {
        pred(&e.kind)
            || match &e.kind {
                ExprKind::Reward(_, b) | ExprKind::Observe(_, b) | ExprKind::Loop(_, b) => {
                    has(b, pred)
                }
                ExprKind::Ite(_, t, f) | ExprKind::Bind(_, t, f) => has(t, pred) || has(f, pred),
                ExprKind::Choose(s, arms) => {
                    has(s, pred) || arms.iter().any(|a| has(&a.body, pred))
                }
                _ => false,
            }
    }

    #[test]
    fn removes_sugar() {
        let src = "x <- disc[a: 0.5, b: 0.3, c: 0.2]; loop 2 { choose x | a -> reward 1 | b -> reward 2 | c -> () }";
        let d = desugar(&parse(src).unwrap()).unwrap();
        assert!(!has(&d.expr, &|k| matches!(
            k,
            ExprKind::Disc(_) | ExprKind::Loop(..) | ExprKind::Choose(..)
        )));
        assert!(d.sites.is_empty());
    }

    #[test]
    fn guards_are_variables() {
        let d = desugar(
            &parse("x <- flip 0.5; y <- flip 0.5; if x && y then reward 1 else ()").unwrap(),
        )
        .unwrap();
        assert!(!has(
            &d.expr,
            &|k| matches!(k, ExprKind::Ite(g, _, _) if !matches!(g, Pure::Var(..)))
        ));
    }

    #[test]
    fn sites_are_numbered_per_loop_copy() {
        let d =
            desugar(&parse("loop 3 { choose [a, b] | a -> reward 1 | b -> reward 2 }").unwrap())
                .unwrap();
        let labels: Vec<_> = d.sites.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["c0", "c1", "c2"]);
    }

    #[test]
    fn binary_site_for_guard() {
        let d = desugar(&parse("c <- [go]; if c then reward 3 else reward 1").unwrap()).unwrap();
        assert_eq!(d.sites[0].alternatives, ["go", "!go"]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            desugar(&parse("loop 0 { reward 1 }").unwrap()),
            Err(Error::Desugar { .. })
        ));
        assert!(matches!(
            desugar(&parse("x <- disc[a: 0.5, b: 0.4]; tt").unwrap()),
            Err(Error::Desugar { .. })
        ));
    }
}
