use super::ast::{PExpr, Program, Query, Stmt};
use crate::error::{Error, Result, Span};
use crate::lexer::{describe, Cursor, Tok};
use std::collections::{BTreeMap, BTreeSet};

const KEYWORDS: [&str; 12] = [
    "if", "else", "flip", "mmap", "with", "pr", "loop", "disc", "tt", "ff", "true", "false",
];

struct Parser {
    c: Cursor,
    /// Categorical variables and their outcomes.
    cats: BTreeMap<String, Vec<String>>,
    /// Names bound by `mmap`, which observations may not mention.
    mmap_bound: BTreeSet<String>,
}

pub fn parse(src: &str) -> Result<Program> {
    let mut p = Parser {
        c: Cursor::new(src)?,
        cats: BTreeMap::new(),
        mmap_bound: BTreeSet::new(),
    };
    let stmts = p.block_until(&|c| c.at_eof() || at_query(c))?;
    let mut queries = Vec::new();
    while !p.c.at_eof() {
        queries.push(p.query()?);
        p.c.eat_sym(";");
    }
    if queries.is_empty() {
        return p.c.err("a program must end with at least one query");
    }
    Ok(Program { stmts, queries })
}

fn at_query(c: &Cursor) -> bool {
    matches!((c.peek(), c.peek_at(1)), (Tok::Ident(k), Tok::Sym("(")) if k == "pr" || k == "mmap")
}

impl Parser {
    fn err<T>(&self, span: Span, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            span,
            msg: msg.into(),
        })
    }

    fn name(&mut self) -> Result<(String, Span)> {
        let (x, sp) = self.c.expect_ident()?;
        if KEYWORDS.contains(&x.as_str()) {
            return self.err(sp, format!("`{x}` is reserved"));
        }
        Ok((x, sp))
    }

    fn block_until(&mut self, stop: &dyn Fn(&Cursor) -> bool) -> Result<Vec<Stmt>> {
        let mut out = Vec::new();
        while !stop(&self.c) {
            self.stmt(&mut out)?;
            while self.c.eat_sym(";") {}
        }
        Ok(out)
    }

    fn braced(&mut self) -> Result<Vec<Stmt>> {
        self.c.expect_sym("{")?;
        let b = self.block_until(&|c| c.at_sym("}") || c.at_eof())?;
        self.c.expect_sym("}")?;
        Ok(b)
    }

    fn evidence(&mut self) -> Result<Option<PExpr>> {
        if !self.c.eat_kw("with") {
            return Ok(None);
        }
        self.c.expect_sym("{")?;
        let sp = self.c.span();
        let e = self.expr()?;
        self.c.expect_sym("}")?;
        let mut vs = BTreeSet::new();
        e.vars(&mut vs);
        if let Some(m) = vs.iter().find(|v| self.mmap_bound.contains(*v)) {
            return self.err(
                sp,
                format!("observation mentions `{m}`, which is bound by mmap"),
            );
        }
        Ok(Some(e))
    }

    fn mmap_args(&mut self) -> Result<Vec<String>> {
        self.c.expect_kw("mmap")?;
        self.c.expect_sym("(")?;
        let mut xs = Vec::new();
        loop {
            let (x, sp) = self.name()?;
            if xs.contains(&x) {
                return self.err(sp, format!("`{x}` listed twice"));
            }
            xs.push(x);
            if !self.c.eat_sym(",") {
                break;
            }
        }
        self.c.expect_sym(")")?;
        Ok(xs)
    }

    fn stmt(&mut self, out: &mut Vec<Stmt>) -> Result<()> {
        let span = self.c.span();
        if self.c.eat_kw("if") {
            out.push(self.if_rest(span)?);
            return Ok(());
        }
        if self.c.eat_kw("loop") {
            let n = self.c.expect_num()?;
            if n.fract() != 0.0 || n < 0.0 {
                return self.err(span, "loop bound must be a nonnegative integer");
            }
            let body = self.braced()?;
            out.push(Stmt::Loop(n as u32, body, span));
            return Ok(());
        }
        if self.c.eat_sym("(") {
            let mut ms = Vec::new();
            loop {
                ms.push(self.name()?.0);
                if !self.c.eat_sym(",") {
                    break;
                }
            }
            self.c.expect_sym(")")?;
            self.c.expect_sym("=")?;
            return self.mmap_stmt(ms, span, out);
        }
        let (x, _) = self.name()?;
        self.c.expect_sym("=")?;
        if self.c.at_kw("mmap") {
            return self.mmap_stmt(vec![x], span, out);
        }
        if self.c.eat_kw("flip") {
            let t = self.c.expect_num()?;
            if !(0.0..=1.0).contains(&t) {
                return self.err(span, format!("flip bias {t} outside [0, 1]"));
            }
            self.cats.remove(&x);
            out.push(Stmt::Flip(x, t, span));
            return Ok(());
        }
        if self.c.eat_kw("disc") {
            return self.disc(x, span, out);
        }
        let e = self.expr()?;
        self.cats.remove(&x);
        out.push(Stmt::Assign(x, e, span));
        Ok(())
    }

    fn mmap_stmt(&mut self, ms: Vec<String>, span: Span, out: &mut Vec<Stmt>) -> Result<()> {
        let xs = self.mmap_args()?;
        if ms.len() != xs.len() {
            return self.err(
                span,
                format!("{} names bound to mmap of {} variables", ms.len(), xs.len()),
            );
        }
        let ev = self.evidence()?;
        for m in &ms {
            self.mmap_bound.insert(m.clone());
        }
        out.push(Stmt::Mmap(ms, xs, ev, span));
        Ok(())
    }

    fn if_rest(&mut self, span: Span) -> Result<Stmt> {
        let g = self.expr()?;
        let then = self.braced()?;
        let els = if self.c.eat_kw("else") {
            if self.c.at_kw("if") {
                let sp = self.c.span();
                self.c.bump();
                vec![self.if_rest(sp)?]
            } else {
                self.braced()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt::If(g, then, els, span))
    }

    /// One-hot indicators `x@a` with nested conditioning; `x is a` reads them.
    fn disc(&mut self, x: String, span: Span, out: &mut Vec<Stmt>) -> Result<()> {
        self.c.expect_sym("[")?;
        let mut entries: Vec<(String, Option<f64>)> = Vec::new();
        loop {
            let (a, sp) = self.c.expect_ident()?;
            if entries.iter().any(|(n, _)| *n == a) {
                return self.err(sp, format!("duplicate outcome `{a}`"));
            }
            let p = if self.c.eat_sym(":") {
                Some(self.c.expect_num()?)
            } else {
                None
            };
            entries.push((a, p));
            if !self.c.eat_sym(",") {
                break;
            }
        }
        self.c.expect_sym("]")?;
        let n = entries.len() as f64;
        if entries.iter().any(|(_, p)| p.is_some()) && entries.iter().any(|(_, p)| p.is_none()) {
            return self.err(span, "give a probability for every outcome or for none");
        }
        let probs: Vec<f64> = entries.iter().map(|(_, p)| p.unwrap_or(1.0 / n)).collect();
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Desugar {
                span,
                msg: format!("disc probabilities sum to {total}, not 1"),
            });
        }
        let mut any: Option<String> = None;
        let mut remaining = 1.0;
        for (i, ((a, _), p)) in entries.iter().zip(&probs).enumerate() {
            let ind = format!("{x}@{a}");
            let last = i + 1 == entries.len();
            match (&any, last) {
                (None, true) => out.push(Stmt::Assign(ind.clone(), PExpr::Const(true), span)),
                (None, false) => out.push(Stmt::Flip(ind.clone(), *p, span)),
                (Some(prev), true) => out.push(Stmt::Assign(
                    ind.clone(),
                    PExpr::not(PExpr::var(prev)),
                    span,
                )),
                (Some(prev), false) => {
                    let q = if remaining > 0.0 {
                        (p / remaining).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    out.push(Stmt::If(
                        PExpr::var(prev),
                        vec![Stmt::Assign(ind.clone(), PExpr::Const(false), span)],
                        vec![Stmt::Flip(ind.clone(), q, span)],
                        span,
                    ));
                }
            }
            remaining -= p;
            if !last {
                let a_name = format!("{x}@any{}", i + 1);
                let val = match &any {
                    None => PExpr::var(&ind),
                    Some(prev) => PExpr::or(PExpr::var(prev), PExpr::var(&ind)),
                };
                out.push(Stmt::Assign(a_name.clone(), val, span));
                any = Some(a_name);
            }
        }
        self.cats
            .insert(x, entries.into_iter().map(|(a, _)| a).collect());
        Ok(())
    }

    fn query(&mut self) -> Result<Query> {
        if self.c.at_kw("mmap") {
            let xs = self.mmap_args()?;
            let ev = self.evidence()?;
            return Ok(Query::Mmap(xs, ev));
        }
        if !self.c.eat_kw("pr") {
            return self.c.err(format!(
                "expected a query, found {}",
                describe(self.c.peek())
            ));
        }
        self.c.expect_sym("(")?;
        let e = self.expr()?;
        self.c.expect_sym(")")?;
        let ev = self.evidence()?;
        Ok(Query::Pr(e, ev))
    }

    fn expr(&mut self) -> Result<PExpr> {
        let mut acc = self.conj()?;
        while self.c.eat_sym("||") {
            acc = PExpr::or(acc, self.conj()?);
        }
        Ok(acc)
    }

    fn conj(&mut self) -> Result<PExpr> {
        let mut acc = self.unary()?;
        while self.c.eat_sym("&&") || self.c.eat_sym("&") {
            acc = PExpr::and(acc, self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<PExpr> {
        if self.c.eat_sym("!") {
            return Ok(PExpr::not(self.unary()?));
        }
        let span = self.c.span();
        match self.c.peek().clone() {
            Tok::Sym("(") => {
                self.c.bump();
                let e = self.expr()?;
                self.c.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(k) if k == "tt" || k == "true" => {
                self.c.bump();
                Ok(PExpr::Const(true))
            }
            Tok::Ident(k) if k == "ff" || k == "false" => {
                self.c.bump();
                Ok(PExpr::Const(false))
            }
            Tok::Ident(_) => {
                let (x, sp) = self.name()?;
                if self.c.eat_kw("is") {
                    let (a, asp) = self.c.expect_ident()?;
                    match self.cats.get(&x) {
                        Some(outs) if outs.contains(&a) => {}
                        Some(_) => return self.err(asp, format!("`{x}` has no outcome `{a}`")),
                        None => {
                            return self.err(sp, format!("`{x}` is not a categorical variable"))
                        }
                    }
                    return Ok(PExpr::Var(format!("{x}@{a}"), sp));
                }
                Ok(PExpr::Var(x, sp))
            }
            t => self.err(
                span,
                format!("expected an expression, found {}", describe(&t)),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const DIAGNOSIS: &str = "disease = flip 0.5;
if disease { headache=flip 0.7; }
  else { headache=flip 0.1; }
diagnosis = mmap(disease) with { headache }
if diagnosis && disease { complications=ff; }
  else if diagnosis && !disease { complications=flip 0.4; }
  else if !diagnosis && disease { complications=flip 0.9; }
  else { complications=ff; }
pr(complications)";

    #[test]
    fn diagnosis_shape() {
        let p = parse(DIAGNOSIS).unwrap();
        assert_eq!(p.stmts.len(), 4);
        assert!(
            matches!(p.stmts[2], Stmt::Mmap(ref ms, ref xs, Some(_), _) if ms == &["diagnosis"] && xs == &["disease"])
        );
        assert_eq!(p.queries.len(), 1);
        assert_eq!(p.queries[0].to_string(), "pr(complications)");
    }

    #[test]
    fn observation_of_mmap_result_rejected() {
        let src = "x = flip 0.5; m = mmap(x); pr(x) with { m }";
        assert!(matches!(parse(src), Err(Error::Syntax { .. })));
    }

    #[test]
    fn query_only() {
        let p = parse("pr(tt)").unwrap();
        assert!(p.stmts.is_empty());
    }

    #[test]
    fn categorical() {
        let p = parse("x = disc[a: 0.5, b: 0.3, c: 0.2]; pr(x is b)").unwrap();
        assert!(matches!(&p.queries[0], Query::Pr(PExpr::Var(n, _), None) if n == "x@b"));
        assert!(parse("x = disc[a: 0.5, b: 0.3]; pr(tt)").is_err());
        assert!(parse("x = disc[a, b]; pr(x is z)").is_err());
    }

    #[test]
    fn tuple_mmap_and_terminal() {
        let p =
            parse("a = flip 0.3; b = flip 0.6; (m, n) = mmap(a, b); mmap(a) with { b }").unwrap();
        assert!(matches!(&p.queries[0], Query::Mmap(xs, Some(_)) if xs == &["a"]));
    }
}
