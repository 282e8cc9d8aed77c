use super::ast::{Arm, Expr, ExprKind, Pure};
use crate::error::{Error, Result, Span};
use crate::lexer::{Cursor, Tok};

const KEYWORDS: [&str; 16] = [
    "if", "then", "else", "choose", "with", "flip", "return", "reward", "observe", "loop", "disc",
    "tt", "ff", "true", "false", "in",
];

pub fn parse(src: &str) -> Result<Expr> {
    let mut c = Cursor::new(src)?;
    let e = expr(&mut c)?;
    if !c.at_eof() {
        return c.err(format!("unexpected {}", crate::lexer::describe(c.peek())));
    }
    Ok(e)
}

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn starts_expr(c: &Cursor) -> bool {
    match c.peek() {
        Tok::Ident(s) => !matches!(s.as_str(), "then" | "else" | "with" | "in"),
        Tok::Sym(s) => matches!(*s, "(" | "[" | "!"),
        _ => false,
    }
}

fn expr(c: &mut Cursor) -> Result<Expr> {
    let span = c.span();
    if let (Tok::Ident(x), Tok::Sym("<-")) = (c.peek().clone(), c.peek_at(1).clone()) {
        if is_keyword(&x) {
            return c.err(format!("`{x}` is reserved"));
        }
        c.bump();
        c.bump();
        let rhs = simple(c)?;
        c.expect_sym(";")?;
        let body = expr(c)?;
        return Ok(Expr::new(
            ExprKind::Bind(x, Box::new(rhs), Box::new(body)),
            span,
        ));
    }
    if c.eat_kw("observe") {
        let g = pure(c)?;
        let body = if c.eat_sym(";") || c.eat_kw("in") || starts_expr(c) {
            if starts_expr(c) {
                expr(c)?
            } else {
                Expr::ret(Pure::Const(true), c.span())
            }
        } else {
            Expr::ret(Pure::Const(true), c.span())
        };
        return Ok(Expr::new(ExprKind::Observe(g, Box::new(body)), span));
    }
    let e = simple(c)?;
    if c.eat_sym(";") && starts_expr(c) {
        let rest = expr(c)?;
        return Ok(Expr::new(
            ExprKind::Bind("_".into(), Box::new(e), Box::new(rest)),
            span,
        ));
    }
    Ok(e)
}

fn simple(c: &mut Cursor) -> Result<Expr> {
    let span = c.span();
    match c.peek().clone() {
        Tok::Ident(k) if k == "reward" => {
            c.bump();
            let v = c.expect_num()?;
            if !v.is_finite() {
                return c.err("reward must be finite");
            }
            let body = if starts_expr(c) {
                simple(c)?
            } else {
                Expr::ret(Pure::Const(true), span)
            };
            Ok(Expr::new(ExprKind::Reward(v, Box::new(body)), span))
        }
        Tok::Ident(k) if k == "if" => {
            c.bump();
            let g = pure(c)?;
            c.expect_kw("then")?;
            let t = expr(c)?;
            c.expect_kw("else")?;
            let e = expr(c)?;
            Ok(Expr::new(ExprKind::Ite(g, Box::new(t), Box::new(e)), span))
        }
        Tok::Ident(k) if k == "choose" => {
            c.bump();
            let scrut = match c.peek().clone() {
                Tok::Sym("[") => simple(c)?,
                Tok::Ident(d) if d == "disc" => simple(c)?,
                Tok::Ident(x) if !is_keyword(&x) => {
                    let sp = c.bump().span;
                    Expr::new(ExprKind::Pure(Pure::Var(x, sp)), sp)
                }
                _ => return c.err("expected a choice variable or literal after `choose`"),
            };
            c.eat_kw("with");
            let mut arms = Vec::new();
            while c.eat_sym("|") {
                let (name, sp) = c.expect_ident()?;
                if !(c.eat_sym("->") || c.eat_sym("=>")) {
                    return c.err("expected `->` or `=>`");
                }
                let body = expr(c)?;
                arms.push(Arm {
                    name,
                    body,
                    span: sp,
                });
            }
            if arms.is_empty() {
                return c.err("`choose` needs at least one arm");
            }
            Ok(Expr::new(ExprKind::Choose(Box::new(scrut), arms), span))
        }
        Tok::Ident(k) if k == "flip" => {
            c.bump();
            let t = c.expect_num()?;
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Syntax {
                    span,
                    msg: format!("flip bias {t} outside [0, 1]"),
                });
            }
            Ok(Expr::new(ExprKind::Flip(t), span))
        }
        Tok::Ident(k) if k == "return" => {
            c.bump();
            Ok(Expr::ret(pure(c)?, span))
        }
        Tok::Ident(k) if k == "loop" => {
            c.bump();
            let n = c.expect_num()?;
            if n.fract() != 0.0 || n < 0.0 {
                return Err(Error::Syntax {
                    span,
                    msg: "loop bound must be a nonnegative integer".into(),
                });
            }
            c.expect_sym("{")?;
            let body = expr(c)?;
            c.expect_sym("}")?;
            Ok(Expr::new(ExprKind::Loop(n as u32, Box::new(body)), span))
        }
        Tok::Ident(k) if k == "disc" => {
            c.bump();
            c.expect_sym("[")?;
            let mut entries: Vec<(String, Option<f64>)> = Vec::new();
            loop {
                let (name, sp) = c.expect_ident()?;
                if entries.iter().any(|(n, _)| *n == name) {
                    return Err(Error::Syntax {
                        span: sp,
                        msg: format!("duplicate outcome `{name}`"),
                    });
                }
                let p = if c.eat_sym(":") {
                    Some(c.expect_num()?)
                } else {
                    None
                };
                entries.push((name, p));
                if !c.eat_sym(",") {
                    break;
                }
            }
            c.expect_sym("]")?;
            let n = entries.len() as f64;
            let mut out = Vec::new();
            let all_given = entries.iter().all(|(_, p)| p.is_some());
            let none_given = entries.iter().all(|(_, p)| p.is_none());
            if !all_given && !none_given {
                return Err(Error::Syntax {
                    span,
                    msg: "give a probability for every outcome or for none".into(),
                });
            }
            for (name, p) in entries {
                let p = p.unwrap_or(1.0 / n);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Syntax {
                        span,
                        msg: format!("probability {p} outside [0, 1]"),
                    });
                }
                out.push((name, p));
            }
            Ok(Expr::new(ExprKind::Disc(out), span))
        }
        Tok::Sym("[") => {
            c.bump();
            let mut names: Vec<String> = Vec::new();
            loop {
                let (name, sp) = c.expect_ident()?;
                if names.contains(&name) {
                    return Err(Error::Syntax {
                        span: sp,
                        msg: format!("duplicate alternative `{name}`"),
                    });
                }
                if is_keyword(&name) {
                    return Err(Error::Syntax {
                        span: sp,
                        msg: format!("`{name}` is reserved"),
                    });
                }
                names.push(name);
                if !c.eat_sym(",") {
                    break;
                }
            }
            c.expect_sym("]")?;
            Ok(Expr::new(ExprKind::Intro(names, None), span))
        }
        Tok::Sym("(") => {
            c.bump();
            if c.eat_sym(")") {
                return Ok(Expr::ret(Pure::Const(true), span));
            }
            let inner = expr(c)?;
            c.expect_sym(")")?;
            match inner.kind {
                ExprKind::Pure(p) if c.at_sym("&&") || c.at_sym("||") => {
                    Ok(Expr::new(ExprKind::Pure(pure_rest(c, p)?), span))
                }
                _ => Ok(inner),
            }
        }
        _ => Ok(Expr::new(ExprKind::Pure(pure(c)?), span)),
    }
}

pub(crate) fn pure(c: &mut Cursor) -> Result<Pure> {
    let first = pure_and(c)?;
    pure_or_tail(c, first)
}

fn pure_rest(c: &mut Cursor, left: Pure) -> Result<Pure> {
    let mut acc = left;
    while c.eat_sym("&&") || c.eat_sym("&") {
        acc = Pure::and(acc, pure_not(c)?);
    }
    pure_or_tail(c, acc)
}

fn pure_or_tail(c: &mut Cursor, mut acc: Pure) -> Result<Pure> {
    while c.eat_sym("||") {
        acc = Pure::or(acc, pure_and(c)?);
    }
    Ok(acc)
}

fn pure_and(c: &mut Cursor) -> Result<Pure> {
    let mut acc = pure_not(c)?;
    while c.eat_sym("&&") || c.eat_sym("&") {
        acc = Pure::and(acc, pure_not(c)?);
    }
    Ok(acc)
}

fn pure_not(c: &mut Cursor) -> Result<Pure> {
    if c.eat_sym("!") {
        return Ok(Pure::not(pure_not(c)?));
    }
    let span: Span = c.span();
    match c.peek().clone() {
        Tok::Ident(k) if k == "tt" || k == "true" => {
            c.bump();
            Ok(Pure::Const(true))
        }
        Tok::Ident(k) if k == "ff" || k == "false" => {
            c.bump();
            Ok(Pure::Const(false))
        }
        Tok::Ident(k) if !is_keyword(&k) => {
            c.bump();
            Ok(Pure::Var(k, span))
        }
        Tok::Sym("(") => {
            c.bump();
            let p = pure(c)?;
            c.expect_sym(")")?;
            Ok(p)
        }
        t => c.err(format!(
            "expected a Boolean expression, found {}",
            crate::lexer::describe(&t)
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const UMBRELLA: &str = "rainy <- flip 0.1;
// observe rainy ;
choose [Umb, No_umb]
| Umb -> if rainy then
    reward 10 else reward -5
| No_umb -> if rainy then
    reward -100 else ()";

    fn count(e: &Expr, pred: &dyn Fn(&ExprKind) -> bool) -> usize {
        let own = pred(&e.kind) as usize;
        own + match &e.kind {
            ExprKind::Reward(_, b) | ExprKind::Observe(_, b) | ExprKind::Loop(_, b) => {
                count(b, pred)
            }
            ExprKind::Ite(_, t, f) | ExprKind::Bind(_, t, f) => count(t, pred) + count(f, pred),
            ExprKind::Choose(s, arms) => {
                count(s, pred) + arms.iter().map(|a| count(&a.body, pred)).sum::<usize>()
            }
            _ => 0,
        }
    }

    #[test]
    fn umbrella_shape() {
        let e = parse(UMBRELLA).unwrap();
        assert_eq!(count(&e, &|k| matches!(k, ExprKind::Flip(_))), 1);
        assert_eq!(count(&e, &|k| matches!(k, ExprKind::Choose(..))), 1);
        assert_eq!(count(&e, &|k| matches!(k, ExprKind::Reward(..))), 3);
    }

    #[test]
    fn trailing_reward() {
        let e = parse("reward 5").unwrap();
        match e.kind {
            ExprKind::Reward(k, body) => {
                assert_eq!(k, 5.0);
                assert_eq!(body.kind, ExprKind::Return(Pure::Const(true)));
            }
            _ => panic!("expected reward"),
        }
    }

    #[test]
    fn flip_out_of_range() {
        assert!(matches!(parse("flip 1.5"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn nested_rewards_and_parens() {
        let e = parse("reward 3 (reward 4 (return tt))").unwrap();
        assert_eq!(count(&e, &|k| matches!(k, ExprKind::Reward(..))), 2);
        let p = parse("(x && y) || !z").unwrap();
        assert!(matches!(p.kind, ExprKind::Pure(Pure::Or(..))));
    }

    #[test]
    fn display_round_trips() {
        let e = parse(UMBRELLA).unwrap();
        let again = parse(&e.to_string()).unwrap();
        assert_eq!(e.to_string(), again.to_string());
    }

    #[test]
    fn syntax_error_location() {
        match parse("x <- flip 0.5\nreturn x") {
            Err(Error::Syntax { span, .. }) => assert_eq!(span.line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
