use crate::error::Span;
use std::collections::BTreeSet;
use std::fmt;

/// Boolean expressions over program variables.
#[derive(Clone, Debug, PartialEq)]
pub enum PExpr {
    Var(String, Span),
    Const(bool),
    And(Box<PExpr>, Box<PExpr>),
    Or(Box<PExpr>, Box<PExpr>),
    Not(Box<PExpr>),
}

impl PExpr {
    pub fn var(x: &str) -> PExpr {
        PExpr::Var(x.to_string(), Span::default())
    }
    pub fn and(a: PExpr, b: PExpr) -> PExpr {
        PExpr::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: PExpr, b: PExpr) -> PExpr {
        PExpr::Or(Box::new(a), Box::new(b))
    }
    #[allow(clippy::should_implement_trait)]
    pub fn not(a: PExpr) -> PExpr {
        PExpr::Not(Box::new(a))
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            PExpr::Var(x, _) => {
                out.insert(x.clone());
            }
            PExpr::Const(_) => {}
            PExpr::And(a, b) | PExpr::Or(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            PExpr::Not(a) => a.vars(out),
        }
    }

    /// Renames free variables.
    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> PExpr {
        match self {
            PExpr::Var(x, s) => PExpr::Var(f(x), *s),
            PExpr::Const(b) => PExpr::Const(*b),
            PExpr::And(a, b) => PExpr::and(a.rename(f), b.rename(f)),
            PExpr::Or(a, b) => PExpr::or(a.rename(f), b.rename(f)),
            PExpr::Not(a) => PExpr::not(a.rename(f)),
        }
    }

    pub fn eval(&self, env: &dyn Fn(&str) -> bool) -> bool {
        match self {
            PExpr::Var(x, _) => env(x),
            PExpr::Const(b) => *b,
            PExpr::And(a, b) => a.eval(env) && b.eval(env),
            PExpr::Or(a, b) => a.eval(env) || b.eval(env),
            PExpr::Not(a) => !a.eval(env),
        }
    }
}

impl fmt::Display for PExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PExpr::Var(x, _) => write!(f, "{x}"),
            PExpr::Const(true) => write!(f, "tt"),
            PExpr::Const(false) => write!(f, "ff"),
            PExpr::And(a, b) => write!(f, "({a} && {b})"),
            PExpr::Or(a, b) => write!(f, "({a} || {b})"),
            PExpr::Not(a) => write!(f, "!{a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Assign(String, PExpr, Span),
    Flip(String, f64, Span),
    If(PExpr, Vec<Stmt>, Vec<Stmt>, Span),
    /// `(m1, ..) = mmap(x1, ..) [with { e }]`
    Mmap(Vec<String>, Vec<String>, Option<PExpr>, Span),
    Loop(u32, Vec<Stmt>, Span),
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Assign(_, _, s)
            | Stmt::Flip(_, _, s)
            | Stmt::If(_, _, _, s)
            | Stmt::Mmap(_, _, _, s)
            | Stmt::Loop(_, _, s) => *s,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    Pr(PExpr, Option<PExpr>),
    /// Marginal MAP of the listed variables at the end of the program.
    Mmap(Vec<String>, Option<PExpr>),
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (head, ev) = match self {
            Query::Pr(e, ev) => (format!("pr({e})"), ev),
            Query::Mmap(xs, ev) => (format!("mmap({})", xs.join(", ")), ev),
        };
        match ev {
            Some(e) => write!(f, "{head} with {{ {e} }}"),
            None => write!(f, "{head}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub stmts: Vec<Stmt>,
    pub queries: Vec<Query>,
}

fn write_block(f: &mut fmt::Formatter<'_>, stmts: &[Stmt], indent: usize) -> fmt::Result {
    let pad = "  ".repeat(indent);
    for s in stmts {
        match s {
            Stmt::Assign(x, e, _) => writeln!(f, "{pad}{x} = {e};")?,
            Stmt::Flip(x, t, _) => writeln!(f, "{pad}{x} = flip {t};")?,
            Stmt::If(g, t, e, _) => {
                writeln!(f, "{pad}if {g} {{")?;
                write_block(f, t, indent + 1)?;
                writeln!(f, "{pad}}} else {{")?;
                write_block(f, e, indent + 1)?;
                writeln!(f, "{pad}}}")?;
            }
            Stmt::Mmap(ms, xs, ev, _) => {
                write!(f, "{pad}({}) = mmap({})", ms.join(", "), xs.join(", "))?;
                match ev {
                    Some(e) => writeln!(f, " with {{ {e} }};")?,
                    None => writeln!(f, ";")?,
                }
            }
            Stmt::Loop(n, b, _) => {
                writeln!(f, "{pad}loop {n} {{")?;
                write_block(f, b, indent + 1)?;
                writeln!(f, "{pad}}}")?;
            }
        }
    }
    Ok(())
}

/// Concrete syntax. Categorical sugar is expanded by the parser, so its
/// indicator names (`x@a`) do not reparse.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_block(f, &self.stmts, 0)?;
        for q in &self.queries {
            writeln!(f, "{q}")?;
        }
        Ok(())
    }
}
