use crate::error::Span;
use std::fmt;

/// Pure Boolean expressions.
#[derive(Clone, Debug, PartialEq)]
pub enum Pure {
    Var(String, Span),
    Const(bool),
    And(Box<Pure>, Box<Pure>),
    Or(Box<Pure>, Box<Pure>),
    Not(Box<Pure>),
}

impl Pure {
    pub fn var(name: &str) -> Pure {
        Pure::Var(name.to_string(), Span::default())
    }
    pub fn and(a: Pure, b: Pure) -> Pure {
        Pure::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Pure, b: Pure) -> Pure {
        Pure::Or(Box::new(a), Box::new(b))
    }
    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Pure) -> Pure {
        Pure::Not(Box::new(a))
    }

    pub fn free_vars(&self, out: &mut Vec<(String, Span)>) {
        match self {
            Pure::Var(x, s) => out.push((x.clone(), *s)),
            Pure::Const(_) => {}
            Pure::And(a, b) | Pure::Or(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Pure::Not(a) => a.free_vars(out),
        }
    }
}

impl fmt::Display for Pure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pure::Var(x, _) => write!(f, "{x}"),
            Pure::Const(true) => write!(f, "tt"),
            Pure::Const(false) => write!(f, "ff"),
            Pure::And(a, b) => write!(f, "({a} && {b})"),
            Pure::Or(a, b) => write!(f, "({a} || {b})"),
            Pure::Not(a) => write!(f, "!{a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arm {
    pub name: String,
    pub body: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    /// A pure value used as an expression.
    Pure(Pure),
    Return(Pure),
    Flip(f64),
    Reward(f64, Box<Expr>),
    Ite(Pure, Box<Expr>, Box<Expr>),
    Bind(String, Box<Expr>, Box<Expr>),
    Observe(Pure, Box<Expr>),
    /// Choice introduction `[a, b, ...]`; desugaring assigns the site index.
    Intro(Vec<String>, Option<usize>),
    /// `choose s | a -> e | ...`; the scrutinee is a variable after
    /// desugaring.
    Choose(Box<Expr>, Vec<Arm>),
    /// Categorical distribution `disc[a: p, ...]`.
    Disc(Vec<(String, f64)>),
    Loop(u32, Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }
    pub fn ret(p: Pure, span: Span) -> Expr {
        Expr::new(ExprKind::Return(p), span)
    }
    pub fn bind(x: &str, e: Expr, body: Expr) -> Expr {
        let span = e.span;
        Expr::new(
            ExprKind::Bind(x.to_string(), Box::new(e), Box::new(body)),
            span,
        )
    }
}

/// Parenthesized concrete syntax that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Pure(p) => write!(f, "{p}"),
            ExprKind::Return(p) => write!(f, "return {p}"),
            ExprKind::Flip(t) => write!(f, "flip {t}"),
            ExprKind::Reward(k, e) => write!(f, "reward {k} ({e})"),
            ExprKind::Ite(g, t, e) => write!(f, "if {g} then ({t}) else ({e})"),
            ExprKind::Bind(x, e, b) => write!(f, "{x} <- ({e});\n{b}"),
            ExprKind::Observe(p, e) => write!(f, "observe {p}; ({e})"),
            ExprKind::Intro(ns, _) => write!(f, "[{}]", ns.join(", ")),
            ExprKind::Choose(s, arms) => {
                write!(f, "(choose {s}")?;
                for a in arms {
                    write!(f, " | {} -> ({})", a.name, a.body)?;
                }
                write!(f, ")")
            }
            ExprKind::Disc(cs) => {
                let parts: Vec<String> = cs.iter().map(|(n, p)| format!("{n}: {p}")).collect();
                write!(f, "disc[{}]", parts.join(", "))
            }
            ExprKind::Loop(n, e) => write!(f, "loop {n} {{ {e} }}"),
        }
    }
}

/// The choice-free fragment produced by policy reduction.
#[derive(Clone, Debug, PartialEq)]
pub enum UtilExpr {
    Return(Pure),
    Flip(f64),
    Reward(f64, Box<UtilExpr>),
    Ite(Pure, Box<UtilExpr>, Box<UtilExpr>),
    Bind(String, Box<UtilExpr>, Box<UtilExpr>),
    Observe(Pure, Box<UtilExpr>),
}

impl fmt::Display for UtilExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilExpr::Return(p) => write!(f, "return {p}"),
            UtilExpr::Flip(t) => write!(f, "flip {t}"),
            UtilExpr::Reward(k, e) => write!(f, "reward {k} ({e})"),
            UtilExpr::Ite(g, t, e) => write!(f, "if {g} then ({t}) else ({e})"),
            UtilExpr::Bind(x, e, b) => write!(f, "{x} <- ({e}); {b}"),
            UtilExpr::Observe(p, e) => write!(f, "observe {p}; ({e})"),
        }
    }
}
