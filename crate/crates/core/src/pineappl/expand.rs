//! Hygienic loop expansion.
//!
//! Names bound inside a loop get fresh numbered names; later references are
//! rewritten to the most recent binding. After an `if`, every source name
//! whose latest binding differs between the branches is joined with
//! `n_j = (g && then) || (!g && else)`, a missing side falling back to the
//! binding before the `if` (or `ff`).

use super::ast::{PExpr, Program, Query, Stmt};
use crate::error::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};

struct Expander {
    taken: BTreeSet<String>,
    counters: BTreeMap<String, usize>,
}

type Scope = BTreeMap<String, String>;

fn collect_names(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match s {
            Stmt::Assign(x, _, _) | Stmt::Flip(x, _, _) => {
                out.insert(x.clone());
            }
            Stmt::If(_, t, e, _) => {
                collect_names(t, out);
                collect_names(e, out);
            }
            Stmt::Mmap(ms, _, _, _) => out.extend(ms.iter().cloned()),
            Stmt::Loop(_, b, _) => collect_names(b, out),
        }
    }
}

pub fn expand_loops(prog: &Program) -> Result<Program> {
    let mut taken = BTreeSet::new();
    collect_names(&prog.stmts, &mut taken);
    let mut ex = Expander {
        taken,
        counters: BTreeMap::new(),
    };
    let mut scope = Scope::new();
    let mut bound = BTreeSet::new();
    let stmts = ex.block(&prog.stmts, &mut scope, &mut bound, false)?;
    let r = |x: &str| scope.get(x).cloned().unwrap_or_else(|| x.to_string());
    let rn = |e: &PExpr| e.rename(&r);
    let queries = prog
        .queries
        .iter()
        .map(|q| match q {
            Query::Pr(e, ev) => Query::Pr(rn(e), ev.as_ref().map(rn)),
            Query::Mmap(xs, ev) => {
                Query::Mmap(xs.iter().map(|x| r(x)).collect(), ev.as_ref().map(rn))
            }
        })
        .collect();
    Ok(Program { stmts, queries })
}

impl Expander {
    fn fresh(&mut self, base: &str) -> String {
        let c = self.counters.entry(base.to_string()).or_insert(0);
        loop {
            let name = format!("{base}{c}");
            *c += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }

    fn fresh_join(&mut self, base: &str) -> String {
        let first = format!("{base}_j");
        if self.taken.insert(first.clone()) {
            return first;
        }
        self.fresh(&first)
    }

    fn bind(
        &mut self,
        x: &str,
        scope: &mut Scope,
        bound: &mut BTreeSet<String>,
        in_loop: bool,
    ) -> Result<String> {
        let name = if in_loop {
            self.fresh(x)
        } else {
            if bound.contains(x) {
                return Err(Error::DuplicateBinding(x.to_string()));
            }
            x.to_string()
        };
        bound.insert(name.clone());
        scope.insert(x.to_string(), name.clone());
        Ok(name)
    }

    fn block(
        &mut self,
        stmts: &[Stmt],
        scope: &mut Scope,
        bound: &mut BTreeSet<String>,
        in_loop: bool,
    ) -> Result<Vec<Stmt>> {
        let mut out = Vec::new();
        for s in stmts {
            self.stmt(s, scope, bound, in_loop, &mut out)?;
        }
        Ok(out)
    }

    fn stmt(
        &mut self,
        s: &Stmt,
        scope: &mut Scope,
        bound: &mut BTreeSet<String>,
        in_loop: bool,
        out: &mut Vec<Stmt>,
    ) -> Result<()> {
        let rn = |e: &PExpr, scope: &Scope| {
            e.rename(&|x: &str| scope.get(x).cloned().unwrap_or_else(|| x.to_string()))
        };
        match s {
            Stmt::Assign(x, e, sp) => {
                let e = rn(e, scope);
                let n = self.bind(x, scope, bound, in_loop)?;
                out.push(Stmt::Assign(n, e, *sp));
            }
            Stmt::Flip(x, t, sp) => {
                let n = self.bind(x, scope, bound, in_loop)?;
                out.push(Stmt::Flip(n, *t, *sp));
            }
            Stmt::Mmap(ms, xs, ev, sp) => {
                let xs: Vec<String> = xs
                    .iter()
                    .map(|x| scope.get(x).cloned().unwrap_or_else(|| x.clone()))
                    .collect();
                let ev = ev.as_ref().map(|e| rn(e, scope));
                let mut names = Vec::new();
                for m in ms {
                    names.push(self.bind(m, scope, bound, in_loop)?);
                }
                out.push(Stmt::Mmap(names, xs, ev, *sp));
            }
            Stmt::Loop(n, body, sp) => {
                if *n < 1 {
                    return Err(Error::Desugar {
                        span: *sp,
                        msg: "loop bound must be at least 1".into(),
                    });
                }
                for _ in 0..*n {
                    let b = self.block(body, scope, bound, true)?;
                    out.extend(b);
                }
            }
            Stmt::If(g, t, e, sp) => {
                let g = rn(g, scope);
                let (mut st, mut se) = (scope.clone(), scope.clone());
                let (mut bt, mut be) = (bound.clone(), bound.clone());
                let t = self.block(t, &mut st, &mut bt, in_loop)?;
                let e = self.block(e, &mut se, &mut be, in_loop)?;
                out.push(Stmt::If(g.clone(), t, e, *sp));
                bound.extend(bt);
                bound.extend(be);
                let keys: BTreeSet<String> = st.keys().chain(se.keys()).cloned().collect();
                for k in keys {
                    let (a, b) = (st.get(&k), se.get(&k));
                    if a == b {
                        scope.insert(k.clone(), a.expect("present on one side").clone());
                        continue;
                    }
                    let side = |v: Option<&String>| match v.or(scope.get(&k)) {
                        Some(n) => PExpr::var(n),
                        None => PExpr::Const(false),
                    };
                    let def = PExpr::or(
                        PExpr::and(g.clone(), side(a)),
                        PExpr::and(PExpr::not(g.clone()), side(b)),
                    );
                    let j = self.fresh_join(&k);
                    bound.insert(j.clone());
                    out.push(Stmt::Assign(j.clone(), def, *sp));
                    scope.insert(k, j);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pineappl::parser::parse;

    fn names(stmts: &[Stmt]) -> Vec<String> {
        let mut v = Vec::new();
        for s in stmts {
            match s {
                Stmt::Assign(x, _, _) | Stmt::Flip(x, _, _) => v.push(x.clone()),
                Stmt::If(_, t, e, _) => {
                    v.extend(names(t));
                    v.extend(names(e));
                }
                Stmt::Mmap(ms, _, _, _) => v.extend(ms.iter().cloned()),
                Stmt::Loop(..) => v.push("<loop>".into()),
            }
        }
        v
    }

    #[test]
    fn simple_loop() {
        let p = parse("a = flip 0.5; loop 3 { tmp = flip 0.1; a = a || tmp; } pr(a)").unwrap();
        let e = expand_loops(&p).unwrap();
        assert_eq!(
            names(&e.stmts),
            ["a", "tmp0", "a0", "tmp1", "a1", "tmp2", "a2"]
        );
        let Stmt::Assign(_, def, _) = &e.stmts[2] else {
            panic!()
        };
        assert_eq!(def.to_string(), "(a || tmp0)");
        assert_eq!(e.queries[0].to_string(), "pr(a2)");
    }

    #[test]
    fn loops_in_branches_get_join_points() {
        let src = "x = flip 0.5; y = flip 0.5;
            if x { loop 2 { tmp = flip 0.3; y = y && tmp; } }
            else { loop 3 { tmp = flip 0.7; y = y || tmp; } }
            pr(y)";
        let e = expand_loops(&parse(src).unwrap()).unwrap();
        assert_eq!(
            names(&e.stmts),
            [
                "x", "y", "tmp0", "y0", "tmp1", "y1", "tmp2", "y2", "tmp3", "y3", "tmp4", "y4",
                "tmp_j", "y_j"
            ]
        );
        let Stmt::Assign(_, def, _) = &e.stmts[4] else {
            panic!()
        };
        assert_eq!(def.to_string(), "((x && y1) || (!x && y4))");
        assert_eq!(e.queries[0].to_string(), "pr(y_j)");
    }

    #[test]
    fn duplicate_outside_loops() {
        assert!(matches!(
            expand_loops(&parse("x = flip 0.5; x = flip 0.2; pr(x)").unwrap()),
            Err(Error::DuplicateBinding(_))
        ));
        // Sibling branches may both bind a name.
        assert!(expand_loops(
            &parse("x = flip 0.5; if x { y = tt; } else { y = ff; } pr(y)").unwrap()
        )
        .is_ok());
    }

    #[test]
    fn single_iteration() {
        let e = expand_loops(&parse("loop 1 { z = flip 0.5; } pr(z)").unwrap()).unwrap();
        assert_eq!(names(&e.stmts), ["z0"]);
        assert!(expand_loops(&parse("loop 0 { z = flip 0.5; } pr(tt)").unwrap()).is_err());
    }
}
