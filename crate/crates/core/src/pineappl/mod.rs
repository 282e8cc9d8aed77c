//! The imperative inference language with first-class marginal MAP.
//!
//! Programs are parsed ([`parser::parse`]), loop-expanded
//! ([`expand::expand_loops`]) and compiled statement by statement
//! ([`compile::CompileState`]); each `mmap` statement is solved as soon as it
//! is reached.

pub mod ast;
pub mod compile;
pub mod expand;
pub mod parser;

use crate::bbir::{SolveOptions, SolveStats};
use crate::bdd::BddManager;
use crate::error::Result;
use compile::{CompileState, Decision, QueryValue};
use serde::Serialize;

#[derive(Clone, Debug, Default)]
pub struct Config {
    pub solve: SolveOptions,
    pub order: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QueryResult {
    pub query: String,
    pub value: QueryValue,
}

#[derive(Clone, Debug, Serialize)]
pub struct PineapplReport {
    pub queries: Vec<QueryResult>,
    /// Staged `mmap` decisions in execution order.
    pub decisions: Vec<Decision>,
    pub stats: SolveStats,
}

/// Parses, expands and compiles a program, leaving the state ready for
/// queries.
pub fn compile_source(src: &str, cfg: &Config) -> Result<(ast::Program, CompileState)> {
    let prog = expand::expand_loops(&parser::parse(src)?)?;
    let mgr = match &cfg.order {
        Some(o) => BddManager::with_order(o.clone()),
        None => BddManager::new(),
    };
    let mut st = CompileState::new(mgr, cfg.solve);
    let t = st.mgr.mk_true();
    st.block(&prog.stmts, t)?;
    Ok((prog, st))
}

pub fn run(src: &str) -> Result<PineapplReport> {
    run_with(src, &Config::default())
}

pub fn run_with(src: &str, cfg: &Config) -> Result<PineapplReport> {
    let start = std::time::Instant::now();
    let (prog, mut st) = compile_source(src, cfg)?;
    let mut queries = Vec::new();
    for q in &prog.queries {
        let value = st.run_query(q)?;
        queries.push(QueryResult {
            query: q.to_string(),
            value,
        });
    }
    let mut stats = st.stats;
    stats.nodes_created = st.mgr.node_count();
    stats.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(PineapplReport {
        queries,
        decisions: st.decisions,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    const DIAGNOSIS: &str = "disease = flip 0.5;
if disease { headache=flip 0.7; }
  else { headache=flip 0.1; }
diagnosis = mmap(disease) with { headache }
if diagnosis && disease { complications=ff; }
  else if diagnosis && !disease { complications=flip 0.4; }
  else if !diagnosis && disease { complications=flip 0.9; }
  else { complications=ff; }
pr(complications)";

    #[test]
    fn diagnosis() {
        let r = run(DIAGNOSIS).unwrap();
        assert!(r.decisions[0].assignment["diagnosis"]);
        // P(disease | headache) = 0.35 / (0.35 + 0.05).
        assert!((r.decisions[0].posterior.unwrap() - 0.875).abs() < 1e-9);
        assert!((r.queries[0].value.probability().unwrap() - 0.2).abs() < 1e-9);
    }

    #[test]
    fn trivial_queries() {
        let r = run("pr(tt)").unwrap();
        assert_eq!(r.queries[0].value.probability(), Some(1.0));
        let r = run("x = flip 0.3; pr(x)").unwrap();
        assert!((r.queries[0].value.probability().unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn impossible_evidence() {
        assert!(matches!(
            run("x = flip 0.3; pr(x) with { x && !x }"),
            Err(Error::ZeroEvidence(_))
        ));
    }

    #[test]
    fn deterministic_mmap() {
        let r = run("x = flip 0.3; y = x || !x; mmap(y)").unwrap();
        match &r.queries[0].value {
            QueryValue::Mmap(a) => {
                assert!(a.assignment["y"]);
                assert!((a.posterior - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nested_template_runs() {
        let src = "m = true;
loop 3 {
  if m {
    x = flip 0.5; y = flip 0.5;
    if x && y { z = flip 0.5; }
    else { z = flip 0.5; }
  } else {
    x = flip 0.5; y = flip 0.5;
    if !x && !y { z = flip 0.5;}
    else { z = flip 0.5; }
  }
  (m) = mmap(z);
}
pr(z)";
        let r = run(src).unwrap();
        assert_eq!(r.decisions.len(), 3);
    }
}
