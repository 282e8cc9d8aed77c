//! The decision-making language: choices, rewards, flips and observations.
//!
//! The pipeline is [`parser::parse`] → [`desugar::desugar`] (which
//! typechecks first) → [`compile::compile`] → [`compile::CompiledDappl::finalize`]
//! → [`crate::bbir::bb`].

pub mod ast;
pub mod compile;
pub mod desugar;
pub mod parser;
pub mod reduce;
pub mod types;

use crate::bbir::{bb, evaluate_objective, Bbir, MeuObjective, Policy, SolveOptions, SolveStats};
use crate::bdd::BddManager;
use crate::error::{Error, Result, Span};
use crate::semiring::ExpectationValue;
use compile::CompiledDappl;
use desugar::Desugared;
use serde::Serialize;
use std::collections::BTreeMap;

/// A program compiled into its own manager.
pub struct Pipeline {
    pub mgr: BddManager,
    pub desugared: Desugared,
    pub compiled: CompiledDappl,
    pub bbir: Bbir<ExpectationValue>,
    pub objective: MeuObjective,
}

#[derive(Clone, Debug, Default)]
pub struct Config {
    pub solve: SolveOptions,
    /// Variable labels to place first in the order.
    pub order: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SiteReport {
    pub label: String,
    pub span: Span,
    pub choice: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeuReport {
    pub meu: f64,
    pub value: ExpectationValue,
    /// Site label → chosen alternative.
    pub policy: BTreeMap<String, String>,
    pub sites: Vec<SiteReport>,
    pub stats: SolveStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl Pipeline {
    pub fn build(src: &str, order: Option<Vec<String>>) -> Result<Pipeline> {
        let expr = parser::parse(src)?;
        let desugared = desugar::desugar(&expr)?;
        let mut mgr = match order {
            Some(o) => BddManager::with_order(o),
            None => BddManager::new(),
        };
        let compiled = compile::compile(&mut mgr, &desugared)?;
        let (bbir, objective) = compiled.finalize(&mut mgr)?;
        Ok(Pipeline {
            mgr,
            desugared,
            compiled,
            bbir,
            objective,
        })
    }

    /// Translates a label-keyed policy to branch-variable values.
    pub fn policy_vars(&self, policy: &BTreeMap<String, String>) -> Result<Policy> {
        let mut out = Policy::new();
        for s in &self.compiled.sites {
            let pick = policy
                .get(&s.site.label)
                .ok_or_else(|| Error::MissingPolicy(s.site.label.clone()))?;
            if !s.site.alternatives.contains(pick) {
                return Err(Error::Invalid(format!(
                    "site {} has no alternative `{pick}`",
                    s.site.label
                )));
            }
            for (a, &v) in s.site.alternatives.iter().zip(&s.vars) {
                out.insert(v, a == pick);
            }
        }
        Ok(out)
    }

    fn decode(&self, witness: &Policy) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for s in &self.compiled.sites {
            for (a, v) in s.site.alternatives.iter().zip(&s.vars) {
                if witness.get(v) == Some(&true) {
                    out.insert(s.site.label.clone(), a.clone());
                }
            }
        }
        out
    }

    /// The expected utility of one total policy, as the compiled AMC ratio.
    pub fn evaluate(&mut self, policy: &BTreeMap<String, String>) -> Result<f64> {
        let p = self.policy_vars(policy)?;
        Ok(evaluate_objective(&mut self.mgr, &self.objective, &self.bbir, &p)?.util)
    }

    pub fn solve(&mut self, opts: SolveOptions) -> Result<MeuReport> {
        let res = bb(&mut self.mgr, &self.objective, &self.bbir, opts)?;
        let policy = self.decode(&res.witness);
        let sites = self
            .compiled
            .sites
            .iter()
            .map(|s| SiteReport {
                label: s.site.label.clone(),
                span: s.site.span,
                choice: policy.get(&s.site.label).cloned().unwrap_or_default(),
            })
            .collect();
        let warning = (res.value.util == f64::NEG_INFINITY).then(|| {
            "every policy contradicts the observations; expected utility is undefined".to_string()
        });
        Ok(MeuReport {
            meu: res.value.util,
            value: res.value,
            policy,
            sites,
            stats: res.stats,
            warning,
        })
    }
}

/// Parses, compiles and solves a program for its maximum expected utility.
pub fn solve_meu(src: &str) -> Result<MeuReport> {
    solve_meu_with(src, &Config::default())
}

pub fn solve_meu_with(src: &str, cfg: &Config) -> Result<MeuReport> {
    Pipeline::build(src, cfg.order.clone())?.solve(cfg.solve)
}
