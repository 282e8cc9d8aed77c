//! Bayesian networks as decision problems.
//!
//! Root nodes become decisions; while fewer than four decisions exist, each
//! remaining node becomes a decision with probability 1/2 (repeated passes).
//! Utilities come from one of two strategies: rewards attached to the
//! existing nodes, or five new reward nodes defined by random partial
//! assignments.

use super::{prob, rng};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnVariable {
    pub name: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    /// One row per parent configuration, the first parent varying slowest;
    /// each row is a distribution over `states`.
    pub cpt: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesNet {
    pub variables: Vec<BnVariable>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnStrategy {
    /// Each node pays a reward when true with probability 0.8 and when false
    /// with probability 0.3.
    Existing,
    /// Five reward nodes, each true iff one of five random partial
    /// assignments holds.
    NewNodes,
}

impl FromStr for BnStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "existing" => Ok(BnStrategy::Existing),
            "new_nodes" | "new-nodes" => Ok(BnStrategy::NewNodes),
            _ => Err(Error::Invalid(format!(
                "unknown strategy `{s}` (expected existing or new_nodes)"
            ))),
        }
    }
}

/// Networks shipped with the crate.
pub const BUILTIN: [(&str, &str); 3] = [
    ("earthquake", include_str!("../../data/earthquake.json")),
    ("asia", include_str!("../../data/asia.json")),
    ("survey", include_str!("../../data/survey.json")),
];

impl BayesNet {
    pub fn from_json(s: &str) -> Result<BayesNet> {
        let bn: BayesNet = serde_json::from_str(s)
            .map_err(|e| Error::Invalid(format!("bad network JSON: {e}")))?;
        bn.validate()?;
        Ok(bn)
    }

    pub fn builtin(name: &str) -> Option<BayesNet> {
        BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, s)| BayesNet::from_json(s).expect("built-in networks are valid"))
    }

    fn index(&self) -> Result<BTreeMap<&str, usize>> {
        let mut idx = BTreeMap::new();
        for (i, v) in self.variables.iter().enumerate() {
            if idx.insert(v.name.as_str(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate node {}", v.name)));
            }
        }
        Ok(idx)
    }

    /// Checks parents, CPT shapes and row sums.
    pub fn validate(&self) -> Result<()> {
        let idx = self.index()?;
        for v in &self.variables {
            if v.states.len() < 2 {
                return Err(Error::Invalid(format!(
                    "node {} needs at least two states",
                    v.name
                )));
            }
            let mut rows = 1usize;
            for p in &v.parents {
                let &j = idx.get(p.as_str()).ok_or_else(|| {
                    Error::Invalid(format!("node {} has unknown parent {p}", v.name))
                })?;
                rows *= self.variables[j].states.len();
            }
            if v.cpt.len() != rows {
                return Err(Error::Invalid(format!(
                    "node {} needs {rows} CPT rows, has {}",
                    v.name,
                    v.cpt.len()
                )));
            }
            for row in &v.cpt {
                if row.len() != v.states.len() || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::Invalid(format!(
                        "node {} has a malformed CPT row",
                        v.name
                    )));
                }
                if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid(format!(
                        "a CPT row of node {} does not sum to 1",
                        v.name
                    )));
                }
            }
        }
        self.topo_order().map(|_| ())
    }

    /// Node indices, parents before children; an error on cycles.
    pub fn topo_order(&self) -> Result<Vec<usize>> {
        let idx = self.index()?;
        let n = self.variables.len();
        let mut indeg = vec![0; n];
        let mut children = vec![Vec::new(); n];
        for (i, v) in self.variables.iter().enumerate() {
            for p in &v.parents {
                let j = idx[p.as_str()];
                indeg[i] += 1;
                children[j].push(i);
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &c in children[i].iter().rev() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() < n {
            return Err(Error::Invalid("the network has a cycle".into()));
        }
        Ok(order)
    }

    /// Translates the network into a decision program. The same network,
    /// strategy and seed always give the same text.
    pub fn to_dappl(&self, strategy: BnStrategy, seed: u64) -> Result<String> {
        let order = self.topo_order()?;
        let idx = self.index()?;
        let mut rng = rng(seed);
        let n = self.variables.len();
        let mut decision: Vec<bool> = self
            .variables
            .iter()
            .map(|v| v.parents.is_empty())
            .collect();
        while decision.iter().filter(|&&d| d).count() < 4 && decision.iter().any(|&d| !d) {
            for &i in &order {
                if !decision[i] && rng.gen_bool(0.5) {
                    decision[i] = true;
                }
            }
        }
        let ind = |i: usize, s: usize| -> String {
            if self.variables[i].states.len() == 2 {
                if s == 0 {
                    format!("b{i}")
                } else {
                    format!("!b{i}")
                }
            } else {
                format!("b{i}_{s}")
            }
        };
        let mut out = String::new();
        for &i in &order {
            let v = &self.variables[i];
            let _ = writeln!(out, "// {}: {}", v.name, v.states.join(" "));
            let k = v.states.len();
            if decision[i] {
                let alts: Vec<String> = v
                    .states
                    .iter()
                    .map(|s| format!("{}_{}", sanitize(&v.name), sanitize(s)))
                    .collect();
                let arms = |target: usize| -> String {
                    alts.iter()
                        .enumerate()
                        .map(|(s, a)| {
                            format!(" | {a} -> return {}", if s == target { "tt" } else { "ff" })
                        })
                        .collect()
                };
                if k == 2 {
                    let _ = writeln!(out, "b{i} <- (choose [{}]{});", alts.join(", "), arms(0));
                } else {
                    let _ = writeln!(out, "d{i} <- [{}];", alts.join(", "));
                    for s in 0..k {
                        let _ = writeln!(out, "b{i}_{s} <- (choose d{i}{});", arms(s));
                    }
                }
                continue;
            }
            // Parent configurations, first parent most significant.
            let radix: Vec<usize> = v
                .parents
                .iter()
                .map(|p| self.variables[idx[p.as_str()]].states.len())
                .collect();
            let conds: Vec<String> = (0..v.cpt.len())
                .map(|mut r| {
                    let mut lits = vec![String::new(); radix.len()];
                    for (pi, &m) in radix.iter().enumerate().rev() {
                        lits[pi] = ind(idx[v.parents[pi].as_str()], r % m);
                        r /= m;
                    }
                    conj(&lits)
                })
                .collect();
            let chain = |probs: &[f64]| -> String {
                let mut s = format!("flip {}", prob(*probs.last().unwrap()));
                for (c, p) in conds.iter().zip(probs).rev().skip(1) {
                    s = format!("if {c} then flip {} else ({s})", prob(*p));
                }
                s
            };
            if k == 2 {
                let probs: Vec<f64> = v.cpt.iter().map(|row| row[0]).collect();
                let _ = writeln!(out, "b{i} <- ({});", chain(&probs));
            } else {
                for s in 0..k - 1 {
                    let probs: Vec<f64> = v
                        .cpt
                        .iter()
                        .map(|row| {
                            let rest: f64 = 1.0 - row[..s].iter().sum::<f64>();
                            if rest <= 1e-12 {
                                0.0
                            } else {
                                (row[s] / rest).clamp(0.0, 1.0)
                            }
                        })
                        .collect();
                    if s == 0 {
                        let _ = writeln!(out, "b{i}_0 <- ({});", chain(&probs));
                    } else {
                        let prev: Vec<String> = (0..s).map(|j| format!("b{i}_{j}")).collect();
                        let _ = writeln!(
                            out,
                            "b{i}_{s} <- (if {} then return ff else ({}));",
                            disj(&prev),
                            chain(&probs)
                        );
                    }
                }
                let prev: Vec<String> = (0..k - 1).map(|j| format!("b{i}_{j}")).collect();
                let _ = writeln!(out, "b{i}_{} <- return !{};", k - 1, disj(&prev));
            }
        }
        match strategy {
            BnStrategy::Existing => {
                for i in 0..n {
                    let on = rng.gen_bool(0.8).then(|| rng.gen_range(0..=100));
                    let off = rng.gen_bool(0.3).then(|| rng.gen_range(0..=100));
                    let r = |u: Option<u32>| u.map_or("()".to_string(), |u| format!("reward {u}"));
                    if on.is_some() || off.is_some() {
                        let _ = writeln!(out, "(if {} then {} else {});", ind(i, 0), r(on), r(off));
                    }
                }
            }
            BnStrategy::NewNodes => {
                let nodes: Vec<usize> = (0..n).collect();
                for j in 0..5 {
                    let terms: Vec<String> = (0..5)
                        .map(|_| {
                            let size = rng.gen_range(1..=n.min(3));
                            let mut pick: Vec<usize> =
                                nodes.choose_multiple(&mut rng, size).copied().collect();
                            pick.sort();
                            let lits: Vec<String> = pick
                                .iter()
                                .map(|&i| ind(i, rng.gen_range(0..self.variables[i].states.len())))
                                .collect();
                            conj(&lits)
                        })
                        .collect();
                    let _ = writeln!(out, "rn{j} <- return {};", disj(&terms));
                    let _ = writeln!(
                        out,
                        "(if rn{j} then reward {} else reward {});",
                        rng.gen_range(0..=100),
                        rng.gen_range(0..=100)
                    );
                }
            }
        }
        out += "return tt";
        Ok(out)
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn fold(items: &[String], op: &str, unit: &str) -> String {
    match items {
        [] => unit.into(),
        [x] => x.clone(),
        [x, rest @ ..] => format!("({x} {op} {})", fold(rest, op, unit)),
    }
}

fn conj(items: &[String]) -> String {
    fold(items, "&&", "tt")
}

fn disj(items: &[String]) -> String {
    fold(items, "||", "ff")
}
