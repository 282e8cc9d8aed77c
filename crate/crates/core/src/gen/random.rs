//! Random programs and BBIRs for differential tests.

use super::{formula_to_bdd, prob, rng};
use crate::bbir::{Bbir, MeuObjective};
use crate::bdd::{BddManager, VarId, WeightMap};
use crate::oracle::Formula;
use crate::semiring::ExpectationValue;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn flip_bias(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(1..20) as f64 / 20.0
}

fn reward(rng: &mut ChaCha8Rng) -> i32 {
    rng.gen_range(-100..=100)
}

/// A random Boolean expression over `vars` in the shared surface syntax
/// (`&&`, `||`, `!`, `tt`, `ff`).
fn pure(rng: &mut ChaCha8Rng, vars: &[String], depth: u32) -> String {
    if vars.is_empty() {
        return if rng.gen_bool(0.5) {
            "tt".into()
        } else {
            "ff".into()
        };
    }
    if depth == 0 || rng.gen_bool(0.4) {
        let v = vars.choose(rng).unwrap();
        return if rng.gen_bool(0.3) {
            format!("!{v}")
        } else {
            v.clone()
        };
    }
    let (a, b) = (pure(rng, vars, depth - 1), pure(rng, vars, depth - 1));
    match rng.gen_range(0..3) {
        0 => format!("({a} && {b})"),
        1 => format!("({a} || {b})"),
        _ => format!("!({a} && {b})"),
    }
}

/// A random decision program: at most 8 flips, at most 4 binary choices,
/// integer rewards in [-100, 100], and an observation after each flip with
/// probability 0.3.
pub fn random_dappl(seed: u64) -> String {
    let mut rng = rng(seed);
    let mut flips = rng.gen_range(1..=8);
    let mut choices = rng.gen_range(0..=4);
    let mut vars: Vec<String> = Vec::new();
    let mut out = String::new();
    let mut site = 0;
    let mut steps = 0;
    while (flips > 0 || choices > 0) && steps < 14 {
        steps += 1;
        let x = format!("x{}", vars.len());
        match rng.gen_range(0..10) {
            0..=3 if flips > 0 => {
                flips -= 1;
                out += &format!("{x} <- flip {};\n", prob(flip_bias(&mut rng)));
                vars.push(x);
                if rng.gen_bool(0.3) {
                    out += &format!("observe {};\n", pure(&mut rng, &vars, 1));
                }
            }
            4..=6 if choices > 0 => {
                choices -= 1;
                let (a, b) = (format!("A{site}"), format!("B{site}"));
                site += 1;
                if rng.gen_bool(0.5) {
                    // Choice producing a value.
                    let arm = |rng: &mut ChaCha8Rng, flips: &mut i32| -> String {
                        match rng.gen_range(0..3) {
                            0 if *flips > 0 => {
                                *flips -= 1;
                                format!("flip {}", prob(flip_bias(rng)))
                            }
                            1 => format!("reward {} (return {})", reward(rng), pure(rng, &vars, 1)),
                            _ => format!("return {}", pure(rng, &vars, 1)),
                        }
                    };
                    let (l, r) = (arm(&mut rng, &mut flips), arm(&mut rng, &mut flips));
                    out += &format!("{x} <- (choose [{a}, {b}] | {a} -> {l} | {b} -> {r});\n");
                    vars.push(x);
                } else {
                    let arm = |rng: &mut ChaCha8Rng| -> String {
                        match rng.gen_range(0..3) {
                            0 => format!("reward {}", reward(rng)),
                            1 => format!(
                                "if {} then reward {} else reward {}",
                                pure(rng, &vars, 1),
                                reward(rng),
                                reward(rng)
                            ),
                            _ => "()".into(),
                        }
                    };
                    let (l, r) = (arm(&mut rng), arm(&mut rng));
                    out += &format!("(choose [{a}, {b}] | {a} -> {l} | {b} -> {r});\n");
                }
            }
            7 if !vars.is_empty() => {
                out += &format!("{x} <- return {};\n", pure(&mut rng, &vars, 2));
                vars.push(x);
            }
            _ => {
                let g = pure(&mut rng, &vars, 1);
                out += &format!(
                    "(if {g} then reward {} else reward {});\n",
                    reward(&mut rng),
                    reward(&mut rng)
                );
            }
        }
    }
    if rng.gen_bool(0.8) {
        out += "return tt";
    } else {
        out += &format!("return {}", pure(&mut rng, &vars, 1));
    }
    out
}

struct PGen {
    rng: ChaCha8Rng,
    flips: u32,
    mmaps: u32,
    next: usize,
    /// Names bound by `mmap` statements; they may not appear in evidence.
    decided: Vec<String>,
}

impl PGen {
    fn fresh(&mut self) -> String {
        self.next += 1;
        format!("v{}", self.next - 1)
    }

    fn observable(&self, scope: &[String]) -> Vec<String> {
        scope
            .iter()
            .filter(|x| !self.decided.contains(x))
            .cloned()
            .collect()
    }

    fn evidence(&mut self, scope: &[String]) -> Option<String> {
        let obs = self.observable(scope);
        (!obs.is_empty() && self.rng.gen_bool(0.5)).then(|| {
            let a = pure(&mut self.rng, &obs, 1);
            let b = pure(&mut self.rng, &obs, 1);
            format!("{a} || {b}")
        })
    }

    fn block(
        &mut self,
        scope: &mut Vec<String>,
        depth: u32,
        len: usize,
        pad: &str,
        out: &mut String,
    ) {
        for _ in 0..len {
            self.stmt(scope, depth, pad, out);
        }
    }

    fn stmt(&mut self, scope: &mut Vec<String>, depth: u32, pad: &str, out: &mut String) {
        let kind = self.rng.gen_range(0..10);
        match kind {
            0..=3 if self.flips > 0 => {
                self.flips -= 1;
                let x = self.fresh();
                *out += &format!("{pad}{x} = flip {};\n", prob(flip_bias(&mut self.rng)));
                scope.push(x);
            }
            4..=5 if depth < 3 && !scope.is_empty() => {
                let g = pure(&mut self.rng, scope, 1);
                *out += &format!("{pad}if {g} {{\n");
                let inner = format!("{pad}  ");
                let shared = self.rng.gen_bool(0.5).then(|| self.fresh());
                let mut st = scope.clone();
                let n = self.rng.gen_range(1..=2);
                self.block(&mut st, depth + 1, n, &inner, out);
                if let Some(s) = &shared {
                    *out += &format!("{inner}{s} = {};\n", pure(&mut self.rng, &st, 1));
                }
                *out += &format!("{pad}}} else {{\n");
                let mut se = scope.clone();
                let n = self.rng.gen_range(0..=2);
                self.block(&mut se, depth + 1, n, &inner, out);
                if let Some(s) = &shared {
                    *out += &format!("{inner}{s} = {};\n", pure(&mut self.rng, &se, 1));
                }
                *out += &format!("{pad}}}\n");
                for x in st.into_iter().chain(se) {
                    if !scope.contains(&x) {
                        scope.push(x);
                    }
                }
                if let Some(s) = shared {
                    if !scope.contains(&s) {
                        scope.push(s);
                    }
                }
            }
            6 if self.mmaps > 0 => {
                let obs = self.observable(scope);
                if obs.is_empty() {
                    return;
                }
                self.mmaps -= 1;
                let k = self.rng.gen_range(1..=obs.len().min(2));
                let xs: Vec<String> = obs.choose_multiple(&mut self.rng, k).cloned().collect();
                let ms: Vec<String> = (0..k).map(|_| self.fresh()).collect();
                let ev = self.evidence(scope);
                let lhs = if k == 1 {
                    ms[0].clone()
                } else {
                    format!("({})", ms.join(", "))
                };
                *out += &format!("{pad}{lhs} = mmap({})", xs.join(", "));
                if let Some(e) = ev {
                    *out += &format!(" with {{ {e} }}");
                }
                *out += ";\n";
                self.decided.extend(ms.iter().cloned());
                scope.extend(ms);
            }
            _ if !scope.is_empty() => {
                let x = self.fresh();
                *out += &format!("{pad}{x} = {};\n", pure(&mut self.rng, scope, 2));
                scope.push(x);
            }
            _ => {}
        }
    }
}

/// A random imperative program: at most 10 flips, at most 2 `mmap`
/// statements, `if` nesting at most 3 deep, then 1–3 `pr` queries.
pub fn random_pineappl(seed: u64) -> String {
    let mut g = PGen {
        rng: rng(seed),
        flips: 0,
        mmaps: 0,
        next: 0,
        decided: Vec::new(),
    };
    g.flips = g.rng.gen_range(1..=10);
    g.mmaps = g.rng.gen_range(0..=2);
    let mut scope = Vec::new();
    let mut out = String::new();
    let x = g.fresh();
    g.flips -= 1;
    out += &format!("{x} = flip {};\n", prob(flip_bias(&mut g.rng)));
    scope.push(x);
    let n = g.rng.gen_range(3..=10);
    g.block(&mut scope, 0, n, "", &mut out);
    for _ in 0..g.rng.gen_range(1..=3) {
        let e = pure(&mut g.rng, &scope, 2);
        out += &format!("pr({e})");
        if let Some(ev) = g.evidence(&scope) {
            out += &format!(" with {{ {ev} }}");
        }
        out += "\n";
    }
    out
}

/// Random expression over variables `0..n`.
pub fn random_formula(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.05) {
            Formula::Const(rng.gen_bool(0.5))
        } else {
            Formula::Var(rng.gen_range(0..n))
        };
    }
    let (a, b) = (
        random_formula(rng, n, depth - 1),
        random_formula(rng, n, depth - 1),
    );
    match rng.gen_range(0..6) {
        0 | 1 => Formula::and(a, b),
        2 | 3 => Formula::or(a, b),
        4 => Formula::Xor(Box::new(a), Box::new(b)),
        _ => Formula::not(a),
    }
}

/// A random expected-utility BBIR together with the oracle view of it.
pub struct RandomBbir {
    pub mgr: BddManager,
    pub bbir: Bbir<ExpectationValue>,
    pub objective: MeuObjective,
    pub phi: Formula,
    pub gamma: Formula,
    /// `vars[i]` is the manager variable for oracle variable `i`.
    pub vars: Vec<VarId>,
    /// Literal weights indexed like `vars`.
    pub weights: Vec<(ExpectationValue, ExpectationValue)>,
    /// Oracle indices of the branch variables.
    pub branch: Vec<usize>,
}

/// A random BBIR with at most `max_vars` variables, at most `max_branch` of
/// them branch variables. Chance variables carry flip weights `(θ,0)/(1-θ,0)`
/// or reward weights `(1,k)/(1,0)`; branch variables weigh one on both sides.
pub fn random_bbir(seed: u64, max_vars: usize, max_branch: usize) -> RandomBbir {
    let mut rng = rng(seed);
    let n = rng.gen_range(2..=max_vars.max(2));
    let k = rng.gen_range(1..=max_branch.min(n));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut branch: Vec<usize> = idx[..k].to_vec();
    branch.sort();
    let mut mgr = BddManager::new();
    let vars: Vec<VarId> = (0..n).map(|i| mgr.new_var(&format!("v{i}"))).collect();
    let one = ExpectationValue::new(1.0, 0.0);
    let weights: Vec<(ExpectationValue, ExpectationValue)> = (0..n)
        .map(|i| {
            if branch.contains(&i) {
                (one, one)
            } else if rng.gen_bool(0.6) {
                let t = flip_bias(&mut rng);
                (
                    ExpectationValue::new(t, 0.0),
                    ExpectationValue::new(1.0 - t, 0.0),
                )
            } else {
                (ExpectationValue::new(1.0, reward(&mut rng) as f64), one)
            }
        })
        .collect();
    let mut wm = WeightMap::new();
    for (v, &(p, q)) in vars.iter().zip(&weights) {
        wm.insert(*v, p, q).expect("fresh variables");
    }
    let phi = random_formula(&mut rng, n, 4);
    let gamma = if rng.gen_bool(0.5) {
        Formula::Const(true)
    } else {
        Formula::or(
            random_formula(&mut rng, n, 2),
            random_formula(&mut rng, n, 2),
        )
    };
    let ph = formula_to_bdd(&mut mgr, &phi, &vars);
    let gh = formula_to_bdd(&mut mgr, &gamma, &vars);
    let bbir = Bbir::new(vec![ph, gh], branch.iter().map(|&i| vars[i]).collect(), wm);
    RandomBbir {
        mgr,
        bbir,
        objective: MeuObjective { phi: ph, gamma: gh },
        phi,
        gamma,
        vars,
        weights,
        branch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(random_dappl(3), random_dappl(3));
        assert_eq!(random_pineappl(3), random_pineappl(3));
        assert_ne!(random_dappl(3), random_dappl(4));
    }

    #[test]
    fn generated_programs_parse() {
        for seed in 0..50 {
            let d = random_dappl(seed);
            crate::dappl::desugar::desugar(
                &crate::dappl::parser::parse(&d).unwrap_or_else(|e| panic!("{e}\n{d}")),
            )
            .unwrap_or_else(|e| panic!("{e}\n{d}"));
            let p = random_pineappl(seed);
            crate::pineappl::expand::expand_loops(
                &crate::pineappl::parser::parse(&p).unwrap_or_else(|e| panic!("{e}\n{p}")),
            )
            .unwrap_or_else(|e| panic!("{e}\n{p}"));
        }
    }

    #[test]
    fn bbir_shape() {
        for seed in 0..20 {
            let r = random_bbir(seed, 8, 6);
            assert!(r.vars.len() <= 8 && !r.branch.is_empty() && r.branch.len() <= 6);
            assert_eq!(r.bbir.branch_vars.len(), r.branch.len());
        }
    }
}
