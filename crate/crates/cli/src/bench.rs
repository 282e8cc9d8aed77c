//! Benchmark sweeps over the generated families.

use crate::report::{CliError, CliResult};
use crate::BenchArgs;
use bbopt_core::gen::{gen_dr, gen_gridworld, gen_ladder, gen_nested_mmap, BayesNet, BnStrategy};
use bbopt_core::{dappl, oracle, pineappl};
use clap::ValueEnum;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::sync::mpsc;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Bn,
    Dr,
    Ladder,
    Gridworld,
    NestedMmap,
}

#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub family: String,
    pub params: String,
    pub seed: u64,
    pub value: Option<f64>,
    pub policy_hash: String,
    pub nodes: usize,
    pub prunes: u64,
    pub time_ms: f64,
    pub status: String,
}

struct Instance {
    family: Family,
    n: usize,
    params: String,
    seed: u64,
    /// Generator failures become error rows rather than aborting the sweep.
    src: Result<String, String>,
}

struct Solved {
    value: f64,
    witness: String,
    nodes: usize,
    prunes: u64,
    /// `Some(false)` when the oracle disagrees.
    agrees: Option<bool>,
}

fn family_name(f: Family) -> String {
    f.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

fn instances(a: &BenchArgs) -> CliResult<Vec<Instance>> {
    let mut out = Vec::new();
    for n in a.from..=a.to {
        for seed in 0..a.seeds {
            let (params, src) = match a.family {
                Family::Dr => (format!("n={n}"), gen_dr(n, seed)),
                Family::Ladder => (format!("n={n};k={}", a.k), gen_ladder(n, a.k, seed)),
                Family::Gridworld => (
                    format!("dim={n};horizon={}", a.horizon),
                    gen_gridworld(n, a.horizon, 0.1, seed),
                ),
                Family::NestedMmap => (format!("n={n}"), gen_nested_mmap(n)),
                Family::Bn => {
                    let bn = BayesNet::builtin(&a.network).ok_or_else(|| {
                        CliError::usage(format!("no built-in network `{}`", a.network))
                    })?;
                    let strategy: BnStrategy = a.strategy.parse()?;
                    (
                        format!("network={};strategy={}", a.network, a.strategy),
                        bn.to_dappl(strategy, seed),
                    )
                }
            };
            out.push(Instance {
                family: a.family,
                n,
                params,
                seed,
                src: src.map_err(|e| e.to_string()),
            });
        }
    }
    Ok(out)
}

fn hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn solve(inst: &Instance, check: bool) -> Result<Solved, String> {
    let src = inst.src.as_deref().map_err(Clone::clone)?;
    if inst.family == Family::NestedMmap {
        let r = pineappl::run(src).map_err(|e| e.to_string())?;
        let value = r
            .queries
            .last()
            .and_then(|q| q.value.probability())
            .unwrap_or(f64::NAN);
        let agrees = check
            .then(|| {
                oracle::pineappl_interp(src).map(|i| {
                    i.decisions == r.decisions
                        && i.queries
                            .last()
                            .and_then(|q| q.probability())
                            .is_some_and(|p| (p - value).abs() < 1e-6)
                })
            })
            .transpose()
            .map_err(|e| e.to_string())?;
        let witness = serde_json::to_string(&r.decisions).expect("decisions serialize");
        return Ok(Solved {
            value,
            witness,
            nodes: r.stats.nodes_created,
            prunes: r.stats.prunes,
            agrees,
        });
    }
    let mut p = dappl::Pipeline::build(src, None).map_err(|e| e.to_string())?;
    let r = p.solve(Default::default()).map_err(|e| e.to_string())?;
    let agrees = check
        .then(|| oracle::dappl_meu_enum(src).map(|(m, _)| (m - r.meu).abs() < 1e-6))
        .transpose()
        .map_err(|e| e.to_string())?;
    let witness = serde_json::to_string(&r.policy).expect("policies serialize");
    Ok(Solved {
        value: r.meu,
        witness,
        nodes: p.mgr.node_count(),
        prunes: r.stats.prunes,
        agrees,
    })
}

/// Solves on a detached thread so a runaway instance can be abandoned.
fn run_one(inst: Instance, check: bool, timeout: Duration) -> BenchRecord {
    let mut rec = BenchRecord {
        family: family_name(inst.family),
        params: inst.params.clone(),
        seed: inst.seed,
        value: None,
        policy_hash: String::new(),
        nodes: 0,
        prunes: 0,
        time_ms: 0.0,
        status: String::new(),
    };
    let (tx, rx) = mpsc::channel();
    let start = Instant::now();
    std::thread::spawn(move || {
        let _ = tx.send(solve(&inst, check));
    });
    match rx.recv_timeout(timeout) {
        Ok(Ok(s)) => {
            rec.time_ms = start.elapsed().as_secs_f64() * 1e3;
            rec.value = Some(s.value);
            rec.policy_hash = hash(&s.witness);
            rec.nodes = s.nodes;
            rec.prunes = s.prunes;
            rec.status = match s.agrees {
                Some(false) => "oracle_mismatch".into(),
                _ => "ok".into(),
            };
        }
        Ok(Err(e)) => {
            rec.time_ms = start.elapsed().as_secs_f64() * 1e3;
            rec.status = format!("error: {e}");
        }
        Err(_) => {
            rec.time_ms = timeout.as_secs_f64() * 1e3;
            rec.status = "timeout".into();
        }
    }
    rec
}

/// r² of the least-squares polynomial of degree ≤ 2 through the points.
pub fn quadratic_r2(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let mut a = [[0.0f64; 4]; 3];
    for &(x, y) in points {
        let row = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
            a[i][3] += row[i] * y;
        }
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        a.swap(col, piv);
        if a[col][col].abs() < 1e-12 {
            return None;
        }
        for i in 0..3 {
            if i != col {
                let (f, pivot) = (a[i][col] / a[col][col], a[col]);
                for (x, p) in a[i][col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    let c: Vec<f64> = (0..3).map(|i| a[i][3] / a[i][i]).collect();
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| (y - c[0] - c[1] * x - c[2] * x * x).powi(2))
        .sum();
    (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot)
}

pub fn run(a: &BenchArgs) -> CliResult<String> {
    let insts = instances(a)?;
    let sizes: Vec<usize> = insts.iter().map(|i| i.n).collect();
    let timeout = Duration::from_millis(a.timeout);
    let records: Vec<BenchRecord> = insts
        .into_par_iter()
        .map(|i| run_one(i, a.oracle, timeout))
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "family",
        "params",
        "seed",
        "value",
        "policy_hash",
        "nodes",
        "prunes",
        "time_ms",
        "status",
    ])
    .map_err(|e| CliError::usage(e.to_string()))?;
    for r in &records {
        w.write_record([
            r.family.clone(),
            r.params.clone(),
            r.seed.to_string(),
            r.value.map(|v| v.to_string()).unwrap_or_default(),
            r.policy_hash.clone(),
            r.nodes.to_string(),
            r.prunes.to_string(),
            format!("{:.3}", r.time_ms),
            r.status.clone(),
        ])
        .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| CliError::usage(e.to_string()))?)
        .expect("CSV is UTF-8");

    let points: Vec<(f64, f64)> = records
        .iter()
        .zip(&sizes)
        .filter(|(r, _)| r.status == "ok")
        .map(|(r, &n)| (n as f64, r.time_ms))
        .collect();
    if let Some(r2) = quadratic_r2(&points) {
        eprintln!(
            "time vs size: quadratic fit r² = {r2:.4} over {} rows",
            points.len()
        );
    }
    match &a.csv {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| CliError::io(path, e))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quadratic_fits_perfectly() {
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|x| (x as f64, 3.0 * (x * x) as f64 - x as f64 + 2.0))
            .collect();
        assert!((quadratic_r2(&pts).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_needs_three_points() {
        assert_eq!(quadratic_r2(&[(1.0, 1.0), (2.0, 2.0)]), None);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(hash("{}"), hash("{}"));
        assert_eq!(hash("{}").len(), 16);
    }
}
