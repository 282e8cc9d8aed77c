//! Scaling families: diminishing returns, the faulty-router ladder, a
//! finitely unrolled gridworld, and the nested marginal-MAP template.

use super::{prob, rng};
use crate::error::{Error, Result};
use rand::Rng;
use std::fmt::Write;

/// Diminishing returns: a chain of `n` biased coins; the first heads leads to
/// a choice among 2–6 utilities drawn uniformly from [0, 100].
pub fn gen_dr(n: usize, seed: u64) -> Result<String> {
    if n == 0 {
        return Err(Error::Invalid("dr needs at least one coin".into()));
    }
    let mut rng = rng(seed);
    let mut levels = Vec::new();
    for i in 0..n {
        let bias = rng.gen_range(1..20) as f64 / 20.0;
        let k = rng.gen_range(2..=6);
        let arms: Vec<(String, u32)> = (0..k)
            .map(|j| (format!("u{i}_{j}"), rng.gen_range(0..=100)))
            .collect();
        levels.push((bias, arms));
    }
    let mut out = String::new();
    for (i, (bias, arms)) in levels.iter().enumerate() {
        let names: Vec<&str> = arms.iter().map(|a| a.0.as_str()).collect();
        let body: String = arms
            .iter()
            .map(|(a, u)| format!(" | {a} -> reward {u}"))
            .collect();
        let _ = write!(
            out,
            "c{i} <- flip {};\nif c{i} then (choose [{}]{body}) else (",
            prob(*bias),
            names.join(", ")
        );
    }
    out += "()";
    out += &")".repeat(n);
    Ok(out)
}

fn ladder_network(out: &mut String, n: usize, fail: f64) {
    for j in 0..2 * n {
        let _ = writeln!(out, "f{j} <- flip {};", prob(fail));
    }
    let _ = writeln!(out, "o0 <- return !f0;\no1 <- return !f1;");
    for i in 1..n {
        let (t, b) = (2 * i, 2 * i + 1);
        let incoming = format!("(o{} || o{})", t - 2, t - 1);
        let _ = writeln!(
            out,
            "o{t} <- return ({incoming} && !f{t});\no{b} <- return ({incoming} && !f{b});"
        );
    }
    let _ = writeln!(out, "observe !(o{} || o{});", 2 * n - 2, 2 * n - 1);
}

fn ladder_guess(rewards: &[u32], remaining: &[usize], tries: usize, path: &str) -> String {
    let names: Vec<String> = remaining.iter().map(|j| format!("g{path}r{j}")).collect();
    let mut s = format!("(choose [{}]", names.join(", "));
    for (&j, name) in remaining.iter().zip(&names) {
        let miss = if tries > 1 {
            let rest: Vec<usize> = remaining.iter().copied().filter(|&r| r != j).collect();
            ladder_guess(rewards, &rest, tries - 1, &format!("{path}{j}_"))
        } else {
            "()".into()
        };
        let _ = write!(
            s,
            " | {name} -> if f{j} then reward {} else {miss}",
            rewards[j]
        );
    }
    s + ")"
}

/// The faulty-router ladder with `2n` routers. A packet is observed not to
/// arrive; each guess of a failed router earns that router's reward, and a
/// wrong guess allows another, up to `k` tries.
pub fn gen_ladder(n: usize, k: usize, seed: u64) -> Result<String> {
    if n == 0 || k == 0 || k > 2 * n {
        return Err(Error::Invalid(format!(
            "ladder needs n >= 1 and 1 <= k <= {}",
            2 * n
        )));
    }
    let mut rng = rng(seed);
    let rewards: Vec<u32> = (0..2 * n).map(|_| rng.gen_range(0..=100)).collect();
    let mut out = String::new();
    ladder_network(&mut out, n, 0.1);
    let all: Vec<usize> = (0..2 * n).collect();
    out += &ladder_guess(&rewards, &all, k, "");
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Cell {
    Free,
    Trap,
    Obstacle,
    Goal,
}

const DIRS: [(&str, i64, i64); 4] = [
    ("Up", 0, -1),
    ("Down", 0, 1),
    ("Left", -1, 0),
    ("Right", 1, 0),
];
/// Reward for reaching the goal.
pub const GOAL_REWARD: u32 = 100;

/// Gridworld on a `dim × dim` grid, unrolled for `horizon` steps with one
/// four-way choice per step. A move goes wrong with probability `p`, in one
/// of the three other directions uniformly. Traps absorb with no reward,
/// obstacles and walls block; entering the goal pays [`GOAL_REWARD`] once.
pub fn gen_gridworld(dim: usize, horizon: usize, p: f64, seed: u64) -> Result<String> {
    if dim < 2 || horizon == 0 || !(0.0..=1.0).contains(&p) {
        return Err(Error::Invalid(
            "gridworld needs dim >= 2, horizon >= 1, p in [0, 1]".into(),
        ));
    }
    let mut rng = rng(seed);
    let cells = dim * dim;
    let goal = rng.gen_range(1..cells);
    let grid: Vec<Cell> = (0..cells)
        .map(|c| match c {
            0 => Cell::Free,
            c if c == goal => Cell::Goal,
            _ => match rng.gen_range(0..20) {
                0..=2 => Cell::Trap,
                3..=5 => Cell::Obstacle,
                _ => Cell::Free,
            },
        })
        .collect();
    let step = |c: usize, d: usize| -> usize {
        let (x, y) = ((c % dim) as i64, (c / dim) as i64);
        let (nx, ny) = (x + DIRS[d].1, y + DIRS[d].2);
        if nx < 0 || ny < 0 || nx >= dim as i64 || ny >= dim as i64 {
            return c;
        }
        let n = ny as usize * dim + nx as usize;
        if grid[n] == Cell::Obstacle {
            c
        } else {
            n
        }
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "// grid {dim}x{dim}: {}",
        grid.iter()
            .map(|c| match c {
                Cell::Free => '.',
                Cell::Trap => 'T',
                Cell::Obstacle => '#',
                Cell::Goal => 'G',
            })
            .collect::<String>()
    );
    // pos[c] is an expression for "robot in cell c"; None means impossible.
    let mut pos: Vec<Option<String>> = (0..cells)
        .map(|c| (c == 0).then(|| "tt".to_string()))
        .collect();
    for t in 0..horizon {
        let alts: Vec<String> = DIRS.iter().map(|d| format!("{}{t}", d.0)).collect();
        let _ = writeln!(out, "d{t} <- [{}];", alts.join(", "));
        let _ = writeln!(
            out,
            "s{t} <- flip {};\na{t} <- flip 0.333333;\nb{t} <- flip 0.5;",
            prob(p)
        );
        // m{t}_{x}: the move actually taken is direction x.
        for (x, _) in DIRS.iter().enumerate() {
            let arms: Vec<String> = (0..4)
                .map(|d| {
                    let e = if d == x {
                        format!("!s{t}")
                    } else {
                        let rank = (0..4).filter(|&o| o != d).position(|o| o == x).unwrap();
                        match rank {
                            0 => format!("(s{t} && a{t})"),
                            1 => format!("(s{t} && (!a{t} && b{t}))"),
                            _ => format!("(s{t} && (!a{t} && !b{t}))"),
                        }
                    };
                    format!(" | {} -> return {e}", alts[d])
                })
                .collect();
            let _ = writeln!(out, "m{t}_{x} <- (choose d{t}{});", arms.concat());
        }
        let mut next: Vec<Vec<String>> = vec![Vec::new(); cells];
        for (c, e) in pos.iter().enumerate() {
            let Some(e) = e else { continue };
            if matches!(grid[c], Cell::Trap | Cell::Goal) {
                next[c].push(e.clone());
                continue;
            }
            for x in 0..4 {
                next[step(c, x)].push(format!("({e} && m{t}_{x})"));
            }
        }
        let prev_goal = pos[goal].clone();
        for (c, terms) in next.into_iter().enumerate() {
            pos[c] = if terms.is_empty() {
                None
            } else {
                let _ = writeln!(out, "p{}_{c} <- return {};", t + 1, terms.join(" || "));
                Some(format!("p{}_{c}", t + 1))
            };
        }
        if let Some(g) = &pos[goal] {
            let fresh = match &prev_goal {
                Some(pg) => format!("({g} && !{pg})"),
                None => g.clone(),
            };
            let _ = writeln!(out, "(if {fresh} then reward {GOAL_REWARD} else ());");
        }
    }
    out += "return tt";
    Ok(out)
}

/// The nested marginal-MAP template with its loop bound set to `n`.
pub fn gen_nested_mmap(n: usize) -> Result<String> {
    if n == 0 {
        return Err(Error::Invalid("nested-mmap needs n >= 1".into()));
    }
    Ok(format!(
        "m = true;
loop {n} {{
  if m {{
    x = flip 0.5; y = flip 0.5;
    if x && y {{ z = flip 0.5; }}
    else {{ z = flip 0.5; }}
  }} else {{
    x = flip 0.5; y = flip 0.5;
    if !x && !y {{ z = flip 0.5;}}
    else {{ z = flip 0.5; }}
  }}
  (m) = mmap(z);
}}
pr(z)
"
    ))
}
