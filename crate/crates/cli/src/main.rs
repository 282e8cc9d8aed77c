mod bench;
mod report;

use bbopt_core::bbir::SolveOptions;
use bbopt_core::gen::{gen_dr, gen_gridworld, gen_ladder, gen_nested_mmap, BayesNet, BnStrategy};
use bbopt_core::{dappl, oracle, pineappl, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use report::{CliError, CliResult};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bbopt",
    version,
    about = "Branch-and-bound MEU and marginal MAP for discrete probabilistic programs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a `.dappl` (MEU) or `.pineappl` (queries and staged MMAP) program.
    Solve(SolveArgs),
    /// Print a generated benchmark program.
    #[command(subcommand)]
    Gen(GenCmd),
    /// Solve a range of generated instances and write one CSV row each.
    Bench(BenchArgs),
    /// Print the compiled diagram of a program in Graphviz format.
    Dot(DotArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Lang {
    Dappl,
    Pineappl,
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    /// Language; inferred from the extension by default.
    #[arg(long, value_enum)]
    lang: Option<Lang>,
    /// Also run the enumeration oracle and report both answers.
    #[arg(long)]
    oracle: bool,
    /// Disable bound pruning.
    #[arg(long)]
    no_prune: bool,
    /// File listing variable labels (whitespace separated) to order first.
    #[arg(long, value_name = "FILE")]
    order: Option<PathBuf>,
    /// Write the compiled diagram as DOT.
    #[arg(long, value_name = "PATH")]
    dot: Option<PathBuf>,
    /// Include search statistics.
    #[arg(long)]
    stats: bool,
}

#[derive(Args)]
struct DotArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    lang: Option<Lang>,
    #[arg(long, value_name = "FILE")]
    order: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenCmd {
    /// Decision problem from a Bayesian network.
    Bn {
        /// Built-in network (earthquake, asia, survey).
        #[arg(long, conflicts_with = "file", required_unless_present = "file")]
        name: Option<String>,
        /// Network JSON file.
        #[arg(long)]
        file: Option<PathBuf>,
        /// existing or new_nodes.
        #[arg(long, default_value = "existing")]
        strategy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Diminishing-returns chain.
    Dr {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Faulty-router ladder with 2n routers and k guesses.
    Ladder {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Unrolled gridworld.
    Gridworld {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        horizon: usize,
        /// Slip probability.
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Repeated staged MMAP template.
    NestedMmap {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    family: bench::Family,
    /// First size parameter.
    #[arg(long, default_value_t = 1)]
    from: usize,
    /// Last size parameter (inclusive); smaller than `from` gives no rows.
    #[arg(long)]
    to: usize,
    /// Seeds per size.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Ladder guesses.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Gridworld horizon.
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    /// Built-in network for the `bn` family.
    #[arg(long, default_value = "earthquake")]
    network: String,
    #[arg(long, default_value = "existing")]
    strategy: String,
    /// Also check each row against the enumeration oracle.
    #[arg(long)]
    oracle: bool,
    /// Per-instance timeout in milliseconds.
    #[arg(long, default_value_t = 60_000)]
    timeout: u64,
    /// Output path; stdout if absent.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = match cli.cmd {
        Command::Solve(a) => solve(&a).map(|v| report::json(&v)),
        Command::Gen(g) => generate(g),
        Command::Bench(b) => bench::run(&b),
        Command::Dot(d) => dot(&d),
    };
    match out {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => e.emit(),
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn lang_of(path: &Path, flag: Option<Lang>) -> CliResult<Lang> {
    if let Some(l) = flag {
        return Ok(l);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("dappl") => Ok(Lang::Dappl),
        Some("pineappl") => Ok(Lang::Pineappl),
        _ => Err(CliError::usage(format!(
            "cannot infer the language of {}; pass --lang",
            path.display()
        ))),
    }
}

fn order(path: &Option<PathBuf>) -> CliResult<Option<Vec<String>>> {
    match path {
        Some(p) => Ok(Some(
            read(p)?.split_whitespace().map(String::from).collect(),
        )),
        None => Ok(None),
    }
}

fn solve(a: &SolveArgs) -> CliResult<Value> {
    let src = read(&a.file)?;
    let solve_opts = SolveOptions {
        prune: !a.no_prune,
        ..Default::default()
    };
    let order = order(&a.order)?;
    match lang_of(&a.file, a.lang)? {
        Lang::Dappl => {
            let mut p = dappl::Pipeline::build(&src, order)?;
            let r = p.solve(solve_opts)?;
            if let Some(path) = &a.dot {
                let (phi, gamma) = (p.objective.phi, p.objective.gamma);
                write_file(path, &p.mgr.to_dot(&[("phi", phi), ("gamma", gamma)]))?;
            }
            let mut v = json!({ "meu": r.meu, "policy": r.policy, "sites": r.sites });
            if let Some(w) = &r.warning {
                v["warning"] = json!(w);
            }
            if a.stats {
                v["stats"] = json!(r.stats);
            }
            if a.oracle {
                let (meu, policy) = oracle::dappl_meu_enum(&src)?;
                v["oracle"] = json!({ "meu": meu, "policy": policy, "delta": (r.meu - meu).abs() });
            }
            Ok(v)
        }
        Lang::Pineappl => {
            let cfg = pineappl::Config {
                solve: solve_opts,
                order: order.clone(),
            };
            let r = pineappl::run_with(&src, &cfg)?;
            if let Some(path) = &a.dot {
                let (_, mut st) = pineappl::compile_source(&src, &cfg)?;
                let c = st.constraint();
                write_file(path, &st.mgr.to_dot(&[("constraint", c)]))?;
            }
            let mut v = json!({ "queries": r.queries, "decisions": r.decisions });
            if a.stats {
                v["stats"] = json!(r.stats);
            }
            if a.oracle {
                let i = oracle::pineappl_interp(&src)?;
                let delta = r
                    .queries
                    .iter()
                    .zip(&i.queries)
                    .filter_map(|(q, o)| Some((q.value.probability()? - o.probability()?).abs()))
                    .fold(0.0, f64::max);
                v["oracle"] =
                    json!({ "queries": i.queries, "decisions": i.decisions, "delta": delta });
            }
            Ok(v)
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn dot(d: &DotArgs) -> CliResult<String> {
    let src = read(&d.file)?;
    let order = order(&d.order)?;
    Ok(match lang_of(&d.file, d.lang)? {
        Lang::Dappl => {
            let p = dappl::Pipeline::build(&src, order)?;
            p.mgr
                .to_dot(&[("phi", p.objective.phi), ("gamma", p.objective.gamma)])
        }
        Lang::Pineappl => {
            let (_, mut st) = pineappl::compile_source(
                &src,
                &pineappl::Config {
                    order,
                    ..Default::default()
                },
            )?;
            let c = st.constraint();
            st.mgr.to_dot(&[("constraint", c)])
        }
    })
}

fn generate(g: GenCmd) -> CliResult<String> {
    Ok(match g {
        GenCmd::Bn {
            name,
            file,
            strategy,
            seed,
        } => {
            let bn = match (name, file) {
                (Some(n), _) => BayesNet::builtin(&n).ok_or_else(|| {
                    CliError::from(Error::Invalid(format!("no built-in network `{n}`")))
                })?,
                (None, Some(f)) => BayesNet::from_json(&read(&f)?)?,
                (None, None) => return Err(CliError::usage("pass --name or --file")),
            };
            bn.to_dappl(strategy.parse::<BnStrategy>()?, seed)?
        }
        GenCmd::Dr { n, seed } => gen_dr(n, seed)?,
        GenCmd::Ladder { n, k, seed } => gen_ladder(n, k, seed)?,
        GenCmd::Gridworld {
            dim,
            horizon,
            p,
            seed,
        } => gen_gridworld(dim, horizon, p, seed)?,
        GenCmd::NestedMmap { n } => gen_nested_mmap(n)?,
    })
}
