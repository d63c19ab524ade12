//! `fixlab`: solve equation systems, analyze toy programs, compare results
//! and run benchmark sweeps.
//!
//! Exit codes: 0 verified, 2 input or usage error, 3 verification failure,
//! 4 evaluation budget exceeded.

mod bench;
mod envelope;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use fixlab::eqsys::{generate_synthetic, parse_system, serialize_system, SyntheticParams};
use fixlab::frontend::{analyze, parse_program, DemandStrategy};
use fixlab::solver::{solve, SolverConfig, SolverKind};
use fixlab::verify::{compare_precision, verify_solution, Precision};
use fixlab::Error;
use serde::Serialize;

use envelope::{Envelope, Meta, SystemInfo, TOOL};

const EXIT_USAGE: u8 = 2;
const EXIT_UNVERIFIED: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(
    name = "fixlab",
    version,
    about = "Top-down fixpoint solvers for side-effecting constraint systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(clap::Args)]
struct SolveOpts {
    #[arg(long, default_value = "seq")]
    solver: SolverKind,
    /// Worker threads of the parallel solvers.
    #[arg(long, env = "FIXLAB_THREADS", default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
    /// Seeds the schedule perturbation of the parallel solvers.
    #[arg(long)]
    seed: Option<u64>,
    /// Growing contributions a global absorbs by join before widening.
    #[arg(long, default_value_t = SolverConfig::default().widen_delay)]
    widen_delay: u32,
    /// Maximum number of right-hand-side evaluations.
    #[arg(long, default_value_t = SolverConfig::default().eval_budget)]
    budget: u64,
    #[arg(long, value_enum, default_value = "text")]
    out: Format,
}

impl SolveOpts {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            widen_delay: self.widen_delay,
            eval_budget: self.budget,
            schedule_seed: self.seed,
            ..SolverConfig::default()
        }
    }

    fn meta(&self, command: &str, input: &Path, demand: Option<DemandStrategy>, system: SystemInfo) -> Meta {
        Meta {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            input: input.display().to_string(),
            solver: self.solver.name().to_string(),
            workers: self.workers as usize,
            seed: self.seed,
            widen_delay: self.widen_delay,
            budget: self.budget,
            demand: demand.map(|d| d.name().to_string()),
            system,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve an equation-system file (.eqs).
    Solve {
        file: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Analyze a toy program (.toy) and report the value at every point.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
        #[arg(long, default_value = "threads")]
        demand: DemandStrategy,
    },
    /// Compare the precision of two JSON results over the same system.
    Compare {
        /// Baseline result.
        a: PathBuf,
        /// Result classified relative to the baseline.
        b: PathBuf,
        /// Also list the class of every unknown.
        #[arg(long)]
        detail: bool,
        #[arg(long, value_enum, default_value = "text")]
        out: Format,
    },
    /// Run every solver and worker count over a suite directory and write CSV.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "seq,immediate,independent")]
        solvers: Vec<SolverKind>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8", value_parser = clap::value_parser!(u32).range(1..))]
        workers: Vec<u32>,
        /// Demand strategies applied to .toy files.
        #[arg(long, value_delimiter = ',', default_value = "threads")]
        demand: Vec<DemandStrategy>,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        repeat: u32,
        /// Seed of run 0; run i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SolverConfig::default().eval_budget)]
        budget: u64,
        /// Output file; standard output if omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a seeded synthetic equation system in .eqs form.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
        components: u32,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
        chain_length: u32,
        #[arg(long, default_value_t = 2)]
        globals: u32,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        work_factor: u32,
        /// Output file; standard output if omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(env: &Envelope, format: Format) -> anyhow::Result<u8> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(env)?),
        Format::Text => print!("{}", env.to_text()),
    }
    Ok(exit_code(env))
}

fn exit_code(env: &Envelope) -> u8 {
    if env.verification.ok {
        0
    } else {
        EXIT_UNVERIFIED
    }
}

fn cmd_solve(file: &Path, opts: &SolveOpts) -> anyhow::Result<u8> {
    let sys = parse_system(&read(file)?).with_context(|| file.display().to_string())?;
    let roots = sys.roots();
    let solved = solve(opts.solver, &sys, &roots, opts.workers as usize, &opts.config())?;
    let verification = verify_solution(&sys, &solved.solution)?;
    let meta = opts.meta("solve", file, None, SystemInfo::of(&sys));
    emit(&Envelope::new(meta, &sys, &solved, &verification), opts.out)
}

fn cmd_analyze(file: &Path, opts: &SolveOpts, demand: DemandStrategy) -> anyhow::Result<u8> {
    let prog = parse_program(&read(file)?).with_context(|| file.display().to_string())?;
    let r = analyze(&prog, opts.solver, opts.workers as usize, demand, &opts.config())?;
    let sys = &r.equations.system;
    let meta = opts.meta("analyze", file, Some(demand), SystemInfo::of(sys));
    emit(&Envelope::new(meta, sys, &r.solved, &r.verification), opts.out)
}

#[derive(Serialize)]
struct CompareOut {
    base: String,
    other: String,
    total: usize,
    equal: f64,
    more_precise: f64,
    less_precise: f64,
    incomparable: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<Vec<DetailOut>>,
}

#[derive(Serialize)]
struct DetailOut {
    unknown: String,
    class: &'static str,
}

fn load_envelope(path: &Path) -> anyhow::Result<Envelope> {
    serde_json::from_str(&read(path)?).with_context(|| format!("{} is not a fixlab result", path.display()))
}

fn cmd_compare(a: &Path, b: &Path, detail: bool, out: Format) -> anyhow::Result<u8> {
    let (ea, eb) = (load_envelope(a)?, load_envelope(b)?);
    let (labels, sa, sb) = envelope::solutions_of(&ea, &eb)?;
    let report = compare_precision(&sa, &sb)?;
    let classes = [
        Precision::Equal,
        Precision::MorePrecise,
        Precision::LessPrecise,
        Precision::Incomparable,
    ];
    let mut details: Vec<DetailOut> = report
        .details
        .iter()
        .map(|&(u, p)| DetailOut {
            unknown: labels[u.index()].clone(),
            class: p.name(),
        })
        .collect();
    details.sort_by(|x, y| x.unknown.cmp(&y.unknown));
    match out {
        Format::Json => {
            let c = CompareOut {
                base: a.display().to_string(),
                other: b.display().to_string(),
                total: report.total(),
                equal: report.fraction(Precision::Equal),
                more_precise: report.fraction(Precision::MorePrecise),
                less_precise: report.fraction(Precision::LessPrecise),
                incomparable: report.fraction(Precision::Incomparable),
                details: detail.then_some(details),
            };
            println!("{}", serde_json::to_string_pretty(&c)?);
        }
        Format::Text => {
            println!(
                "# {} relative to {}, {} unknowns",
                b.display(),
                a.display(),
                report.total()
            );
            for p in classes {
                println!("{:<13} {:.4} ({})", p.name(), report.fraction(p), report.count(p));
            }
            if detail {
                for d in details {
                    println!("{} {}", d.unknown, d.class);
                }
            }
        }
    }
    Ok(0)
}

fn cmd_gen(p: &SyntheticParams, out: Option<&Path>) -> anyhow::Result<u8> {
    let text = serialize_system(&generate_synthetic(p))?;
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Solve { file, opts } => cmd_solve(&file, &opts),
        Command::Analyze { file, opts, demand } => cmd_analyze(&file, &opts, demand),
        Command::Compare { a, b, detail, out } => cmd_compare(&a, &b, detail, out),
        Command::Bench {
            suite,
            solvers,
            workers,
            demand,
            repeat,
            seed,
            budget,
            csv,
        } => {
            let workers: Vec<usize> = workers.into_iter().map(|w| w as usize).collect();
            let plan = bench::Plan {
                suite: &suite,
                solvers: &solvers,
                workers: &workers,
                demands: &demand,
                repeat: repeat as usize,
                seed,
                base: SolverConfig {
                    eval_budget: budget,
                    ..SolverConfig::default()
                },
            };
            let (rows, over_budget) = bench::run(&plan)?;
            match &csv {
                Some(path) => {
                    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    bench::write_csv(f, &rows)?;
                }
                None => bench::write_csv(std::io::stdout().lock(), &rows)?,
            }
            let unverified = rows.iter().filter(|r| !r.verified).count();
            eprintln!("{} runs, {unverified} unverified", rows.len());
            Ok(if over_budget {
                EXIT_BUDGET
            } else if unverified > 0 {
                EXIT_UNVERIFIED
            } else {
                0
            })
        }
        Command::Gen {
            seed,
            components,
            chain_length,
            globals,
            work_factor,
            out,
        } => cmd_gen(
            &SyntheticParams {
                seed,
                components: components as usize,
                chain_length: chain_length as usize,
                globals_per_component: globals as usize,
                work_factor: work_factor as usize,
            },
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fixlab: {e:#}");
            let budget = matches!(e.downcast_ref::<Error>(), Some(Error::BudgetExceeded(_)));
            ExitCode::from(if budget { EXIT_BUDGET } else { EXIT_USAGE })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fixlab::verify::{VerificationResult, Violation, ViolationKind};

    #[test]
    fn failed_verification_exits_with_3() {
        let sys = parse_system("lattice interval;\nx: local = const [1,2]").unwrap();
        let x = sys.lookup("x").unwrap();
        let solved = solve(SolverKind::Seq, &sys, &[x], 1, &SolverConfig::default()).unwrap();
        let opts = SolveOpts {
            solver: SolverKind::Seq,
            workers: 1,
            seed: None,
            widen_delay: 3,
            budget: 100,
            out: Format::Text,
        };
        let meta = opts.meta("solve", Path::new("x.eqs"), None, SystemInfo::of(&sys));
        let ok = VerificationResult {
            ok: true,
            violations: vec![],
        };
        assert_eq!(exit_code(&Envelope::new(meta.clone(), &sys, &solved, &ok)), 0);
        let bad = VerificationResult {
            ok: false,
            violations: vec![Violation {
                unknown: x,
                kind: ViolationKind::RhsNotSubsumed,
                target: x,
                stored: None,
                required: None,
            }],
        };
        let env = Envelope::new(meta, &sys, &solved, &bad);
        assert_eq!(exit_code(&env), EXIT_UNVERIFIED);
        assert!(env.to_text().contains("verification FAILED"));
    }
}
