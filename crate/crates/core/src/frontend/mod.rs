//! A toy multi-threaded language and its interval analysis.
//!
//! ```text
//! global g;
//! fn foo(a) { g = a; return 0; }
//! fn main() { g = 0; spawn foo(42); a = g; a = a + 1; return a; }
//! ```
//!
//! Program globals are analyzed flow-insensitively as interval globals;
//! function-local variables live in per-point environments. See [`build`]
//! for the shape of the generated equations.

mod ast;
pub mod build;
mod parse;

use std::fmt;
use std::str::FromStr;

pub use ast::{CmpOp, Cond, Expr, Function, Program, Stmt};
pub use build::{build_equations, end_label, point_label, start_label, ProgramEquations, RET};
pub use parse::parse_program;

use crate::solver::{solve, Solved, SolverConfig, SolverKind};
use crate::verify::{verify_solution, VerificationResult};
use crate::{Env, Interval, Result, Value};

/// Where the analysis promotes function endpoints to top-level unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DemandStrategy {
    /// `demand` the endpoint of every spawned function.
    ThreadsOnly,
    /// Also `demand` the endpoint of every called function before reading it.
    ThreadsAndFunctions,
    /// Never `demand`; spawned endpoints are queried like called ones.
    None,
}

impl DemandStrategy {
    pub const ALL: [DemandStrategy; 3] = [
        DemandStrategy::ThreadsOnly,
        DemandStrategy::ThreadsAndFunctions,
        DemandStrategy::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DemandStrategy::ThreadsOnly => "threads",
            DemandStrategy::ThreadsAndFunctions => "functions",
            DemandStrategy::None => "none",
        }
    }
}

impl fmt::Display for DemandStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DemandStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        DemandStrategy::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown demand strategy `{s}` (expected threads, functions or none)"))
    }
}

/// Result of analyzing one program.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub equations: ProgramEquations,
    pub solved: Solved<Value>,
    pub verification: VerificationResult<Value>,
}

impl AnalysisReport {
    /// Environments of all reached program points, by label.
    pub fn point_envs(&self) -> Vec<(String, Env)> {
        let sys = &self.equations.system;
        self.solved
            .solution
            .iter()
            .filter_map(|(u, v)| Some((sys.label_of(u).to_string(), v.as_env()?.clone())))
            .collect()
    }

    /// Intervals of all reached program globals, by name.
    pub fn globals(&self) -> Vec<(String, Interval)> {
        let sys = &self.equations.system;
        self.solved
            .solution
            .iter()
            .filter_map(|(u, v)| Some((sys.label_of(u).to_string(), *v.as_interval()?)))
            .collect()
    }

    /// The environment at the endpoint of `main`.
    pub fn main_end(&self) -> Option<&Env> {
        self.solved.solution.get(self.equations.roots[0])?.as_env()
    }
}

/// Builds the equations of `prog`, solves them and verifies the result.
pub fn analyze(
    prog: &Program,
    solver: SolverKind,
    workers: usize,
    strategy: DemandStrategy,
    cfg: &SolverConfig,
) -> Result<AnalysisReport> {
    let equations = build_equations(prog, strategy);
    let solved = solve(solver, &equations.system, &equations.roots, workers, cfg)?;
    let verification = verify_solution(&equations.system, &solved.solution)?;
    Ok(AnalysisReport {
        equations,
        solved,
        verification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverDetail;

    const RUNNING: &str = "global g;\n\
        fn foo(a) { g = a; return 0; }\n\
        fn main() { g = 0; spawn foo(42); a = g; a = a + 1; return a; }\n";

    #[test]
    fn every_solver_finds_the_running_values() {
        let prog = parse_program(RUNNING).unwrap();
        for solver in SolverKind::ALL {
            for strategy in DemandStrategy::ALL {
                let r = analyze(&prog, solver, 2, strategy, &SolverConfig::default()).unwrap();
                assert!(r.verification.ok);
                assert_eq!(r.globals(), vec![("g".to_string(), Interval::range(0, 42))]);
                assert_eq!(r.main_end().unwrap().get("a"), Interval::range(1, 43));
            }
        }
    }

    #[test]
    fn spawn_free_program_agrees_across_solvers() {
        let prog = parse_program(
            "fn f(x) { return x * 2; } fn main() { i = 0; while (i < 5) { i = i + 1; } r = call f(i); return r; }",
        )
        .unwrap();
        let base = analyze(
            &prog,
            SolverKind::Seq,
            1,
            DemandStrategy::ThreadsOnly,
            &SolverConfig::default(),
        )
        .unwrap();
        for solver in [SolverKind::Immediate, SolverKind::Independent] {
            let r = analyze(&prog, solver, 4, DemandStrategy::ThreadsOnly, &SolverConfig::default()).unwrap();
            assert_eq!(r.solved.solution, base.solved.solution);
        }
    }

    #[test]
    fn spawned_workers_become_tasks() {
        let prog = parse_program(
            "global c; fn w(n) { i = 0; while (i < n) { c = c + 1; i = i + 1; } }\n\
             fn main() { spawn w(1); spawn w(2); spawn w(3); spawn w(4); }",
        )
        .unwrap();
        let r = analyze(
            &prog,
            SolverKind::Independent,
            2,
            DemandStrategy::ThreadsOnly,
            &SolverConfig::default(),
        )
        .unwrap();
        let SolverDetail::Independent(d) = &r.solved.detail else {
            panic!()
        };
        // the endpoint of main and the single endpoint of w
        assert_eq!(d.tasks_created, 2);
    }

    #[test]
    fn strategy_names_round_trip() {
        for d in DemandStrategy::ALL {
            assert_eq!(d.name().parse::<DemandStrategy>().unwrap(), d);
        }
        assert!("pthread".parse::<DemandStrategy>().is_err());
    }
}
