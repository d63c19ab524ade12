//! Benchmark sweeps over a directory of `.eqs` and `.toy` files.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use fixlab::eqsys::parse_system;
use fixlab::frontend::{build_equations, parse_program, DemandStrategy};
use fixlab::solver::{solve, SolverConfig, SolverDetail, SolverKind};
use fixlab::verify::verify_solution;
use fixlab::{EquationSystem, Error, Unknown};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub file: String,
    pub solver: String,
    pub workers: usize,
    /// Empty for `.eqs` inputs.
    pub demand: String,
    pub run_index: usize,
    pub wall_time_ms: f64,
    pub verified: bool,
    pub rhs_evaluations: u64,
    /// Only the immediate solver retries CASes.
    pub retry_ratio: Option<f64>,
    /// Median 1-worker wall time of the same file, solver and demand over this
    /// run's wall time; empty when no 1-worker run was requested.
    pub speedup: Option<f64>,
}

pub struct Plan<'a> {
    pub suite: &'a Path,
    pub solvers: &'a [SolverKind],
    pub workers: &'a [usize],
    pub demands: &'a [DemandStrategy],
    pub repeat: usize,
    pub seed: u64,
    pub base: SolverConfig,
}

struct Input {
    name: String,
    /// One system per demand strategy; `.eqs` files have a single entry.
    systems: Vec<(String, EquationSystem, Vec<Unknown>)>,
}

fn load(path: &Path, demands: &[DemandStrategy]) -> anyhow::Result<Input> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
    let systems = if path.extension().is_some_and(|e| e == "toy") {
        let prog = parse_program(&text).with_context(|| format!("{}", path.display()))?;
        demands
            .iter()
            .map(|&d| {
                let eq = build_equations(&prog, d);
                (d.name().to_string(), eq.system, eq.roots)
            })
            .collect()
    } else {
        let sys = parse_system(&text).with_context(|| format!("{}", path.display()))?;
        let roots = sys.roots();
        vec![(String::new(), sys, roots)]
    };
    Ok(Input { name, systems })
}

fn suite_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading suite {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "eqs" || e == "toy"));
    files.sort();
    if files.is_empty() {
        bail!("suite {} contains no .eqs or .toy files", dir.display());
    }
    Ok(files)
}

/// Runs the sweep. The sequential solver ignores workers, so it runs only
/// for the 1-worker configuration. Budget overruns are kept as unverified
/// rows and reported through the second return value.
pub fn run(plan: &Plan<'_>) -> anyhow::Result<(Vec<Row>, bool)> {
    let mut rows = Vec::new();
    let mut over_budget = false;
    for path in suite_files(plan.suite)? {
        let input = load(&path, plan.demands)?;
        for (demand, sys, roots) in &input.systems {
            for &kind in plan.solvers {
                for &workers in plan.workers {
                    if kind == SolverKind::Seq && workers != 1 {
                        continue;
                    }
                    for run_index in 0..plan.repeat {
                        let cfg = SolverConfig {
                            schedule_seed: Some(plan.seed + run_index as u64),
                            ..plan.base.clone()
                        };
                        let mut row = Row {
                            file: input.name.clone(),
                            solver: kind.name().to_string(),
                            workers,
                            demand: demand.clone(),
                            run_index,
                            wall_time_ms: 0.0,
                            verified: false,
                            rhs_evaluations: 0,
                            retry_ratio: None,
                            speedup: None,
                        };
                        match solve(kind, sys, roots, workers, &cfg) {
                            Ok(r) => {
                                row.wall_time_ms = r.stats.wall_time.as_secs_f64() * 1e3;
                                row.rhs_evaluations = r.stats.rhs_evaluations;
                                row.verified = verify_solution(sys, &r.solution)?.ok;
                                if let SolverDetail::Immediate(d) = &r.detail {
                                    row.retry_ratio = Some(d.retry_ratio());
                                }
                            }
                            Err(Error::BudgetExceeded(_)) => over_budget = true,
                            Err(e) => return Err(e).with_context(|| format!("{} with {kind}", input.name)),
                        }
                        rows.push(row);
                    }
                }
            }
        }
    }
    fill_speedups(&mut rows);
    Ok((rows, over_budget))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Normalizes every row by its own solver's 1-worker median.
pub fn fill_speedups(rows: &mut [Row]) {
    let mut base: HashMap<(String, String, String), Vec<f64>> = HashMap::new();
    for r in rows.iter().filter(|r| r.workers == 1 && r.verified) {
        base.entry((r.file.clone(), r.solver.clone(), r.demand.clone()))
            .or_default()
            .push(r.wall_time_ms);
    }
    let base: HashMap<_, f64> = base.into_iter().map(|(k, v)| (k, median(v))).collect();
    for r in rows.iter_mut().filter(|r| r.verified) {
        let key = (r.file.clone(), r.solver.clone(), r.demand.clone());
        r.speedup = base.get(&key).map(|b| b / r.wall_time_ms.max(1e-6));
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(workers: usize, run_index: usize, ms: f64) -> Row {
        Row {
            file: "a.eqs".into(),
            solver: "immediate".into(),
            workers,
            demand: String::new(),
            run_index,
            wall_time_ms: ms,
            verified: true,
            rhs_evaluations: 1,
            retry_ratio: Some(0.0),
            speedup: None,
        }
    }

    #[test]
    fn speedup_uses_the_one_worker_median() {
        let mut rows = vec![row(1, 0, 10.0), row(1, 1, 30.0), row(1, 2, 20.0), row(4, 0, 5.0)];
        fill_speedups(&mut rows);
        assert_eq!(rows[1].speedup, Some(20.0 / 30.0));
        assert_eq!(rows[3].speedup, Some(4.0));
    }

    #[test]
    fn no_baseline_leaves_speedup_empty() {
        let mut rows = vec![row(2, 0, 5.0)];
        fill_speedups(&mut rows);
        assert_eq!(rows[0].speedup, None);
    }

    #[test]
    fn median_of_even_count_averages() {
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
