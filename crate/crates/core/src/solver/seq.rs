use std::time::Instant;

use super::tltd::{Engine, State};
use super::{check_roots, on_big_stack, Solution, Solved, SolverConfig, SolverDetail};
use crate::eqsys::{ConstraintSystem, Unknown};
use crate::Result;

/// Sequential TLTD. The workset is a FIFO, so runs are deterministic.
pub fn solve_seq<S: ConstraintSystem>(sys: &S, roots: &[Unknown], cfg: &SolverConfig) -> Result<Solved<S::Value>> {
    check_roots(sys, roots)?;
    let start = Instant::now();
    let mut st = State::default();
    on_big_stack(cfg, || {
        let mut eng = Engine::new(sys, cfg, &mut st, None);
        for &r in roots {
            eng.add_root(r);
        }
        eng.run()
    })?;
    let termination = st.termination();
    let solution: Solution<_> = st.data.into_iter().map(|(u, r)| (u, r.value)).collect();
    let mut stats = st.stats;
    stats.unknowns_reached = solution.len();
    stats.wall_time = start.elapsed();
    Ok(Solved {
        solution,
        stats,
        detail: SolverDetail::Seq,
        termination,
        store_log: st.store_log,
        fixpoint_report: None,
    })
}
