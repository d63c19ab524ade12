//! Top-down solvers for side-effecting constraint systems.
//!
//! All three solvers share [`SolverConfig`] and return a [`Solved`] bundle:
//! the [`Solution`], counters, and a [`Termination`] snapshot of the final
//! solver state that callers can assert on.

mod immediate;
mod independent;
mod jitter;
mod seq;
mod table;
mod tltd;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::thread;
use std::time::Duration;

pub use immediate::solve_immediate;
pub use independent::{solve_independent, FixpointReport};
pub use seq::solve_seq;

use crate::eqsys::{ConstraintSystem, Unknown};
use crate::{Error, Result};

/// Tuning knobs shared by every solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    /// Strictly growing contributions a global absorbs by join before widening.
    pub widen_delay: u32,
    /// Upper bound on right-hand-side evaluations across all workers.
    pub eval_budget: u64,
    /// Stack size of solver threads; iteration recurses along dependencies.
    pub stack_size: usize,
    /// Seeds schedule perturbation in the parallel solvers. `None` disables it.
    pub schedule_seed: Option<u64>,
    /// Keep a log of every value stored into a record.
    pub record_stores: bool,
    /// Test hook: stop every independent task after this many evaluations.
    pub truncate_evals: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            widen_delay: 3,
            eval_budget: 10_000_000,
            stack_size: 256 << 20,
            schedule_seed: None,
            record_stores: false,
            truncate_evals: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Seq,
    Immediate,
    Independent,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Seq, SolverKind::Immediate, SolverKind::Independent];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Seq => "seq",
            SolverKind::Immediate => "immediate",
            SolverKind::Independent => "independent",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown solver `{s}` (expected seq, immediate or independent)"))
    }
}

/// Final values of every unknown a solver reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<V> {
    values: BTreeMap<Unknown, V>,
}

impl<V> Default for Solution<V> {
    fn default() -> Self {
        Solution {
            values: BTreeMap::new(),
        }
    }
}

impl<V> Solution<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, u: Unknown) -> Option<&V> {
        self.values.get(&u)
    }

    pub fn contains(&self, u: Unknown) -> bool {
        self.values.contains_key(&u)
    }

    pub fn insert(&mut self, u: Unknown, v: V) -> Option<V> {
        self.values.insert(u, v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entries in unknown order.
    pub fn iter(&self) -> impl Iterator<Item = (Unknown, &V)> + '_ {
        self.values.iter().map(|(&u, v)| (u, v))
    }

    pub fn unknowns(&self) -> impl Iterator<Item = Unknown> + '_ {
        self.values.keys().copied()
    }
}

impl<V> FromIterator<(Unknown, V)> for Solution<V> {
    fn from_iter<I: IntoIterator<Item = (Unknown, V)>>(iter: I) -> Self {
        Solution {
            values: iter.into_iter().collect(),
        }
    }
}

/// Counters common to all solvers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub rhs_evaluations: u64,
    /// Records flipped to unstable by destabilization.
    pub destabilizations: u64,
    /// Widening applications whose result exceeded the plain join.
    pub widenings: u64,
    pub unknowns_reached: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImmediateStats {
    pub cas_attempts: u64,
    pub cas_retries: u64,
    pub claims_skipped: u64,
    pub per_worker_rhs: Vec<u64>,
}

impl ImmediateStats {
    pub fn retry_ratio(&self) -> f64 {
        if self.cas_attempts == 0 {
            0.0
        } else {
            self.cas_retries as f64 / self.cas_attempts as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndependentStats {
    pub tasks_created: u64,
    pub revivals: u64,
    pub publishes: u64,
    pub updates_delivered: u64,
    /// Locals iterated by more than one task over locals iterated at all.
    pub duplicate_work_ratio: f64,
    pub per_worker_rhs: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverDetail {
    Seq,
    Immediate(ImmediateStats),
    Independent(IndependentStats),
}

/// Final solver state, expected to satisfy [`Termination::holds`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Termination {
    pub work_empty: bool,
    pub all_stable: bool,
    pub none_called: bool,
    pub inboxes_drained: bool,
}

impl Termination {
    pub fn holds(&self) -> bool {
        self.work_empty && self.all_stable && self.none_called && self.inboxes_drained
    }
}

/// Everything a solver run produces.
#[derive(Debug, Clone)]
pub struct Solved<V> {
    pub solution: Solution<V>,
    pub stats: SolveStats,
    pub detail: SolverDetail,
    pub termination: Termination,
    /// Every store, in order, when [`SolverConfig::record_stores`] is set.
    /// Parallel solvers interleave workers arbitrarily.
    pub store_log: Vec<(Unknown, V)>,
    /// Unknowns whose right-hand side is not subsumed by the merged solution;
    /// only the independent solver fills this in.
    pub fixpoint_report: Option<FixpointReport>,
}

/// Runs the chosen solver. `workers` is ignored by the sequential solver.
pub fn solve<S: ConstraintSystem>(
    kind: SolverKind,
    sys: &S,
    roots: &[Unknown],
    workers: usize,
    cfg: &SolverConfig,
) -> Result<Solved<S::Value>> {
    match kind {
        SolverKind::Seq => solve_seq(sys, roots, cfg),
        SolverKind::Immediate => solve_immediate(sys, roots, workers, cfg),
        SolverKind::Independent => solve_independent(sys, roots, workers, cfg),
    }
}

fn check_roots<S: ConstraintSystem>(sys: &S, roots: &[Unknown]) -> Result<()> {
    if roots.is_empty() {
        return Err(Error::NoRoots);
    }
    match roots.iter().find(|&&r| sys.is_global(r)) {
        Some(&r) => Err(Error::InvalidRoot(sys.label(r).into_owned())),
        None => Ok(()),
    }
}

/// Runs `f` on a fresh thread with the configured stack size.
fn on_big_stack<T: Send>(cfg: &SolverConfig, f: impl FnOnce() -> T + Send) -> T {
    thread::scope(|s| {
        thread::Builder::new()
            .name("fixlab-solver".into())
            .stack_size(cfg.stack_size)
            .spawn_scoped(s, f)
            .expect("spawn solver thread")
            .join()
            .unwrap_or_else(|p| std::panic::resume_unwind(p))
    })
}

/// `old ⊔ new`, or `old ∇ (old ⊔ new)` when `widen` is set; `None` if `new ⊑ old`.
/// The flag in the result tells whether widening went beyond the join.
fn grow<V: crate::Lattice>(old: &V, new: &V, widen: bool) -> Result<Option<(V, bool)>> {
    if new.leq(old)? {
        return Ok(None);
    }
    let joined = old.join(new)?;
    if !widen {
        return Ok(Some((joined, false)));
    }
    let widened = old.widen(&joined)?;
    let beyond = widened != joined;
    Ok(Some((widened, beyond)))
}
