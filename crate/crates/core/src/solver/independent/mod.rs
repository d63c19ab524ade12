//! Private-state parallel TLTD.
//!
//! Every top-level unknown (a root or a demanded unknown) becomes a task
//! with its own record map. Tasks share nothing but global contributions,
//! which go through a [`Broker`]: the first read of a global subscribes,
//! every write publishes, and a growing publish pushes the new accumulated
//! value into each subscriber's inbox, rescheduling subscribers that had
//! already terminated.

mod broker;

use std::sync::atomic::{fence, AtomicBool, AtomicU64, AtomicU8, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use crossbeam_queue::SegQueue;
use crossbeam_utils::Backoff;
use rustc_hash::FxHashMap;

use self::broker::Broker;
use super::jitter::Jitter;
use super::table::{InsertOnlyMap, DEFAULT_BUCKETS};
use super::tltd::{Engine, State, TaskEnv, TaskLink};
use super::{check_roots, IndependentStats, Solution, SolveStats, Solved, SolverConfig, SolverDetail, Termination};
use crate::eqsys::{ConstraintSystem, Unknown};
use crate::verify::check_with;
use crate::{Error, Lattice, Result};

const SCHEDULED: u8 = 0;
const RUNNING: u8 = 1;
const TERMINATED: u8 = 2;

/// Local unknowns whose right-hand side is not subsumed by the merged
/// solution. A nonempty report is a property of the merge, not an error.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FixpointReport {
    pub violations: Vec<Unknown>,
    /// Every task's private map, with globals read from the broker, verifies.
    pub per_task_sound: bool,
}

impl FixpointReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Task<V> {
    status: AtomicU8,
    inbox: SegQueue<(Unknown, V)>,
    /// Only the worker running the task locks this.
    state: Mutex<State<V>>,
}

struct Shared<'a, S: ConstraintSystem> {
    sys: &'a S,
    cfg: &'a SolverConfig,
    tasks: InsertOnlyMap<Task<S::Value>>,
    created: Mutex<Vec<Unknown>>,
    broker: Broker<S::Value>,
    queue: SegQueue<Unknown>,
    outstanding: AtomicUsize,
    evals: AtomicU64,
    abort: AtomicBool,
    error: Mutex<Option<Error>>,
    revivals: AtomicU64,
    publishes: AtomicU64,
    delivered: AtomicU64,
    widenings: AtomicU64,
    store_log: Mutex<Vec<(Unknown, S::Value)>>,
}

impl<S: ConstraintSystem> Shared<'_, S> {
    fn schedule(&self, id: Unknown) {
        self.outstanding.fetch_add(1, Ordering::AcqRel);
        self.queue.push(id);
    }

    fn task(&self, id: Unknown) -> &Task<S::Value> {
        self.tasks.get(id).expect("task registered")
    }

    fn fail(&self, e: Error) {
        let mut slot = self.error.lock().unwrap();
        if slot.is_none() && !matches!(e, Error::Aborted) {
            *slot = Some(e);
        }
        self.abort.store(true, Ordering::Release);
    }

    /// Runs task `id` until its workset is empty and its inbox drained.
    fn run_task(&self, id: Unknown) -> Result<u64> {
        let task = self.task(id);
        task.status.store(RUNNING, Ordering::SeqCst);
        let mut st = task.state.lock().unwrap();
        let before = st.stats.rhs_evaluations;
        loop {
            let fresh = !st.data.contains_key(&id);
            let mut eng = Engine::new(self.sys, self.cfg, &mut st, Some(TaskLink { id, env: self }));
            if fresh {
                eng.add_root(id);
            }
            eng.drain()?;
            eng.run()?;
            task.status.store(TERMINATED, Ordering::SeqCst);
            fence(Ordering::SeqCst);
            if task.inbox.is_empty()
                || task
                    .status
                    .compare_exchange(TERMINATED, RUNNING, Ordering::SeqCst, Ordering::SeqCst)
                    .is_err()
            {
                // drained, or a publisher already rescheduled the task
                break;
            }
        }
        Ok(st.stats.rhs_evaluations - before)
    }
}

impl<S: ConstraintSystem> TaskEnv<S::Value> for Shared<'_, S> {
    fn subscribe(&self, task: Unknown, g: Unknown) -> S::Value {
        self.broker.subscribe(task, g, || self.sys.bottom(g))
    }

    fn publish(&self, _task: Unknown, g: Unknown, contribution: S::Value) -> Result<S::Value> {
        self.publishes.fetch_add(1, Ordering::Relaxed);
        let p = self.broker.publish(g, &contribution, || self.sys.bottom(g))?;
        if p.notify.is_empty() {
            return Ok(p.accumulated);
        }
        self.widenings.fetch_add(u64::from(p.widened), Ordering::Relaxed);
        if self.cfg.record_stores {
            self.store_log.lock().unwrap().push((g, p.accumulated.clone()));
        }
        for sub in p.notify {
            let t = self.task(sub);
            t.inbox.push((g, p.accumulated.clone()));
            self.delivered.fetch_add(1, Ordering::Relaxed);
            fence(Ordering::SeqCst);
            if t.status
                .compare_exchange(TERMINATED, SCHEDULED, Ordering::SeqCst, Ordering::SeqCst)
                .is_ok()
            {
                self.revivals.fetch_add(1, Ordering::Relaxed);
                self.schedule(sub);
            }
        }
        Ok(p.accumulated)
    }

    fn spawn(&self, root: Unknown) {
        let (_, fresh) = self.tasks.get_or_insert_with(root, || Task {
            status: AtomicU8::new(SCHEDULED),
            inbox: SegQueue::new(),
            state: Mutex::new(State::default()),
        });
        if fresh {
            self.created.lock().unwrap().push(root);
            self.schedule(root);
        }
    }

    fn take_updates(&self, task: Unknown) -> Vec<(Unknown, S::Value)> {
        let inbox = &self.task(task).inbox;
        std::iter::from_fn(|| inbox.pop()).collect()
    }

    fn charge(&self) -> Result<()> {
        if self.abort.load(Ordering::Acquire) {
            return Err(Error::Aborted);
        }
        let budget = self.cfg.eval_budget;
        if self.evals.fetch_add(1, Ordering::Relaxed) >= budget {
            return Err(Error::BudgetExceeded(budget));
        }
        Ok(())
    }
}

fn worker<S: ConstraintSystem>(sh: &Shared<'_, S>, jitter: &mut Jitter) -> u64 {
    let backoff = Backoff::new();
    let mut rhs = 0;
    jitter.start();
    while !sh.abort.load(Ordering::Acquire) {
        jitter.step();
        let Some(id) = sh.queue.pop() else {
            if sh.outstanding.load(Ordering::Acquire) == 0 {
                break;
            }
            backoff.snooze();
            continue;
        };
        backoff.reset();
        match sh.run_task(id) {
            Ok(n) => rhs += n,
            Err(e) => sh.fail(e),
        }
        sh.outstanding.fetch_sub(1, Ordering::AcqRel);
    }
    rhs
}

/// Solves with `workers` threads, one private state per top-level unknown.
pub fn solve_independent<S: ConstraintSystem>(
    sys: &S,
    roots: &[Unknown],
    workers: usize,
    cfg: &SolverConfig,
) -> Result<Solved<S::Value>> {
    check_roots(sys, roots)?;
    if workers == 0 {
        return Err(Error::NoWorkers);
    }
    let start = Instant::now();
    let sh = Shared {
        sys,
        cfg,
        tasks: InsertOnlyMap::with_buckets(1 << 10),
        created: Mutex::new(Vec::new()),
        broker: Broker::new(DEFAULT_BUCKETS, cfg.widen_delay),
        queue: SegQueue::new(),
        outstanding: AtomicUsize::new(0),
        evals: AtomicU64::new(0),
        abort: AtomicBool::new(false),
        error: Mutex::new(None),
        revivals: AtomicU64::new(0),
        publishes: AtomicU64::new(0),
        delivered: AtomicU64::new(0),
        widenings: AtomicU64::new(0),
        store_log: Mutex::new(Vec::new()),
    };
    for &r in roots {
        sh.spawn(r);
    }
    let per_worker_rhs: Vec<u64> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|i| {
                let sh = &sh;
                thread::Builder::new()
                    .name(format!("fixlab-independent-{i}"))
                    .stack_size(cfg.stack_size)
                    .spawn_scoped(scope, move || worker(sh, &mut Jitter::new(cfg.schedule_seed, i)))
                    .expect("spawn worker")
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect()
    });
    if let Some(e) = sh.error.lock().unwrap().take() {
        return Err(e);
    }
    merge(sh, per_worker_rhs, start)
}

fn merge<S: ConstraintSystem>(sh: Shared<'_, S>, per_worker_rhs: Vec<u64>, start: Instant) -> Result<Solved<S::Value>> {
    let sys = sh.sys;
    let created = sh.created.lock().unwrap().clone();
    let mut stats = SolveStats {
        widenings: sh.widenings.load(Ordering::Relaxed),
        ..SolveStats::default()
    };
    let mut termination = Termination {
        work_empty: sh.queue.is_empty(),
        all_stable: true,
        none_called: true,
        inboxes_drained: true,
    };
    let mut merged: FxHashMap<Unknown, S::Value> = FxHashMap::default();
    let mut evaluated_by: FxHashMap<Unknown, u32> = FxHashMap::default();
    let mut store_log = Vec::new();
    for &id in &created {
        let task = sh.task(id);
        let st = task.state.lock().unwrap();
        let t = st.termination();
        termination.work_empty &= t.work_empty;
        termination.all_stable &= t.all_stable;
        termination.none_called &= t.none_called;
        termination.inboxes_drained &= task.inbox.is_empty() && task.status.load(Ordering::Acquire) == TERMINATED;
        // every subscription ends up equal to the broker's value
        for &g in &st.subscribed {
            termination.inboxes_drained &= sh.broker.accumulated(g).as_ref() == Some(&st.data[&g].value);
        }
        stats.rhs_evaluations += st.stats.rhs_evaluations;
        stats.destabilizations += st.stats.destabilizations;
        stats.widenings += st.stats.widenings;
        store_log.extend(st.store_log.iter().cloned());
        for (&u, r) in &st.data {
            if sys.is_global(u) {
                continue;
            }
            if r.evaluated {
                *evaluated_by.entry(u).or_default() += 1;
            }
            match merged.get_mut(&u) {
                Some(v) => *v = v.join(&r.value)?,
                None => {
                    merged.insert(u, r.value.clone());
                }
            }
        }
    }
    let broker_values: Vec<_> = sh.broker.iter().collect();
    merged.extend(broker_values.iter().cloned());
    let solution: Solution<S::Value> = merged.into_iter().collect();

    let check = check_with(
        sys,
        solution.unknowns().filter(|&u| !sys.is_global(u)),
        &|u| solution.get(u).cloned(),
        &|u| solution.contains(u),
    )?;
    let mut violations: Vec<Unknown> = check.violations.iter().map(|v| v.unknown).collect();
    violations.sort();
    violations.dedup();
    let per_task_sound = violations.is_empty() || tasks_sound(&sh, &created, &solution)?;

    let duplicated = evaluated_by.values().filter(|&&n| n > 1).count();
    let detail = IndependentStats {
        tasks_created: created.len() as u64,
        revivals: sh.revivals.load(Ordering::Relaxed),
        publishes: sh.publishes.load(Ordering::Relaxed),
        updates_delivered: sh.delivered.load(Ordering::Relaxed),
        duplicate_work_ratio: if evaluated_by.is_empty() {
            0.0
        } else {
            duplicated as f64 / evaluated_by.len() as f64
        },
        per_worker_rhs,
    };
    store_log.extend(sh.store_log.into_inner().unwrap());
    stats.unknowns_reached = solution.len();
    stats.wall_time = start.elapsed();
    Ok(Solved {
        solution,
        stats,
        detail: SolverDetail::Independent(detail),
        termination,
        store_log,
        fixpoint_report: Some(FixpointReport {
            violations,
            per_task_sound,
        }),
    })
}

/// Verifies each task's private map on the locals it evaluated, reading
/// globals from the broker.
fn tasks_sound<S: ConstraintSystem>(
    sh: &Shared<'_, S>,
    created: &[Unknown],
    merged: &Solution<S::Value>,
) -> Result<bool> {
    for &id in created {
        let st = sh.task(id).state.lock().unwrap();
        let lookup = |u: Unknown| {
            if sh.sys.is_global(u) {
                sh.broker.accumulated(u)
            } else {
                st.data.get(&u).map(|r| r.value.clone())
            }
        };
        let own = st
            .data
            .iter()
            .filter(|(u, r)| r.evaluated && !sh.sys.is_global(**u))
            .map(|(u, _)| *u);
        if !check_with(sh.sys, own, &lookup, &|u| merged.contains(u))?.ok {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqsys::parse_system;
    use crate::{Interval, Value};

    const RUNNING: &str = include_str!("../../../corpus/systems/running.eqs");

    fn iv(lo: i64, hi: i64) -> Value {
        Interval::range(lo, hi).into()
    }

    #[test]
    fn running_example_under_many_schedules() {
        let sys = parse_system(RUNNING).unwrap();
        let root = sys.lookup("⟨13⟩").unwrap();
        let g = sys.lookup("g").unwrap();
        for workers in [1, 2, 4, 8] {
            for seed in 0..5 {
                let cfg = SolverConfig {
                    schedule_seed: Some(seed),
                    ..SolverConfig::default()
                };
                let r = solve_independent(&sys, &sys.roots(), workers, &cfg).unwrap();
                assert_eq!(r.solution.get(root), Some(&iv(1, 43)));
                assert_eq!(r.solution.get(g), Some(&iv(0, 42)));
                assert!(r.termination.holds(), "{:?}", r.termination);
                assert!(r.fixpoint_report.as_ref().unwrap().is_empty());
                let SolverDetail::Independent(d) = r.detail else {
                    panic!("wrong detail")
                };
                // the root and the demanded ⟨5⟩
                assert_eq!(d.tasks_created, 2);
                assert_eq!(d.per_worker_rhs.iter().sum::<u64>(), r.stats.rhs_evaluations);
            }
        }
    }

    #[test]
    fn truncated_tasks_yield_a_nonempty_report() {
        let sys = parse_system("lattice interval;\nx: local = const [1,1]\nr: local = get x").unwrap();
        let cfg = SolverConfig {
            truncate_evals: Some(1),
            ..SolverConfig::default()
        };
        let r = solve_independent(&sys, &sys.roots(), 1, &cfg).unwrap();
        let report = r.fixpoint_report.unwrap();
        // x was reached but never evaluated; r is consistent with x = bot
        assert_eq!(report.violations, vec![sys.lookup("x").unwrap()]);
        assert!(report.per_task_sound);
    }

    #[test]
    fn zero_workers_is_an_error() {
        let sys = parse_system(RUNNING).unwrap();
        assert!(matches!(
            solve_independent(&sys, &sys.roots(), 0, &SolverConfig::default()),
            Err(Error::NoWorkers)
        ));
    }
}
