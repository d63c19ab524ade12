//! Shared-state parallel TLTD.
//!
//! Every record lives once in an insert-only table. The transactional part
//! of a record (value and flags) is an immutable [`Snapshot`] replaced only
//! by compare-and-swap; influences sit outside it in a lock-free stack.
//! Owning a record (`owner != 0`) plays the role of `called`: at most one
//! worker iterates an unknown at any time.
//!
//! Ordering discipline: a reader records itself in `influences(y)` before
//! reading `y`'s value, and a writer destabilizes after its commit. Every
//! commit a reader misses therefore destabilizes it.

mod influence;
mod pool;

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use crossbeam_epoch::{self as epoch, Atomic, Owned};
use crossbeam_utils::Backoff;

use self::influence::InfluenceSet;
use self::pool::Pool;
use super::jitter::Jitter;
use super::table::{InsertOnlyMap, DEFAULT_BUCKETS};
use super::{check_roots, grow, ImmediateStats, SolveStats, Solved, SolverConfig, SolverDetail, Termination};
use crate::eqsys::{ConstraintSystem, Effects, Unknown};
use crate::{Error, Result};

struct Snapshot<V> {
    value: Arc<V>,
    stable: bool,
    /// Worker id holding the iteration claim, 0 if none.
    owner: u32,
    toplevel: bool,
    widen_point: bool,
    growth: u32,
}

impl<V> Clone for Snapshot<V> {
    fn clone(&self) -> Self {
        Snapshot {
            value: Arc::clone(&self.value),
            ..*self
        }
    }
}

struct Record<V> {
    snap: Atomic<Snapshot<V>>,
    influences: InfluenceSet,
    ticket: AtomicU64,
}

impl<V> Record<V> {
    fn new(bottom: V) -> Self {
        Record {
            snap: Atomic::new(Snapshot {
                value: Arc::new(bottom),
                stable: false,
                owner: 0,
                toplevel: false,
                widen_point: false,
                growth: 0,
            }),
            influences: InfluenceSet::new(),
            ticket: AtomicU64::new(0),
        }
    }

    fn load(&self) -> Snapshot<V> {
        let guard = epoch::pin();
        // SAFETY: the pointer is never null and retired snapshots outlive the guard.
        unsafe { self.snap.load(Ordering::Acquire, &guard).deref() }.clone()
    }
}

impl<V> Drop for Record<V> {
    fn drop(&mut self) {
        // SAFETY: exclusive access; no other thread can observe the snapshot.
        unsafe {
            let guard = epoch::unprotected();
            drop(self.snap.load(Ordering::Relaxed, guard).into_owned());
        }
    }
}

struct Shared<'a, S: ConstraintSystem> {
    sys: &'a S,
    cfg: &'a SolverConfig,
    table: InsertOnlyMap<Record<S::Value>>,
    pool: Pool,
    evals: AtomicU64,
    abort: AtomicBool,
    error: Mutex<Option<Error>>,
    store_log: Mutex<Vec<(Unknown, S::Value)>>,
}

impl<S: ConstraintSystem> Shared<'_, S> {
    fn record(&self, u: Unknown) -> &Record<S::Value> {
        self.table.get_or_insert_with(u, || Record::new(self.sys.bottom(u))).0
    }

    fn fail(&self, e: Error) {
        let mut slot = self.error.lock().unwrap();
        if slot.is_none() && !matches!(e, Error::Aborted) {
            *slot = Some(e);
        }
        self.abort.store(true, Ordering::Release);
    }
}

#[derive(Default)]
struct Counters {
    rhs: u64,
    cas_attempts: u64,
    cas_retries: u64,
    claims_skipped: u64,
    destabilizations: u64,
    widenings: u64,
}

struct Worker<'s, 'a, S: ConstraintSystem> {
    sh: &'s Shared<'a, S>,
    id: u32,
    n: Counters,
}

struct Ctx<'w, 's, 'a, S: ConstraintSystem> {
    w: &'w mut Worker<'s, 'a, S>,
    x: Unknown,
}

impl<S: ConstraintSystem> Effects<S::Value> for Ctx<'_, '_, '_, S> {
    fn get(&mut self, y: Unknown) -> Result<S::Value> {
        self.w.query(self.x, y)
    }

    fn set(&mut self, g: Unknown, contribution: S::Value) -> Result<()> {
        self.w.side(g, contribution)
    }

    fn demand(&mut self, y: Unknown) -> Result<()> {
        self.w.promote(y)
    }
}

impl<'s, 'a, S: ConstraintSystem> Worker<'s, 'a, S> {
    /// Replaces the snapshot of `rec` by `f(current)` until a CAS succeeds.
    /// `f` returning `None` abandons the update. Returns whether it committed.
    fn update<F>(&mut self, rec: &Record<S::Value>, mut f: F) -> Result<bool>
    where
        F: FnMut(&Snapshot<S::Value>) -> Result<Option<Snapshot<S::Value>>>,
    {
        let guard = epoch::pin();
        let mut cur = rec.snap.load(Ordering::Acquire, &guard);
        loop {
            // SAFETY: never null; protected by `guard`.
            let Some(next) = f(unsafe { cur.deref() })? else {
                return Ok(false);
            };
            self.n.cas_attempts += 1;
            match rec
                .snap
                .compare_exchange(cur, Owned::new(next), Ordering::AcqRel, Ordering::Acquire, &guard)
            {
                Ok(_) => {
                    // SAFETY: `cur` is unlinked; readers pinned before now may still hold it.
                    unsafe { guard.defer_destroy(cur) };
                    return Ok(true);
                }
                Err(e) => {
                    self.n.cas_retries += 1;
                    cur = e.current;
                }
            }
        }
    }

    fn claim(&mut self, rec: &Record<S::Value>) -> Result<bool> {
        let id = self.id;
        self.update(rec, |s| Ok((s.owner == 0).then(|| Snapshot { owner: id, ..s.clone() })))
    }

    fn log_store(&self, u: Unknown, v: &S::Value) {
        if self.sh.cfg.record_stores {
            self.sh.store_log.lock().unwrap().push((u, v.clone()));
        }
    }

    fn charge(&mut self) -> Result<()> {
        if self.sh.abort.load(Ordering::Acquire) {
            return Err(Error::Aborted);
        }
        let budget = self.sh.cfg.eval_budget;
        if self.sh.evals.fetch_add(1, Ordering::Relaxed) >= budget {
            return Err(Error::BudgetExceeded(budget));
        }
        self.n.rhs += 1;
        Ok(())
    }

    /// Runs the TLTD loop on `x`, which this worker has claimed.
    fn iterate(&mut self, x: Unknown, rec: &'s Record<S::Value>) -> Result<()> {
        loop {
            loop {
                let s = rec.load();
                debug_assert_eq!(s.owner, self.id, "iterating an unknown without its claim");
                if s.stable {
                    break;
                }
                self.update(rec, |s| {
                    Ok((!s.stable).then(|| Snapshot {
                        stable: true,
                        ..s.clone()
                    }))
                })?;
                self.charge()?;
                let sys = self.sh.sys;
                let new = sys.eval(x, &mut Ctx { w: self, x })?;
                self.commit(x, rec, &new)?;
            }
            if rec.load().toplevel {
                rec.ticket.store(0, Ordering::Release);
            }
            self.update(rec, |s| Ok(Some(Snapshot { owner: 0, ..s.clone() })))?;
            // a destabilization may have slipped in after the last check
            let s = rec.load();
            if s.stable || s.owner != 0 || !self.claim(rec)? {
                return Ok(());
            }
        }
    }

    /// Joins (or widens) `new` into the value of the claimed local `x`.
    fn commit(&mut self, x: Unknown, rec: &Record<S::Value>, new: &S::Value) -> Result<()> {
        let mut stored = None;
        let mut beyond = false;
        let committed = self.update(rec, |s| {
            Ok(grow(&*s.value, new, s.widen_point)?.map(|(v, b)| {
                let v = Arc::new(v);
                stored = Some(v.clone());
                beyond = b;
                Snapshot { value: v, ..s.clone() }
            }))
        })?;
        if committed {
            self.n.widenings += u64::from(beyond);
            self.log_store(x, stored.as_deref().expect("set on commit"));
            self.destabilize(rec);
        }
        Ok(())
    }

    fn query(&mut self, x: Unknown, y: Unknown) -> Result<S::Value> {
        let sh = self.sh;
        let rec = sh.record(y);
        let global = sh.sys.is_global(y);
        if global {
            self.update(rec, |s| {
                Ok((!s.stable).then(|| Snapshot {
                    stable: true,
                    ..s.clone()
                }))
            })?;
        } else {
            loop {
                let s = rec.load();
                if s.owner != 0 {
                    self.update(rec, |s| {
                        Ok((!s.widen_point).then(|| Snapshot {
                            widen_point: true,
                            ..s.clone()
                        }))
                    })?;
                    break;
                }
                if s.stable && !s.toplevel {
                    break;
                }
                if self.claim(rec)? {
                    self.iterate(y, rec)?;
                    break;
                }
            }
        }
        rec.influences.add(x);
        loop {
            let s = rec.load();
            if global || s.stable || s.owner != 0 {
                return Ok((*s.value).clone());
            }
            // unstable and unowned: nobody else is bound to re-evaluate it
            if self.claim(rec)? {
                self.iterate(y, rec)?;
            }
        }
    }

    fn side(&mut self, g: Unknown, contribution: S::Value) -> Result<()> {
        let sh = self.sh;
        if !sh.sys.is_global(g) {
            return Err(Error::InvalidSide(sh.sys.label(g).into_owned()));
        }
        let rec = sh.record(g);
        let delay = sh.cfg.widen_delay;
        let mut stored = None;
        let mut beyond = false;
        self.update(rec, |s| {
            stored = None;
            Ok(match grow(&*s.value, &contribution, s.growth >= delay)? {
                None => (!s.stable).then(|| Snapshot {
                    stable: true,
                    ..s.clone()
                }),
                Some((v, b)) => {
                    let v = Arc::new(v);
                    stored = Some(v.clone());
                    beyond = b;
                    Some(Snapshot {
                        value: v,
                        stable: true,
                        growth: s.growth + 1,
                        ..s.clone()
                    })
                }
            })
        })?;
        if let Some(v) = stored {
            self.n.widenings += u64::from(beyond);
            self.log_store(g, &v);
            self.destabilize(rec);
        }
        Ok(())
    }

    fn promote(&mut self, y: Unknown) -> Result<()> {
        let sh = self.sh;
        if sh.sys.is_global(y) {
            return Err(Error::InvalidDemand(sh.sys.label(y).into_owned()));
        }
        let rec = sh.record(y);
        self.update(rec, |s| {
            Ok((!s.toplevel).then(|| Snapshot {
                toplevel: true,
                ..s.clone()
            }))
        })?;
        sh.pool.add(y, &rec.ticket);
        Ok(())
    }

    fn destabilize(&mut self, rec: &Record<S::Value>) {
        for y in rec.influences.take_all() {
            let ry = self.sh.table.get(y).expect("influencers have records");
            let mut top = false;
            self.update(ry, |s| {
                top = s.toplevel;
                Ok(s.stable.then(|| Snapshot {
                    stable: false,
                    ..s.clone()
                }))
            })
            .expect("flag update cannot fail");
            self.n.destabilizations += 1;
            if top {
                self.sh.pool.add(y, &ry.ticket);
            }
            self.destabilize(ry);
        }
    }

    fn run(&mut self, jitter: &mut Jitter) {
        let sh = self.sh;
        let backoff = Backoff::new();
        jitter.start();
        while !sh.abort.load(Ordering::Acquire) {
            jitter.step();
            let Some((y, t)) = sh.pool.pop() else {
                if sh.pool.finished() {
                    break;
                }
                backoff.snooze();
                continue;
            };
            backoff.reset();
            let rec = sh.table.get(y).expect("queued unknowns have records");
            if rec.ticket.load(Ordering::Acquire) == t {
                match self.claim(rec) {
                    Ok(true) => {
                        if let Err(e) = self.iterate(y, rec) {
                            sh.fail(e);
                        }
                    }
                    Ok(false) => {
                        // the owner re-checks stability after releasing
                        self.n.claims_skipped += 1;
                        let _ = rec.ticket.compare_exchange(t, 0, Ordering::AcqRel, Ordering::Relaxed);
                    }
                    Err(e) => sh.fail(e),
                }
            }
            sh.pool.done();
        }
    }
}

/// Solves with `workers` threads sharing one record table.
pub fn solve_immediate<S: ConstraintSystem>(
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
        table: InsertOnlyMap::with_buckets(DEFAULT_BUCKETS),
        pool: Pool::new(),
        evals: AtomicU64::new(0),
        abort: AtomicBool::new(false),
        error: Mutex::new(None),
        store_log: Mutex::new(Vec::new()),
    };
    let mut init = Worker {
        sh: &sh,
        id: 0,
        n: Counters::default(),
    };
    for &r in roots {
        let rec = sh.record(r);
        init.update(rec, |s| {
            Ok((!s.toplevel).then(|| Snapshot {
                toplevel: true,
                ..s.clone()
            }))
        })?;
        sh.pool.add(r, &rec.ticket);
    }

    let counters: Vec<Counters> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|i| {
                let sh = &sh;
                thread::Builder::new()
                    .name(format!("fixlab-immediate-{i}"))
                    .stack_size(cfg.stack_size)
                    .spawn_scoped(scope, move || {
                        let mut w = Worker {
                            sh,
                            id: i as u32 + 1,
                            n: Counters::default(),
                        };
                        w.run(&mut Jitter::new(cfg.schedule_seed, i));
                        w.n
                    })
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

    let mut detail = ImmediateStats {
        cas_attempts: init.n.cas_attempts,
        cas_retries: init.n.cas_retries,
        ..ImmediateStats::default()
    };
    let mut stats = SolveStats::default();
    for c in &counters {
        detail.cas_attempts += c.cas_attempts;
        detail.cas_retries += c.cas_retries;
        detail.claims_skipped += c.claims_skipped;
        detail.per_worker_rhs.push(c.rhs);
        stats.rhs_evaluations += c.rhs;
        stats.destabilizations += c.destabilizations;
        stats.widenings += c.widenings;
    }

    let mut termination = Termination {
        work_empty: sh.pool.is_empty(),
        all_stable: true,
        none_called: true,
        inboxes_drained: true,
    };
    let mut solution = super::Solution::new();
    for (u, rec) in sh.table.iter() {
        let s = rec.load();
        termination.work_empty &= rec.ticket.load(Ordering::Acquire) == 0;
        termination.all_stable &= s.stable;
        termination.none_called &= s.owner == 0;
        solution.insert(u, (*s.value).clone());
    }
    stats.unknowns_reached = solution.len();
    stats.wall_time = start.elapsed();
    Ok(Solved {
        solution,
        stats,
        detail: SolverDetail::Immediate(detail),
        termination,
        store_log: sh.store_log.into_inner().unwrap(),
        fixpoint_report: None,
    })
}
