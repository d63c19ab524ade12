//! Single-owner TLTD engine.
//!
//! The sequential solver runs one engine over the whole system. The
//! independent solver runs one engine per task and plugs a [`TaskLink`] in,
//! which reroutes global reads, global writes and demands to the broker.

use std::collections::VecDeque;
use std::mem;

use indexmap::IndexSet;
use rustc_hash::{FxBuildHasher, FxHashMap, FxHashSet};

use super::{grow, SolveStats, SolverConfig, Termination};
use crate::eqsys::{ConstraintSystem, Effects, Unknown};
use crate::{Error, Lattice, Result};

pub(super) struct Record<V> {
    pub value: V,
    pub stable: bool,
    pub called: bool,
    pub toplevel: bool,
    pub widen_point: bool,
    /// Strictly growing side contributions received (globals only).
    pub growth: u32,
    pub influences: IndexSet<Unknown, FxBuildHasher>,
    /// Nonzero while queued in `work`; matches the live queue entry.
    ticket: u64,
    /// The right-hand side was evaluated at least once.
    pub evaluated: bool,
}

impl<V> Record<V> {
    fn new(value: V) -> Self {
        Record {
            value,
            stable: false,
            called: false,
            toplevel: false,
            widen_point: false,
            growth: 0,
            influences: IndexSet::default(),
            ticket: 0,
            evaluated: false,
        }
    }
}

/// Solver state that outlives a single engine activation.
pub(super) struct State<V> {
    pub data: FxHashMap<Unknown, Record<V>>,
    /// FIFO with lazy deletion: entries whose ticket no longer matches are skipped.
    work: VecDeque<(Unknown, u64)>,
    in_work: usize,
    next_ticket: u64,
    pub stats: SolveStats,
    pub store_log: Vec<(Unknown, V)>,
    pub subscribed: FxHashSet<Unknown>,
    pub truncated: bool,
}

impl<V> Default for State<V> {
    fn default() -> Self {
        State {
            data: FxHashMap::default(),
            work: VecDeque::new(),
            in_work: 0,
            next_ticket: 0,
            stats: SolveStats::default(),
            store_log: Vec::new(),
            subscribed: FxHashSet::default(),
            truncated: false,
        }
    }
}

impl<V> State<V> {
    pub fn termination(&self) -> Termination {
        Termination {
            work_empty: self.in_work == 0,
            all_stable: self.data.values().all(|r| r.stable),
            none_called: self.data.values().all(|r| !r.called),
            inboxes_drained: true,
        }
    }
}

/// Broker-side services an independent task needs.
pub(super) trait TaskEnv<V>: Sync {
    /// Registers `task` for updates of `g`; returns the value accumulated so far.
    fn subscribe(&self, task: Unknown, g: Unknown) -> V;
    /// Contributes to `g`; returns the accumulated value after the contribution.
    fn publish(&self, task: Unknown, g: Unknown, contribution: V) -> Result<V>;
    /// Makes sure a task rooted at `root` exists.
    fn spawn(&self, root: Unknown);
    /// Takes every pending update of `task`.
    fn take_updates(&self, task: Unknown) -> Vec<(Unknown, V)>;
    /// Accounts for one evaluation against the shared budget.
    fn charge(&self) -> Result<()>;
}

pub(super) struct TaskLink<'a, V> {
    pub id: Unknown,
    pub env: &'a dyn TaskEnv<V>,
}

impl<V> Clone for TaskLink<'_, V> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<V> Copy for TaskLink<'_, V> {}

pub(super) struct Engine<'a, S: ConstraintSystem> {
    sys: &'a S,
    cfg: &'a SolverConfig,
    st: &'a mut State<S::Value>,
    link: Option<TaskLink<'a, S::Value>>,
}

struct Ctx<'e, 'a, S: ConstraintSystem> {
    eng: &'e mut Engine<'a, S>,
    x: Unknown,
}

impl<S: ConstraintSystem> Effects<S::Value> for Ctx<'_, '_, S> {
    fn get(&mut self, y: Unknown) -> Result<S::Value> {
        self.eng.query(self.x, y)
    }

    fn set(&mut self, g: Unknown, contribution: S::Value) -> Result<()> {
        self.eng.side(g, contribution)
    }

    fn demand(&mut self, y: Unknown) -> Result<()> {
        self.eng.promote(y)
    }
}

impl<'a, S: ConstraintSystem> Engine<'a, S> {
    pub fn new(
        sys: &'a S,
        cfg: &'a SolverConfig,
        st: &'a mut State<S::Value>,
        link: Option<TaskLink<'a, S::Value>>,
    ) -> Self {
        Engine { sys, cfg, st, link }
    }

    fn rec(&mut self, u: Unknown) -> &mut Record<S::Value> {
        let sys = self.sys;
        self.st.data.entry(u).or_insert_with(|| Record::new(sys.bottom(u)))
    }

    fn log_store(&mut self, u: Unknown) {
        if self.cfg.record_stores {
            let v = self.st.data[&u].value.clone();
            self.st.store_log.push((u, v));
        }
    }

    pub fn add_root(&mut self, r: Unknown) {
        self.rec(r).toplevel = true;
        self.add_work(r);
    }

    fn add_work(&mut self, y: Unknown) {
        let next = self.st.next_ticket + 1;
        let r = self.rec(y);
        if r.ticket == 0 {
            r.ticket = next;
            self.st.next_ticket = next;
            self.st.work.push_back((y, next));
            self.st.in_work += 1;
        }
    }

    fn remove_work(&mut self, x: Unknown) {
        let r = self.rec(x);
        if r.ticket != 0 {
            r.ticket = 0;
            self.st.in_work -= 1;
        }
    }

    fn pop_work(&mut self) -> Option<Unknown> {
        while let Some((y, t)) = self.st.work.pop_front() {
            if self.st.data.get(&y).is_some_and(|r| r.ticket == t) {
                return Some(y);
            }
        }
        None
    }

    fn truncated(&mut self) -> bool {
        if self.link.is_some()
            && self
                .cfg
                .truncate_evals
                .is_some_and(|n| self.st.stats.rhs_evaluations >= n)
        {
            self.st.truncated = true;
        }
        self.st.truncated
    }

    /// Iterates top-level unknowns until the workset is empty.
    pub fn run(&mut self) -> Result<()> {
        while let Some(x) = self.pop_work() {
            if self.truncated() {
                self.st.work.clear();
                for r in self.st.data.values_mut() {
                    r.ticket = 0;
                }
                self.st.in_work = 0;
                break;
            }
            self.iterate(x)?;
        }
        Ok(())
    }

    fn charge(&mut self) -> Result<()> {
        match self.link {
            Some(link) => link.env.charge()?,
            None if self.st.stats.rhs_evaluations >= self.cfg.eval_budget => {
                return Err(Error::BudgetExceeded(self.cfg.eval_budget))
            }
            None => {}
        }
        self.st.stats.rhs_evaluations += 1;
        Ok(())
    }

    fn iterate(&mut self, x: Unknown) -> Result<()> {
        self.rec(x).called = true;
        while !self.st.data[&x].stable {
            if self.truncated() {
                break;
            }
            let r = self.rec(x);
            r.stable = true;
            r.evaluated = true;
            self.charge()?;
            let sys = self.sys;
            let new = sys.eval(x, &mut Ctx { eng: self, x })?;
            let r = self.rec(x);
            if let Some((v, beyond)) = grow(&r.value, &new, r.widen_point)? {
                r.value = v;
                self.st.stats.widenings += u64::from(beyond);
                self.log_store(x);
                self.destabilize(x);
            }
            if self.link.is_some() {
                self.drain()?;
            }
        }
        let r = self.rec(x);
        r.called = false;
        if r.toplevel {
            self.remove_work(x);
        }
        Ok(())
    }

    fn query(&mut self, x: Unknown, y: Unknown) -> Result<S::Value> {
        if self.sys.is_global(y) {
            if let Some(link) = self.link {
                if self.st.subscribed.insert(y) {
                    let acc = link.env.subscribe(link.id, y);
                    let r = self.rec(y);
                    r.value = r.value.join(&acc)?;
                }
            }
            self.rec(y).stable = true;
        } else if self.rec(y).called {
            self.rec(y).widen_point = true;
        } else {
            self.iterate(y)?;
        }
        let r = self.rec(y);
        r.influences.insert(x);
        Ok(r.value.clone())
    }

    fn side(&mut self, g: Unknown, contribution: S::Value) -> Result<()> {
        if !self.sys.is_global(g) {
            return Err(Error::InvalidSide(self.sys.label(g).into_owned()));
        }
        let (incoming, widen) = match self.link {
            Some(link) => (link.env.publish(link.id, g, contribution)?, false),
            None => {
                let r = self.rec(g);
                (contribution, r.growth >= self.cfg.widen_delay)
            }
        };
        let r = self.rec(g);
        r.stable = true;
        if let Some((v, beyond)) = grow(&r.value, &incoming, widen)? {
            r.value = v;
            r.growth += 1;
            self.st.stats.widenings += u64::from(beyond);
            self.log_store(g);
            self.destabilize(g);
        }
        Ok(())
    }

    fn promote(&mut self, y: Unknown) -> Result<()> {
        if self.sys.is_global(y) {
            return Err(Error::InvalidDemand(self.sys.label(y).into_owned()));
        }
        match self.link {
            Some(link) => link.env.spawn(y),
            None => {
                self.rec(y).toplevel = true;
                self.add_work(y);
            }
        }
        Ok(())
    }

    fn destabilize(&mut self, x: Unknown) {
        let influenced = mem::take(&mut self.rec(x).influences);
        for y in influenced {
            let r = self.rec(y);
            r.stable = false;
            let top = r.toplevel;
            self.st.stats.destabilizations += 1;
            if top {
                self.add_work(y);
            }
            self.destabilize(y);
        }
    }

    /// Applies pending broker updates to the private copies of globals.
    pub fn drain(&mut self) -> Result<()> {
        let Some(link) = self.link else {
            return Ok(());
        };
        for (g, v) in link.env.take_updates(link.id) {
            let r = self.rec(g);
            if let Some((nv, _)) = grow(&r.value, &v, false)? {
                r.value = nv;
                self.log_store(g);
                self.destabilize(g);
            }
        }
        Ok(())
    }
}
