use std::sync::Mutex;

use crate::eqsys::Unknown;
use crate::solver::grow;
use crate::solver::table::InsertOnlyMap;
use crate::{Lattice, Result};

struct Entry<V> {
    accumulated: V,
    growth: u32,
    subscribers: Vec<Unknown>,
}

/// Outcome of a publish.
pub(super) struct Published<V> {
    pub accumulated: V,
    /// Subscribers to notify; empty unless the contribution grew the value.
    pub notify: Vec<Unknown>,
    pub widened: bool,
}

/// Per-global accumulated values and subscriber lists. Each entry is guarded
/// by its own lock, which linearizes subscribe against publish.
pub(super) struct Broker<V> {
    entries: InsertOnlyMap<Mutex<Entry<V>>>,
    widen_delay: u32,
}

impl<V: Lattice> Broker<V> {
    pub fn new(buckets: usize, widen_delay: u32) -> Self {
        Broker {
            entries: InsertOnlyMap::with_buckets(buckets),
            widen_delay,
        }
    }

    fn entry(&self, g: Unknown, bottom: impl FnOnce() -> V) -> &Mutex<Entry<V>> {
        self.entries
            .get_or_insert_with(g, || {
                Mutex::new(Entry {
                    accumulated: bottom(),
                    growth: 0,
                    subscribers: Vec::new(),
                })
            })
            .0
    }

    pub fn subscribe(&self, task: Unknown, g: Unknown, bottom: impl FnOnce() -> V) -> V {
        let mut e = self.entry(g, bottom).lock().unwrap();
        if !e.subscribers.contains(&task) {
            e.subscribers.push(task);
        }
        e.accumulated.clone()
    }

    pub fn publish(&self, g: Unknown, contribution: &V, bottom: impl FnOnce() -> V) -> Result<Published<V>> {
        let mut e = self.entry(g, bottom).lock().unwrap();
        let widen = e.growth >= self.widen_delay;
        let Some((v, widened)) = grow(&e.accumulated, contribution, widen)? else {
            return Ok(Published {
                accumulated: e.accumulated.clone(),
                notify: Vec::new(),
                widened: false,
            });
        };
        e.accumulated = v;
        e.growth += 1;
        Ok(Published {
            accumulated: e.accumulated.clone(),
            notify: e.subscribers.clone(),
            widened,
        })
    }

    pub fn accumulated(&self, g: Unknown) -> Option<V> {
        self.entries.get(g).map(|e| e.lock().unwrap().accumulated.clone())
    }

    pub fn iter(&self) -> impl Iterator<Item = (Unknown, V)> + '_ {
        self.entries
            .iter()
            .map(|(g, e)| (g, e.lock().unwrap().accumulated.clone()))
    }
}
