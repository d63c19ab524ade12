use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use crossbeam_queue::SegQueue;

use crate::eqsys::Unknown;

/// Shared top-level workset.
///
/// Membership is a per-record ticket: adding CASes it from 0 to a fresh
/// number, removing resets it, and queue entries whose ticket no longer
/// matches are discarded on pop. `outstanding` counts entries pushed but not
/// yet fully processed, so `queue empty && outstanding == 0` means no worker
/// can produce more work.
pub(super) struct Pool {
    queue: SegQueue<(Unknown, u64)>,
    outstanding: AtomicUsize,
    next_ticket: AtomicU64,
}

impl Pool {
    pub fn new() -> Self {
        Pool {
            queue: SegQueue::new(),
            outstanding: AtomicUsize::new(0),
            next_ticket: AtomicU64::new(1),
        }
    }

    /// Enqueues `u` unless its ticket shows it is already present.
    pub fn add(&self, u: Unknown, ticket: &AtomicU64) -> bool {
        if ticket.load(Ordering::Acquire) != 0 {
            return false;
        }
        let t = self.next_ticket.fetch_add(1, Ordering::Relaxed);
        if ticket
            .compare_exchange(0, t, Ordering::AcqRel, Ordering::Acquire)
            .is_err()
        {
            return false;
        }
        self.outstanding.fetch_add(1, Ordering::AcqRel);
        self.queue.push((u, t));
        true
    }

    pub fn pop(&self) -> Option<(Unknown, u64)> {
        self.queue.pop()
    }

    /// Marks a popped entry as processed.
    pub fn done(&self) {
        self.outstanding.fetch_sub(1, Ordering::AcqRel);
    }

    pub fn finished(&self) -> bool {
        self.outstanding.load(Ordering::Acquire) == 0
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn readding_a_present_unknown_is_a_noop() {
        let p = Pool::new();
        let t = AtomicU64::new(0);
        let u = Unknown::from_index(0);
        assert!(p.add(u, &t));
        assert!(!p.add(u, &t));
        let (v, tk) = p.pop().unwrap();
        assert_eq!((v, tk), (u, t.load(Ordering::Relaxed)));
        assert!(p.pop().is_none());
        assert!(!p.finished());
        p.done();
        assert!(p.finished());
    }
}
