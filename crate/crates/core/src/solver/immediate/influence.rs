use std::ptr;
use std::sync::atomic::{AtomicPtr, Ordering};

use rustc_hash::FxHashSet;

use crate::eqsys::Unknown;

struct Node {
    u: Unknown,
    next: *mut Node,
}

/// Lock-free influence set: a push-only stack emptied by one atomic swap.
///
/// Duplicates are kept until [`take_all`](Self::take_all), which returns the
/// distinct members in first-insertion order.
pub(super) struct InfluenceSet {
    head: AtomicPtr<Node>,
}

// Nodes are owned by the stack until detached by `take_all`.
unsafe impl Send for InfluenceSet {}
unsafe impl Sync for InfluenceSet {}

impl InfluenceSet {
    pub fn new() -> Self {
        InfluenceSet {
            head: AtomicPtr::new(ptr::null_mut()),
        }
    }

    pub fn add(&self, u: Unknown) {
        let node = Box::into_raw(Box::new(Node {
            u,
            next: ptr::null_mut(),
        }));
        let mut head = self.head.load(Ordering::Relaxed);
        loop {
            // SAFETY: `node` is not yet shared. Pushing never dereferences `head`,
            // so a detached-and-reused address cannot corrupt the list.
            unsafe { (*node).next = head };
            match self
                .head
                .compare_exchange_weak(head, node, Ordering::Release, Ordering::Relaxed)
            {
                Ok(_) => return,
                Err(h) => head = h,
            }
        }
    }

    pub fn take_all(&self) -> Vec<Unknown> {
        let mut cur = self.head.swap(ptr::null_mut(), Ordering::Acquire);
        let mut out = Vec::new();
        while !cur.is_null() {
            // SAFETY: the swap detached the whole list; this thread owns it.
            let node = unsafe { Box::from_raw(cur) };
            out.push(node.u);
            cur = node.next;
        }
        out.reverse();
        let mut seen = FxHashSet::default();
        out.retain(|u| seen.insert(*u));
        out
    }
}

impl Drop for InfluenceSet {
    fn drop(&mut self) {
        self.take_all();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    fn u(i: usize) -> Unknown {
        Unknown::from_index(i)
    }

    #[test]
    fn first_insertion_order_without_duplicates() {
        let s = InfluenceSet::new();
        for i in [3, 1, 3, 2, 1] {
            s.add(u(i));
        }
        assert_eq!(s.take_all(), vec![u(3), u(1), u(2)]);
        assert!(s.take_all().is_empty());
    }

    #[test]
    fn concurrent_adds_are_never_lost() {
        let s = InfluenceSet::new();
        let taken: Vec<Unknown> = thread::scope(|sc| {
            for t in 0..4 {
                let s = &s;
                sc.spawn(move || (0..1000).for_each(|i| s.add(u(t * 1000 + i))));
            }
            let s = &s;
            let taker = sc.spawn(move || (0..50).flat_map(|_| s.take_all()).collect::<Vec<_>>());
            taker.join().unwrap()
        });
        let mut all: Vec<_> = taken.into_iter().chain(s.take_all()).map(Unknown::index).collect();
        all.sort();
        all.dedup();
        assert_eq!(all, (0..4000).collect::<Vec<_>>());
    }
}
