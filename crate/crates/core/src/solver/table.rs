//! Insert-only concurrent hash table.
//!
//! Each bucket is a singly linked list that only ever grows at its tail,
//! appended with a compare-and-swap on the last `next` pointer, as in the
//! enqueue half of a Michael-Scott queue. Entries are never removed, so
//! readers need no reclamation scheme and references stay valid for the
//! lifetime of the table.

use std::hash::BuildHasher;
use std::ptr;
use std::sync::atomic::{AtomicPtr, Ordering};

use rustc_hash::FxBuildHasher;

use crate::eqsys::Unknown;

struct Node<T> {
    key: Unknown,
    value: T,
    next: AtomicPtr<Node<T>>,
}

pub(super) struct InsertOnlyMap<T> {
    buckets: Box<[AtomicPtr<Node<T>>]>,
    mask: usize,
}

// Nodes are shared by reference across threads and dropped only with the table.
unsafe impl<T: Send + Sync> Sync for InsertOnlyMap<T> {}
unsafe impl<T: Send> Send for InsertOnlyMap<T> {}

pub(super) const DEFAULT_BUCKETS: usize = 1 << 16;

impl<T> InsertOnlyMap<T> {
    /// `buckets` is rounded up to a power of two.
    pub fn with_buckets(buckets: usize) -> Self {
        let n = buckets.max(1).next_power_of_two();
        InsertOnlyMap {
            buckets: (0..n).map(|_| AtomicPtr::new(ptr::null_mut())).collect(),
            mask: n - 1,
        }
    }

    fn bucket(&self, key: Unknown) -> &AtomicPtr<Node<T>> {
        &self.buckets[FxBuildHasher.hash_one(key) as usize & self.mask]
    }

    pub fn get(&self, key: Unknown) -> Option<&T> {
        let mut cur = self.bucket(key).load(Ordering::Acquire);
        while !cur.is_null() {
            // SAFETY: published nodes live as long as the table.
            let node = unsafe { &*cur };
            if node.key == key {
                return Some(&node.value);
            }
            cur = node.next.load(Ordering::Acquire);
        }
        None
    }

    /// Returns the entry for `key`, inserting `make()` if absent. Concurrent
    /// calls for one key agree on the entry; the flag is true for the caller
    /// whose value was installed.
    pub fn get_or_insert_with(&self, key: Unknown, make: impl FnOnce() -> T) -> (&T, bool) {
        let mut make = Some(make);
        let mut fresh: *mut Node<T> = ptr::null_mut();
        let mut link = self.bucket(key);
        loop {
            let cur = link.load(Ordering::Acquire);
            if cur.is_null() {
                if fresh.is_null() {
                    let value = (make.take().expect("called once"))();
                    fresh = Box::into_raw(Box::new(Node {
                        key,
                        value,
                        next: AtomicPtr::new(ptr::null_mut()),
                    }));
                }
                match link.compare_exchange(cur, fresh, Ordering::AcqRel, Ordering::Acquire) {
                    // SAFETY: `fresh` is now published and owned by the table.
                    Ok(_) => return (unsafe { &(*fresh).value }, true),
                    // someone appended first; inspect their node
                    Err(_) => continue,
                }
            }
            // SAFETY: as in `get`.
            let node = unsafe { &*cur };
            if node.key == key {
                if !fresh.is_null() {
                    // SAFETY: `fresh` was never published.
                    drop(unsafe { Box::from_raw(fresh) });
                }
                return (&node.value, false);
            }
            link = &node.next;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Unknown, &T)> + '_ {
        self.buckets.iter().flat_map(|head| {
            let mut cur = head.load(Ordering::Acquire);
            std::iter::from_fn(move || {
                if cur.is_null() {
                    return None;
                }
                // SAFETY: as in `get`.
                let node = unsafe { &*cur };
                cur = node.next.load(Ordering::Acquire);
                Some((node.key, &node.value))
            })
        })
    }
}

impl<T> Drop for InsertOnlyMap<T> {
    fn drop(&mut self) {
        for head in self.buckets.iter_mut() {
            let mut cur = *head.get_mut();
            while !cur.is_null() {
                // SAFETY: exclusive access; every node was created by `Box::into_raw`.
                let mut node = unsafe { Box::from_raw(cur) };
                cur = *node.next.get_mut();
            }
        }
    }
}
