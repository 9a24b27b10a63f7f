//! Shared write access for the push phases.
//!
//! Within one phase every array element has at most one writer and is not
//! read by anyone, so the arrays are handed to the workers as raw views.
//! The audit sink counts writers per slot to check that claim at run time.

use std::marker::PhantomData;
use std::sync::atomic::{AtomicU32, Ordering};

use serde::Serialize;

use crate::fields::NodeFlags;
use crate::lattice::MAX_Q;

/// Mutable view of a slice that may be written from several workers, each
/// element by at most one of them.
#[derive(Debug)]
pub(crate) struct SharedSlice<'a, T> {
    ptr: *mut T,
    len: usize,
    _marker: PhantomData<&'a mut [T]>,
}

impl<T> Clone for SharedSlice<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T> Copy for SharedSlice<'_, T> {}

// SAFETY: writes go through `write`, whose contract forbids concurrent
// access to the same element.
unsafe impl<T: Send> Send for SharedSlice<'_, T> {}
unsafe impl<T: Send> Sync for SharedSlice<'_, T> {}

impl<'a, T> SharedSlice<'a, T> {
    pub fn new(slice: &'a mut [T]) -> Self {
        Self {
            ptr: slice.as_mut_ptr(),
            len: slice.len(),
            _marker: PhantomData,
        }
    }

    pub fn empty() -> Self {
        Self {
            ptr: std::ptr::NonNull::dangling().as_ptr(),
            len: 0,
            _marker: PhantomData,
        }
    }

    /// # Safety
    /// `i < len`, and no other worker accesses element `i` during the phase.
    #[inline(always)]
    pub unsafe fn write(&self, i: usize, v: T) {
        debug_assert!(i < self.len, "slot {i} out of {}", self.len);
        self.ptr.add(i).write(v);
    }

    /// # Safety
    /// `i < len`, and no other worker writes element `i` during the phase.
    #[inline(always)]
    pub unsafe fn read(&self, i: usize) -> T
    where
        T: Copy,
    {
        debug_assert!(i < self.len, "slot {i} out of {}", self.len);
        self.ptr.add(i).read()
    }
}

/// One view per array of a set of equally sized arrays.
pub(crate) fn shared_set<'a, T>(arrays: &'a mut [Vec<T>]) -> [SharedSlice<'a, T>; MAX_Q] {
    let mut out = [SharedSlice::empty(); MAX_Q];
    for (slot, arr) in out.iter_mut().zip(arrays.iter_mut()) {
        *slot = SharedSlice::new(arr.as_mut_slice());
    }
    out
}

/// Destination of post-collision populations.
pub(crate) trait Sink<T>: Sync {
    /// # Safety
    /// `(a, idx)` is written by exactly one worker during the phase.
    unsafe fn put(&self, a: usize, idx: usize, v: T);
}

pub(crate) struct PlainSink<'a, T> {
    pub f: [SharedSlice<'a, T>; MAX_Q],
}

impl<T: Send + Sync> Sink<T> for PlainSink<'_, T> {
    #[inline(always)]
    unsafe fn put(&self, a: usize, idx: usize, v: T) {
        self.f[a].write(idx, v);
    }
}

/// Counts how many times each `(direction, node)` slot is written.
pub(crate) struct AuditSink<'a, T> {
    pub inner: PlainSink<'a, T>,
    pub counts: &'a [AtomicU32],
    pub nodes: usize,
}

impl<T: Send + Sync> Sink<T> for AuditSink<'_, T> {
    #[inline(always)]
    unsafe fn put(&self, a: usize, idx: usize, v: T) {
        self.counts[a * self.nodes + idx].fetch_add(1, Ordering::Relaxed);
        self.inner.put(a, idx, v);
    }
}

/// Writer statistics of one push phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WriteAudit {
    /// Largest number of writes any slot received.
    pub max_writers: u32,
    /// Slots written more than once.
    pub conflicts: usize,
    /// Fluid-node slots that received no write.
    pub missed: usize,
    /// Writes that targeted a solid node.
    pub solid_writes: usize,
}

impl WriteAudit {
    pub fn is_clean(&self) -> bool {
        self.max_writers == 1 && self.conflicts == 0 && self.missed == 0 && self.solid_writes == 0
    }

    pub(crate) fn from_counts(counts: &[AtomicU32], q: usize, flags: &[NodeFlags]) -> Self {
        let nodes = flags.len();
        let mut audit = WriteAudit::default();
        for a in 0..q {
            for (idx, flag) in flags.iter().enumerate() {
                let n = counts[a * nodes + idx].load(Ordering::Relaxed);
                audit.max_writers = audit.max_writers.max(n);
                if flag.is_fluid() {
                    if n == 0 {
                        audit.missed += 1;
                    } else if n > 1 {
                        audit.conflicts += 1;
                    }
                } else if n > 0 {
                    audit.solid_writes += 1;
                }
            }
        }
        audit
    }
}

pub(crate) fn audit_counters(len: usize) -> Vec<AtomicU32> {
    (0..len).map(|_| AtomicU32::new(0)).collect()
}
