//! The busy-forbidden readers-writer protocol.
//!
//! Every registered thread owns a `busy` flag and a `forbidden` flag on its
//! own cache line. Shared entry sets `busy` and reads `forbidden`; exclusive
//! entry takes an internal mutex and fences every thread out by raising its
//! `forbidden` flag while that thread is not busy.

use std::cell::Cell;
use std::fmt;
use std::marker::PhantomData;
use std::num::NonZeroU32;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicU8, AtomicUsize, Ordering};
use std::time::Duration;

use crossbeam_utils::CachePadded;
use lock_api::{RawMutex as _, RawMutexTimed as _};
use parking_lot::RawMutex;
use thiserror::Error;

use Ordering::{Relaxed, SeqCst};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LockError {
    #[error("thread registry is full (capacity {capacity})")]
    RegistryFull { capacity: usize },
    #[error("context is still inside a {0} section")]
    InSection(Section),
    #[error("context is not registered with this lock")]
    NotRegistered,
}

/// Where a context currently is with respect to its lock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Free,
    Shared,
    Exclusive,
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Section::Free => "free",
            Section::Shared => "shared",
            Section::Exclusive => "exclusive",
        })
    }
}

/// How often a "sometimes" branch fires, evaluated per thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rate {
    Never,
    /// Fires on every n-th evaluation.
    Every(NonZeroU32),
    /// Fires on the first n evaluations, then never again.
    FirstN(u32),
}

impl Rate {
    pub const DEFAULT: Rate = Rate::Every(match NonZeroU32::new(1024) {
        Some(n) => n,
        None => unreachable!(),
    });

    fn fires(self, counter: &Cell<u32>) -> bool {
        match self {
            Rate::Never => false,
            Rate::Every(n) => {
                let c = counter.get() + 1;
                if c >= n.get() {
                    counter.set(0);
                    true
                } else {
                    counter.set(c);
                    false
                }
            }
            Rate::FirstN(n) => {
                let c = counter.get();
                if c < n {
                    counter.set(c + 1);
                    true
                } else {
                    false
                }
            }
        }
    }
}

/// What a shared entrant does after finding its forbidden flag raised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backoff {
    /// Try to take the internal mutex for at most this long, then release it.
    TimedLock(Duration),
    /// Spin for a bounded number of iterations, then yield the processor.
    SpinYield { spins: u32 },
}

#[derive(Debug, Clone, Copy)]
pub struct BfConfig {
    pub capacity: usize,
    /// The "sometimes" branch of the enter_exclusive sweep.
    pub enter_sometimes: Rate,
    /// The "sometimes" branch of the leave_exclusive sweep.
    pub leave_sometimes: Rate,
    pub backoff: Backoff,
    /// Track section occupancy and count mutual-exclusion violations.
    pub audit: bool,
}

impl Default for BfConfig {
    fn default() -> Self {
        BfConfig {
            capacity: 256,
            enter_sometimes: Rate::DEFAULT,
            leave_sometimes: Rate::DEFAULT,
            backoff: Backoff::TimedLock(Duration::from_millis(1)),
            audit: false,
        }
    }
}

// A slot's state starts at 0 (never used).
const ACTIVE: u8 = 1;
const RETIRED: u8 = 2;

#[derive(Default)]
struct Slot {
    busy: AtomicBool,
    forbidden: AtomicBool,
    state: AtomicU8,
}

#[derive(Default)]
struct Counters {
    lock_acquisitions: AtomicU64,
    sweep_retries: AtomicU64,
    sometimes_firings: AtomicU64,
    shared_backoffs: AtomicU64,
}

#[derive(Default)]
struct Occupancy {
    shared: AtomicUsize,
    exclusive: AtomicUsize,
    violations: AtomicU64,
}

/// Snapshot of the lock's instrumentation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LockStats {
    /// Acquisitions of the internal mutex by enter_exclusive and by
    /// successful timed attempts during shared backoff.
    pub lock_acquisitions: u64,
    /// Passes of the enter_exclusive sweep that had to be repeated.
    pub sweep_retries: u64,
    pub sometimes_firings: u64,
    pub shared_backoffs: u64,
    /// Occupancy violations seen by the audit (always 0 unless audit is on).
    pub violations: u64,
}

/// Per-thread handle onto a [`BfLock`]. Not `Send`: only the thread that
/// registered it may use it.
pub struct ThreadContext {
    lock_id: usize,
    index: usize,
    registered: Cell<bool>,
    section: Cell<Section>,
    enter_counter: Cell<u32>,
    leave_counter: Cell<u32>,
    _not_send: PhantomData<*const ()>,
}

impl ThreadContext {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn section(&self) -> Section {
        self.section.get()
    }

    pub fn is_registered(&self) -> bool {
        self.registered.get()
    }
}

impl fmt::Debug for ThreadContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ThreadContext")
            .field("index", &self.index)
            .field("registered", &self.registered.get())
            .field("section", &self.section.get())
            .finish()
    }
}

pub struct BfLock {
    config: BfConfig,
    slots: Box<[CachePadded<Slot>]>,
    high_water: AtomicUsize,
    mutex: RawMutex,
    counters: Counters,
    occupancy: Occupancy,
}

impl fmt::Debug for BfLock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BfLock")
            .field("config", &self.config)
            .field("registered", &self.registered_count())
            .finish()
    }
}

impl Default for BfLock {
    fn default() -> Self {
        BfLock::new(BfConfig::default())
    }
}

impl BfLock {
    pub fn new(config: BfConfig) -> Self {
        let slots = (0..config.capacity.max(1))
            .map(|_| CachePadded::new(Slot::default()))
            .collect();
        BfLock {
            config,
            slots,
            high_water: AtomicUsize::new(0),
            mutex: RawMutex::INIT,
            counters: Counters::default(),
            occupancy: Occupancy::default(),
        }
    }

    pub fn config(&self) -> &BfConfig {
        &self.config
    }

    fn id(&self) -> usize {
        self as *const BfLock as usize
    }

    /// Registers the calling thread. Registration holds the internal mutex so
    /// it never overlaps an exclusive section's sweep.
    pub fn register(&self) -> Result<ThreadContext, LockError> {
        self.mutex.lock();
        let result = self.claim_slot();
        // SAFETY: locked just above by this thread.
        unsafe { self.mutex.unlock() };
        let index = result?;
        Ok(ThreadContext {
            lock_id: self.id(),
            index,
            registered: Cell::new(true),
            section: Cell::new(Section::Free),
            enter_counter: Cell::new(0),
            leave_counter: Cell::new(0),
            _not_send: PhantomData,
        })
    }

    fn claim_slot(&self) -> Result<usize, LockError> {
        let hw = self.high_water.load(SeqCst);
        let index = match (0..hw).find(|&i| self.slots[i].state.load(SeqCst) == RETIRED) {
            Some(i) => i,
            None if hw < self.slots.len() => hw,
            None => {
                return Err(LockError::RegistryFull {
                    capacity: self.slots.len(),
                })
            }
        };
        let slot = &self.slots[index];
        slot.busy.store(false, SeqCst);
        slot.forbidden.store(false, SeqCst);
        slot.state.store(ACTIVE, SeqCst);
        if index == hw {
            self.high_water.store(hw + 1, SeqCst);
        }
        Ok(index)
    }

    /// Removes the context from the sweep set. The context must be free.
    pub fn deregister(&self, ctx: &ThreadContext) -> Result<(), LockError> {
        if ctx.lock_id != self.id() || !ctx.registered.get() {
            return Err(LockError::NotRegistered);
        }
        if ctx.section.get() != Section::Free {
            return Err(LockError::InSection(ctx.section.get()));
        }
        self.mutex.lock();
        let slot = &self.slots[ctx.index];
        slot.busy.store(false, SeqCst);
        slot.forbidden.store(false, SeqCst);
        slot.state.store(RETIRED, SeqCst);
        // SAFETY: locked just above by this thread.
        unsafe { self.mutex.unlock() };
        ctx.registered.set(false);
        Ok(())
    }

    /// Number of currently registered contexts.
    pub fn registered_count(&self) -> usize {
        let hw = self.high_water.load(SeqCst);
        self.slots[..hw]
            .iter()
            .filter(|s| s.state.load(SeqCst) == ACTIVE)
            .count()
    }

    pub fn busy(&self, index: usize) -> bool {
        self.slots[index].busy.load(SeqCst)
    }

    pub fn forbidden(&self, index: usize) -> bool {
        self.slots[index].forbidden.load(SeqCst)
    }

    fn expect(&self, ctx: &ThreadContext, section: Section) {
        assert!(
            ctx.lock_id == self.id() && ctx.registered.get(),
            "context is not registered with this lock"
        );
        assert_eq!(
            ctx.section.get(),
            section,
            "busy-forbidden lock used out of order"
        );
    }

    pub fn enter_shared(&self, ctx: &ThreadContext) {
        self.expect(ctx, Section::Free);
        let slot = &self.slots[ctx.index];
        slot.busy.store(true, SeqCst);
        while slot.forbidden.load(SeqCst) {
            slot.busy.store(false, SeqCst);
            self.counters.shared_backoffs.fetch_add(1, Relaxed);
            self.back_off();
            slot.busy.store(true, SeqCst);
        }
        ctx.section.set(Section::Shared);
        if self.config.audit {
            self.occupancy.shared.fetch_add(1, SeqCst);
            if self.occupancy.exclusive.load(SeqCst) != 0 {
                self.occupancy.violations.fetch_add(1, SeqCst);
            }
        }
    }

    fn back_off(&self) {
        match self.config.backoff {
            Backoff::TimedLock(timeout) => {
                if self.mutex.try_lock_for(timeout) {
                    self.counters.lock_acquisitions.fetch_add(1, Relaxed);
                    // SAFETY: the timed attempt just succeeded.
                    unsafe { self.mutex.unlock() };
                }
            }
            Backoff::SpinYield { spins } => {
                for _ in 0..spins {
                    std::hint::spin_loop();
                }
                std::thread::yield_now();
            }
        }
    }

    pub fn leave_shared(&self, ctx: &ThreadContext) {
        self.expect(ctx, Section::Shared);
        if self.config.audit {
            self.occupancy.shared.fetch_sub(1, SeqCst);
        }
        ctx.section.set(Section::Free);
        self.slots[ctx.index].busy.store(false, SeqCst);
    }

    pub fn enter_exclusive(&self, ctx: &ThreadContext) {
        self.expect(ctx, Section::Free);
        self.mutex.lock();
        self.counters.lock_acquisitions.fetch_add(1, Relaxed);
        // Registration is serialised by the mutex we hold, so the registry
        // cannot change during the sweep.
        let hw = self.high_water.load(SeqCst);
        loop {
            let mut pending = false;
            for slot in self.slots[..hw].iter() {
                if slot.state.load(SeqCst) != ACTIVE || slot.forbidden.load(SeqCst) {
                    continue;
                }
                slot.forbidden.store(true, SeqCst);
                let busy = slot.busy.load(SeqCst);
                let sometimes = !busy && self.config.enter_sometimes.fires(&ctx.enter_counter);
                if sometimes {
                    self.counters.sometimes_firings.fetch_add(1, Relaxed);
                }
                if busy || sometimes {
                    slot.forbidden.store(false, SeqCst);
                    pending = true;
                }
            }
            if !pending {
                break;
            }
            self.counters.sweep_retries.fetch_add(1, Relaxed);
            std::thread::yield_now();
        }
        ctx.section.set(Section::Exclusive);
        if self.config.audit {
            let before = self.occupancy.exclusive.fetch_add(1, SeqCst);
            if before != 0 || self.occupancy.shared.load(SeqCst) != 0 {
                self.occupancy.violations.fetch_add(1, SeqCst);
            }
        }
    }

    pub fn leave_exclusive(&self, ctx: &ThreadContext) {
        self.expect(ctx, Section::Exclusive);
        if self.config.audit {
            self.occupancy.exclusive.fetch_sub(1, SeqCst);
        }
        let hw = self.high_water.load(SeqCst);
        loop {
            let mut again = false;
            for slot in self.slots[..hw].iter() {
                if !slot.forbidden.load(SeqCst) {
                    continue;
                }
                slot.forbidden.store(false, SeqCst);
                if self.config.leave_sometimes.fires(&ctx.leave_counter) {
                    self.counters.sometimes_firings.fetch_add(1, Relaxed);
                    slot.forbidden.store(true, SeqCst);
                    again = true;
                }
            }
            if !again {
                break;
            }
        }
        ctx.section.set(Section::Free);
        // SAFETY: acquired in enter_exclusive by this context's thread.
        unsafe { self.mutex.unlock() };
    }

    pub fn stats(&self) -> LockStats {
        LockStats {
            lock_acquisitions: self.counters.lock_acquisitions.load(Relaxed),
            sweep_retries: self.counters.sweep_retries.load(Relaxed),
            sometimes_firings: self.counters.sometimes_firings.load(Relaxed),
            shared_backoffs: self.counters.shared_backoffs.load(Relaxed),
            violations: self.occupancy.violations.load(SeqCst),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicBool;
    use std::sync::Arc;
    use std::thread;

    fn quiet() -> BfConfig {
        BfConfig {
            enter_sometimes: Rate::Never,
            leave_sometimes: Rate::Never,
            audit: true,
            ..BfConfig::default()
        }
    }

    #[test]
    fn first_registrations_get_fresh_indices() {
        let lock = BfLock::default();
        let a = lock.register().unwrap();
        let b = lock.register().unwrap();
        assert_eq!((a.index(), b.index()), (0, 1));
        assert!(!lock.busy(0) && !lock.forbidden(0));
        assert!(!lock.busy(1) && !lock.forbidden(1));
    }

    #[test]
    fn registry_reuses_retired_slots() {
        let lock = BfLock::default();
        let a = lock.register().unwrap();
        let _b = lock.register().unwrap();
        lock.deregister(&a).unwrap();
        assert_eq!(lock.registered_count(), 1);
        let c = lock.register().unwrap();
        assert_eq!(c.index(), 0);
        assert!(!lock.busy(0) && !lock.forbidden(0));
    }

    #[test]
    fn registry_full_is_an_error() {
        let lock = BfLock::new(BfConfig {
            capacity: 2,
            ..BfConfig::default()
        });
        let _a = lock.register().unwrap();
        let _b = lock.register().unwrap();
        assert_eq!(
            lock.register().unwrap_err(),
            LockError::RegistryFull { capacity: 2 }
        );
    }

    #[test]
    fn deregister_inside_section_is_rejected() {
        let lock = BfLock::default();
        let a = lock.register().unwrap();
        lock.enter_shared(&a);
        assert_eq!(
            lock.deregister(&a),
            Err(LockError::InSection(Section::Shared))
        );
        lock.leave_shared(&a);
        lock.deregister(&a).unwrap();
        assert_eq!(lock.deregister(&a), Err(LockError::NotRegistered));
    }

    #[test]
    fn shared_round_trip_restores_flags_without_the_mutex() {
        let lock = BfLock::new(quiet());
        let a = lock.register().unwrap();
        lock.enter_shared(&a);
        assert!(lock.busy(0) && !lock.forbidden(0));
        lock.leave_shared(&a);
        assert!(!lock.busy(0) && !lock.forbidden(0));
        assert_eq!(lock.stats().lock_acquisitions, 0);
    }

    #[test]
    fn exclusive_round_trip_clears_all_flags() {
        let lock = BfLock::new(quiet());
        let a = lock.register().unwrap();
        let _b = lock.register().unwrap();
        lock.enter_exclusive(&a);
        assert!(lock.forbidden(0) && lock.forbidden(1));
        assert!(!lock.busy(0));
        lock.leave_exclusive(&a);
        assert!(!lock.forbidden(0) && !lock.forbidden(1));
        // the mutex is free again
        lock.enter_exclusive(&a);
        lock.leave_exclusive(&a);
        assert_eq!(lock.stats().lock_acquisitions, 2);
    }

    #[test]
    fn deregistered_threads_are_not_swept() {
        let lock = BfLock::new(quiet());
        let a = lock.register().unwrap();
        let b = lock.register().unwrap();
        lock.deregister(&b).unwrap();
        lock.enter_exclusive(&a);
        assert!(!lock.forbidden(1));
        lock.leave_exclusive(&a);
    }

    #[test]
    fn leave_sometimes_fires_once_and_is_cleared_again() {
        let lock = BfLock::new(BfConfig {
            leave_sometimes: Rate::FirstN(1),
            ..quiet()
        });
        let a = lock.register().unwrap();
        let _b = lock.register().unwrap();
        lock.enter_exclusive(&a);
        lock.leave_exclusive(&a);
        assert_eq!(lock.stats().sometimes_firings, 1);
        assert!(!lock.forbidden(0) && !lock.forbidden(1));
    }

    #[test]
    fn enter_sometimes_forces_a_retry_pass() {
        let lock = BfLock::new(BfConfig {
            enter_sometimes: Rate::FirstN(1),
            ..quiet()
        });
        let a = lock.register().unwrap();
        lock.enter_exclusive(&a);
        assert!(lock.forbidden(0));
        lock.leave_exclusive(&a);
        let s = lock.stats();
        assert_eq!((s.sometimes_firings, s.sweep_retries), (1, 1));
    }

    #[test]
    fn sweep_waits_for_busy_reader() {
        let lock = Arc::new(BfLock::new(quiet()));
        let reader_in = Arc::new(AtomicBool::new(false));
        let release = Arc::new(AtomicBool::new(false));
        let writer_done = Arc::new(AtomicBool::new(false));
        let reader = {
            let (lock, reader_in, release) = (lock.clone(), reader_in.clone(), release.clone());
            thread::spawn(move || {
                let ctx = lock.register().unwrap();
                lock.enter_shared(&ctx);
                reader_in.store(true, SeqCst);
                while !release.load(SeqCst) {
                    thread::yield_now();
                }
                lock.leave_shared(&ctx);
            })
        };
        while !reader_in.load(SeqCst) {
            thread::yield_now();
        }
        let writer = {
            let (lock, writer_done) = (lock.clone(), writer_done.clone());
            thread::spawn(move || {
                let ctx = lock.register().unwrap();
                lock.enter_exclusive(&ctx);
                writer_done.store(true, SeqCst);
                lock.leave_exclusive(&ctx);
            })
        };
        thread::sleep(Duration::from_millis(50));
        assert!(!writer_done.load(SeqCst));
        release.store(true, SeqCst);
        reader.join().unwrap();
        writer.join().unwrap();
        assert!(writer_done.load(SeqCst));
        assert!(lock.stats().sweep_retries > 0);
        assert_eq!(lock.stats().violations, 0);
    }

    #[test]
    fn shared_entry_blocks_during_exclusive() {
        let lock = Arc::new(BfLock::new(quiet()));
        let owner = lock.register().unwrap();
        let ready = Arc::new(AtomicBool::new(false));
        let go = Arc::new(AtomicBool::new(false));
        let entered = Arc::new(AtomicBool::new(false));
        let reader = {
            let (lock, ready, go, entered) =
                (lock.clone(), ready.clone(), go.clone(), entered.clone());
            thread::spawn(move || {
                let ctx = lock.register().unwrap();
                ready.store(true, SeqCst);
                while !go.load(SeqCst) {
                    thread::yield_now();
                }
                lock.enter_shared(&ctx);
                entered.store(true, SeqCst);
                lock.leave_shared(&ctx);
            })
        };
        while !ready.load(SeqCst) {
            thread::yield_now();
        }
        lock.enter_exclusive(&owner);
        go.store(true, SeqCst);
        thread::sleep(Duration::from_millis(30));
        assert!(!entered.load(SeqCst));
        lock.leave_exclusive(&owner);
        reader.join().unwrap();
        assert!(entered.load(SeqCst));
        assert!(lock.stats().shared_backoffs > 0);
    }

    #[test]
    fn pure_shared_stress_never_touches_the_mutex() {
        let lock = Arc::new(BfLock::new(BfConfig {
            audit: true,
            ..BfConfig::default()
        }));
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let lock = lock.clone();
                thread::spawn(move || {
                    let ctx = lock.register().unwrap();
                    for _ in 0..20_000 {
                        lock.enter_shared(&ctx);
                        lock.leave_shared(&ctx);
                    }
                    lock.deregister(&ctx).unwrap();
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        // only registration touched the mutex, and that is not counted
        assert_eq!(lock.stats().lock_acquisitions, 0);
    }

    #[test]
    fn mixed_stress_keeps_mutual_exclusion() {
        let lock = Arc::new(BfLock::new(BfConfig {
            audit: true,
            enter_sometimes: Rate::Every(NonZeroU32::new(7).unwrap()),
            leave_sometimes: Rate::Every(NonZeroU32::new(5).unwrap()),
            ..BfConfig::default()
        }));
        let in_exclusive = Arc::new(AtomicUsize::new(0));
        let in_shared = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..4)
            .map(|t| {
                let (lock, ex, sh) = (lock.clone(), in_exclusive.clone(), in_shared.clone());
                thread::spawn(move || {
                    for round in 0..40 {
                        let ctx = lock.register().unwrap();
                        for i in 0..200 {
                            if (i + t + round) % 17 == 0 {
                                lock.enter_exclusive(&ctx);
                                assert_eq!(ex.fetch_add(1, SeqCst), 0);
                                assert_eq!(sh.load(SeqCst), 0);
                                ex.fetch_sub(1, SeqCst);
                                lock.leave_exclusive(&ctx);
                            } else {
                                lock.enter_shared(&ctx);
                                sh.fetch_add(1, SeqCst);
                                assert_eq!(ex.load(SeqCst), 0);
                                sh.fetch_sub(1, SeqCst);
                                lock.leave_shared(&ctx);
                            }
                        }
                        lock.deregister(&ctx).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(lock.stats().violations, 0);
    }
}
