//! Maximally shared immutable terms.
//!
//! Nodes live in a hash table whose buckets are lock-free prepend-only
//! lists. Creation and copying run in shared sections of the table's lock;
//! garbage collection and rehashing run in exclusive sections, which are the
//! only places where list cells are unlinked or freed.

mod node;
pub mod script;
mod symbols;

use std::cell::{Cell, UnsafeCell};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::marker::PhantomData;
use std::ptr::{self, NonNull};
use std::sync::atomic::{AtomicPtr, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crossbeam_utils::CachePadded;
use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::busy_forbidden::{BfConfig, LockError, LockStats};
use crate::protection::{ProtectionError, ProtectionSet, Strategy};
use crate::sections::{Backend, SectionContext, SectionLock};
use node::{hash_term, Node};
pub use symbols::FunctionSymbol;
use symbols::SymbolTable;

use Ordering::{AcqRel, Acquire, Relaxed, SeqCst};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("symbol {symbol} expects {expected} arguments, got {got}")]
    ArityMismatch {
        symbol: String,
        expected: usize,
        got: usize,
    },
    #[error("argument {index} out of range for arity {arity}")]
    ArgumentOutOfRange { index: usize, arity: usize },
    #[error("out of memory while constructing a term node")]
    OutOfMemory,
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Protection(#[from] ProtectionError),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
}

/// When destroys should trigger a collection.
#[derive(Debug, Clone, Copy)]
pub struct GcPolicy {
    pub automatic: bool,
    /// Collect once more than max(threshold, fraction * live) terms were
    /// destroyed since the last collection.
    pub threshold: usize,
    pub fraction: f64,
}

impl Default for GcPolicy {
    fn default() -> Self {
        GcPolicy {
            automatic: true,
            threshold: 1 << 16,
            fraction: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LibraryConfig {
    pub strategy: Strategy,
    pub backend: Backend,
    /// Lock parameters; `lock.capacity` also bounds the number of sessions.
    pub lock: BfConfig,
    /// Rounded up to a power of two.
    pub initial_buckets: usize,
    /// Grow the table when live nodes exceed this fraction of the buckets.
    pub max_load: f64,
    pub gc: GcPolicy,
    /// Refuse to construct nodes beyond this many live ones, reported as
    /// [`TermError::OutOfMemory`].
    pub node_limit: Option<usize>,
    /// Check table and protection invariants after every collection and
    /// audit lock occupancy.
    pub audit: bool,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig {
            strategy: Strategy::ProtectionSet,
            backend: Backend::BusyForbidden,
            lock: BfConfig::default(),
            initial_buckets: 1 << 16,
            max_load: 0.75,
            gc: GcPolicy::default(),
            node_limit: None,
            audit: false,
        }
    }
}

impl LibraryConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        LibraryConfig {
            strategy,
            ..LibraryConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GcStats {
    pub reclaimed: usize,
    pub live: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LibraryStats {
    pub live_nodes: usize,
    pub buckets: usize,
    pub collections: u64,
    pub reclaimed: u64,
    pub cas_failures: u64,
    /// Candidates built by a losing insert and thrown away again.
    pub discarded_candidates: u64,
    pub rehashes: u64,
    pub audit_violations: u64,
    pub lock: LockStats,
}

#[derive(Default)]
struct Counters {
    collections: AtomicU64,
    reclaimed: AtomicU64,
    cas_failures: AtomicU64,
    discarded: AtomicU64,
    rehashes: AtomicU64,
    audit_violations: AtomicU64,
}

type Buckets = Box<[AtomicPtr<Node>]>;

fn new_buckets(len: usize) -> Buckets {
    (0..len).map(|_| AtomicPtr::new(ptr::null_mut())).collect()
}

pub struct TermLibrary {
    config: LibraryConfig,
    lock: SectionLock,
    symbols: SymbolTable,
    /// Replaced only inside the exclusive section.
    table: UnsafeCell<Buckets>,
    bucket_count: AtomicUsize,
    live: AtomicUsize,
    destroyed: AtomicUsize,
    /// One protection set per session slot. The owning session mutates its
    /// set only inside shared sections; the collector reads all of them only
    /// inside the exclusive section.
    sets: Box<[CachePadded<UnsafeCell<ProtectionSet>>]>,
    slots: Mutex<Vec<bool>>,
    /// Thread-independent roots used to hand terms between threads.
    pins: Mutex<FxHashMap<usize, usize>>,
    counters: Counters,
}

// SAFETY: the unsynchronised cells are only touched under the protocol
// described on the fields above.
unsafe impl Sync for TermLibrary {}
unsafe impl Send for TermLibrary {}

impl fmt::Debug for TermLibrary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TermLibrary")
            .field("strategy", &self.config.strategy)
            .field("backend", &self.config.backend)
            .field("live", &self.live.load(Relaxed))
            .finish()
    }
}

impl Default for TermLibrary {
    fn default() -> Self {
        TermLibrary::new(LibraryConfig::default())
    }
}

impl TermLibrary {
    pub fn new(config: LibraryConfig) -> Self {
        let buckets = config.initial_buckets.max(1).next_power_of_two();
        let capacity = config.lock.capacity.max(1);
        let lock_config = BfConfig {
            audit: config.lock.audit || config.audit,
            ..config.lock
        };
        TermLibrary {
            config,
            lock: SectionLock::new(config.backend, lock_config),
            symbols: SymbolTable::default(),
            table: UnsafeCell::new(new_buckets(buckets)),
            bucket_count: AtomicUsize::new(buckets),
            live: AtomicUsize::new(0),
            destroyed: AtomicUsize::new(0),
            sets: (0..capacity)
                .map(|i| CachePadded::new(UnsafeCell::new(ProtectionSet::new(i))))
                .collect(),
            slots: Mutex::new(vec![false; capacity]),
            pins: Mutex::new(FxHashMap::default()),
            counters: Counters::default(),
        }
    }

    pub fn config(&self) -> &LibraryConfig {
        &self.config
    }

    pub fn strategy(&self) -> Strategy {
        self.config.strategy
    }

    pub fn declare_symbol(&self, name: &str, arity: usize) -> FunctionSymbol {
        self.symbols.declare(name, arity)
    }

    pub fn symbol_name(&self, symbol: FunctionSymbol) -> Arc<str> {
        self.symbols.name(symbol)
    }

    /// Registers the calling thread.
    pub fn session(&self) -> Result<Session<'_>, TermError> {
        let slot = {
            let mut slots = self.slots.lock().unwrap();
            let Some(i) = slots.iter().position(|used| !used) else {
                return Err(LockError::RegistryFull {
                    capacity: slots.len(),
                }
                .into());
            };
            slots[i] = true;
            i
        };
        match self.lock.register() {
            Ok(ctx) => Ok(Session {
                lib: self,
                ctx,
                slot,
                pending_destroys: Cell::new(0),
                _not_send: PhantomData,
            }),
            Err(e) => {
                self.slots.lock().unwrap()[slot] = false;
                Err(e.into())
            }
        }
    }

    /// Number of live nodes in the table.
    pub fn live_nodes(&self) -> usize {
        self.live.load(SeqCst)
    }

    pub fn stats(&self) -> LibraryStats {
        LibraryStats {
            live_nodes: self.live.load(SeqCst),
            buckets: self.bucket_count.load(SeqCst),
            collections: self.counters.collections.load(Relaxed),
            reclaimed: self.counters.reclaimed.load(Relaxed),
            cas_failures: self.counters.cas_failures.load(Relaxed),
            discarded_candidates: self.counters.discarded.load(Relaxed),
            rehashes: self.counters.rehashes.load(Relaxed),
            audit_violations: self.counters.audit_violations.load(Relaxed),
            lock: self.lock.stats(),
        }
    }

    /// # Safety
    /// Caller is inside a shared or exclusive section.
    unsafe fn buckets(&self) -> &Buckets {
        &*self.table.get()
    }

    fn construct(
        &self,
        symbol: u32,
        args: &[NonNull<Node>],
        hash: u64,
    ) -> Result<NonNull<Node>, TermError> {
        if let Some(limit) = self.config.node_limit {
            if self.live.load(SeqCst) >= limit {
                return Err(TermError::OutOfMemory);
            }
        }
        Node::alloc(symbol, args, hash).ok_or(TermError::OutOfMemory)
    }

    /// Returns the unique node for `symbol(args)`, publishing a new one if
    /// none exists. `before_publish` runs right before each publication
    /// attempt; tests use it to provoke races.
    ///
    /// # Safety
    /// Caller is inside a shared section and all `args` are live.
    unsafe fn find_or_insert<F: FnMut()>(
        &self,
        symbol: u32,
        args: &[NonNull<Node>],
        hash: u64,
        mut before_publish: F,
    ) -> Result<NonNull<Node>, TermError> {
        let buckets = self.buckets();
        let head = &buckets[hash as usize & (buckets.len() - 1)];
        let mut top = head.load(Acquire);
        // Nodes from `stop` onwards were already scanned.
        let mut stop: *mut Node = ptr::null_mut();
        loop {
            let mut cur = top;
            while cur != stop {
                let node = &*cur;
                if node.hash == hash && node.represents(symbol, args) {
                    return Ok(NonNull::new_unchecked(cur));
                }
                cur = node.next.load(Acquire);
            }
            let candidate = self.construct(symbol, args, hash)?;
            candidate.as_ref().next.store(top, Relaxed);
            before_publish();
            match head.compare_exchange(top, candidate.as_ptr(), AcqRel, Acquire) {
                Ok(_) => {
                    self.live.fetch_add(1, SeqCst);
                    if self.config.strategy == Strategy::RefCount {
                        for child in args {
                            child.as_ref().refs.increment();
                        }
                    }
                    return Ok(candidate);
                }
                Err(now) => {
                    Node::free(candidate);
                    self.counters.cas_failures.fetch_add(1, Relaxed);
                    self.counters.discarded.fetch_add(1, Relaxed);
                    stop = top;
                    top = now;
                }
            }
        }
    }

    fn gc_due(&self) -> bool {
        let policy = &self.config.gc;
        let live = self.live.load(Relaxed) as f64;
        let bound = (policy.threshold as f64).max(policy.fraction * live);
        self.destroyed.load(Relaxed) as f64 > bound
    }

    fn rehash_due(&self) -> bool {
        self.live.load(Relaxed) as f64 > self.config.max_load * self.bucket_count.load(Relaxed) as f64
    }

    /// Roots of the protection-set strategy.
    ///
    /// # Safety
    /// Caller is inside the exclusive section.
    unsafe fn roots(&self) -> Vec<NonNull<Node>> {
        let mut roots = Vec::new();
        for set in self.sets.iter() {
            roots.extend((*set.get()).addresses().map(|a| NonNull::new_unchecked(a as *mut Node)));
        }
        let pins = self.pins.lock().unwrap();
        roots.extend(pins.keys().map(|&a| NonNull::new_unchecked(a as *mut Node)));
        roots
    }

    /// Marks everything reachable from `roots`.
    ///
    /// # Safety
    /// Caller is inside the exclusive section.
    unsafe fn mark_from(&self, roots: Vec<NonNull<Node>>) {
        let mut stack = roots;
        while let Some(n) = stack.pop() {
            let node = n.as_ref();
            if node.is_marked() {
                continue;
            }
            node.set_mark(true);
            stack.extend(node.children().iter().copied().filter(|c| !c.as_ref().is_marked()));
        }
    }

    /// # Safety
    /// Caller is inside the exclusive section.
    unsafe fn for_each_node(&self, mut f: impl FnMut(&Node)) {
        for head in self.buckets().iter() {
            let mut cur = head.load(Relaxed);
            while !cur.is_null() {
                f(&*cur);
                cur = (*cur).next.load(Relaxed);
            }
        }
    }

    /// # Safety
    /// Caller is inside the exclusive section.
    unsafe fn collect_locked(&self) -> GcStats {
        match self.config.strategy {
            // Marked = live.
            Strategy::ProtectionSet => self.mark_from(self.roots()),
            // Marked = dead.
            Strategy::RefCount => {
                let mut dead = Vec::new();
                self.for_each_node(|n| {
                    if n.refs.get() == 0 {
                        dead.push(NonNull::from(n));
                    }
                });
                while let Some(n) = dead.pop() {
                    let node = n.as_ref();
                    node.set_mark(true);
                    for child in node.children() {
                        let left = child.as_ref().refs.decrement(child.as_ptr() as usize);
                        if left.expect("parent edge missing from a child count") == 0 {
                            dead.push(*child);
                        }
                    }
                }
            }
        }
        let keep_marked = self.config.strategy == Strategy::ProtectionSet;
        let mut reclaimed = 0;
        for head in self.buckets().iter() {
            let mut link: &AtomicPtr<Node> = head;
            let mut cur = link.load(Relaxed);
            while let Some(n) = NonNull::new(cur) {
                let node = n.as_ref();
                let next = node.next.load(Relaxed);
                if node.is_marked() == keep_marked {
                    node.set_mark(false);
                    link = &node.next;
                } else {
                    link.store(next, Relaxed);
                    Node::free(n);
                    reclaimed += 1;
                }
                cur = next;
            }
        }
        let live = self.live.fetch_sub(reclaimed, SeqCst) - reclaimed;
        self.destroyed.store(0, SeqCst);
        self.counters.collections.fetch_add(1, Relaxed);
        self.counters.reclaimed.fetch_add(reclaimed as u64, Relaxed);
        if self.config.audit {
            // Refcount releases do not enter a section, so a count may drop
            // to zero while we collect; completeness is only exact for sets.
            let v = self.audit_locked(self.config.strategy == Strategy::ProtectionSet);
            self.counters.audit_violations.fetch_add(v as u64, Relaxed);
        }
        GcStats { reclaimed, live }
    }

    /// Checks structural invariants of the table; with `complete` also that
    /// nothing collectable is left. Returns the number of violations.
    ///
    /// # Safety
    /// Caller is inside the exclusive section.
    unsafe fn audit_locked(&self, complete: bool) -> usize {
        let mut violations = 0;
        let mut live: FxHashSet<usize> = FxHashSet::default();
        let mut shapes: FxHashSet<(u32, Vec<usize>)> = FxHashSet::default();
        let mask = self.buckets().len() - 1;
        for (i, head) in self.buckets().iter().enumerate() {
            let mut cur = head.load(Relaxed);
            while !cur.is_null() {
                let node = &*cur;
                live.insert(cur as usize);
                if node.hash as usize & mask != i
                    || node.hash != hash_term(node.symbol, node.children())
                {
                    violations += 1;
                }
                let shape = (node.symbol, node.children().iter().map(|c| c.as_ptr() as usize).collect());
                if !shapes.insert(shape) {
                    violations += 1;
                }
                cur = node.next.load(Relaxed);
            }
        }
        if live.len() != self.live.load(SeqCst) {
            violations += 1;
        }
        let mut parents: FxHashMap<usize, u64> = FxHashMap::default();
        self.for_each_node(|n| {
            for c in n.children() {
                if !live.contains(&(c.as_ptr() as usize)) {
                    violations += 1;
                }
                *parents.entry(c.as_ptr() as usize).or_default() += 1;
            }
        });
        match self.config.strategy {
            Strategy::ProtectionSet => {
                let roots = self.roots();
                violations += roots.iter().filter(|r| !live.contains(&(r.as_ptr() as usize))).count();
                if complete && violations == 0 {
                    self.mark_from(roots);
                    self.for_each_node(|n| {
                        if !n.is_marked() {
                            violations += 1;
                        }
                        n.set_mark(false);
                    });
                }
            }
            Strategy::RefCount => self.for_each_node(|n| {
                let p = parents.get(&(n as *const Node as usize)).copied().unwrap_or(0);
                if n.refs.get() < p || (complete && n.refs.get() == 0) {
                    violations += 1;
                }
            }),
        }
        violations
    }

    /// # Safety
    /// Caller is inside the exclusive section.
    unsafe fn grow_locked(&self) {
        let old = &mut *self.table.get();
        let mut len = old.len();
        while self.live.load(SeqCst) as f64 > self.config.max_load * len as f64 {
            len *= 2;
        }
        if len == old.len() {
            return;
        }
        let fresh = new_buckets(len);
        for head in old.iter() {
            let mut cur = head.load(Relaxed);
            while let Some(n) = NonNull::new(cur) {
                let node = n.as_ref();
                let next = node.next.load(Relaxed);
                let slot = &fresh[node.hash as usize & (len - 1)];
                node.next.store(slot.load(Relaxed), Relaxed);
                slot.store(cur, Relaxed);
                cur = next;
            }
        }
        *old = fresh;
        self.bucket_count.store(len, SeqCst);
        self.counters.rehashes.fetch_add(1, Relaxed);
    }

    fn pin_node(&self, node: NonNull<Node>) {
        match self.config.strategy {
            // SAFETY: the node is protected by the caller's handle.
            Strategy::RefCount => unsafe { node.as_ref().refs.increment() },
            Strategy::ProtectionSet => {
                *self.pins.lock().unwrap().entry(node.as_ptr() as usize).or_default() += 1;
            }
        }
    }

    fn unpin_node(&self, node: NonNull<Node>) {
        let address = node.as_ptr() as usize;
        match self.config.strategy {
            // SAFETY: the pin keeps the node alive until this decrement.
            Strategy::RefCount => unsafe {
                node.as_ref().refs.decrement(address).expect("pin count underflow");
            },
            Strategy::ProtectionSet => {
                let mut pins = self.pins.lock().unwrap();
                let m = pins.get_mut(&address).expect("unpin of an unpinned term");
                *m -= 1;
                if *m == 0 {
                    pins.remove(&address);
                }
            }
        }
    }
}

impl Drop for TermLibrary {
    fn drop(&mut self) {
        for head in self.table.get_mut().iter() {
            let mut cur = head.load(Relaxed);
            while let Some(n) = NonNull::new(cur) {
                // SAFETY: we have exclusive ownership of every node now.
                unsafe {
                    cur = n.as_ref().next.load(Relaxed);
                    Node::free(n);
                }
            }
        }
    }
}

/// A registered thread. Every term operation goes through the session of
/// the calling thread.
pub struct Session<'lib> {
    lib: &'lib TermLibrary,
    ctx: SectionContext,
    slot: usize,
    pending_destroys: Cell<usize>,
    _not_send: PhantomData<*const ()>,
}

impl fmt::Debug for Session<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session").field("slot", &self.slot).finish()
    }
}

impl<'lib> Session<'lib> {
    pub fn library(&self) -> &'lib TermLibrary {
        self.lib
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    /// The session's own protection set.
    ///
    /// # Safety
    /// Caller is inside a shared section of this session, or in the exclusive
    /// section.
    #[allow(clippy::mut_from_ref)]
    unsafe fn own_set(&self) -> &mut ProtectionSet {
        &mut *self.lib.sets[self.slot].get()
    }

    /// # Safety
    /// Caller is inside a shared section and `node` is live.
    unsafe fn protect_locked(&self, node: NonNull<Node>) {
        match self.lib.config.strategy {
            Strategy::RefCount => node.as_ref().refs.increment(),
            Strategy::ProtectionSet => self.own_set().protect(self.slot, node.as_ptr() as usize),
        }
    }

    pub fn constant(&self, symbol: FunctionSymbol) -> Result<Term<'_>, TermError> {
        self.create(symbol, &[])
    }

    /// Returns a handle to the term `symbol(args)`.
    pub fn create(&self, symbol: FunctionSymbol, args: &[TermRef<'_>]) -> Result<Term<'_>, TermError> {
        if args.len() != symbol.arity() {
            return Err(TermError::ArityMismatch {
                symbol: self.lib.symbol_name(symbol).to_string(),
                expected: symbol.arity(),
                got: args.len(),
            });
        }
        let children = TermRef::as_nodes(args);
        let hash = hash_term(symbol.id, children);
        let lib = self.lib;
        lib.lock.enter_shared(&self.ctx);
        // SAFETY: inside the shared section; args are live views.
        let result = unsafe {
            lib.find_or_insert(symbol.id, children, hash, || {}).inspect(|&n| self.protect_locked(n))
        };
        lib.lock.leave_shared(&self.ctx);
        let node = result?;
        if lib.rehash_due() {
            self.with_exclusive(|_| ());
        }
        Ok(Term { node, session: self })
    }

    /// A new handle to the same term.
    pub fn copy(&self, term: TermRef<'_>) -> Term<'_> {
        self.lib.lock.enter_shared(&self.ctx);
        // SAFETY: inside the shared section; the view is live.
        unsafe { self.protect_locked(term.node) };
        self.lib.lock.leave_shared(&self.ctx);
        Term {
            node: term.node,
            session: self,
        }
    }

    fn release(&self, node: NonNull<Node>) {
        let address = node.as_ptr() as usize;
        match self.lib.config.strategy {
            // SAFETY: the handle being released keeps the node alive.
            Strategy::RefCount => unsafe {
                node.as_ref().refs.decrement(address).expect("handle without protection");
            },
            Strategy::ProtectionSet => {
                self.lib.lock.enter_shared(&self.ctx);
                // SAFETY: inside the shared section.
                let r = unsafe { self.own_set().unprotect(self.slot, address) };
                self.lib.lock.leave_shared(&self.ctx);
                r.expect("handle without protection");
            }
        }
        let pending = self.pending_destroys.get() + 1;
        // Destroys are counted locally and published in small batches so the
        // shared counter is not hit on every release.
        let batch = (self.lib.config.gc.threshold / 16).clamp(1, 64);
        if pending < batch {
            self.pending_destroys.set(pending);
            return;
        }
        self.pending_destroys.set(0);
        self.lib.destroyed.fetch_add(pending, Relaxed);
        if self.lib.config.gc.automatic && self.lib.gc_due() {
            self.collect_garbage();
        }
    }

    /// Drops the handle's protection. Equivalent to dropping the handle.
    pub fn destroy(&self, term: Term<'_>) {
        drop(term);
    }

    /// Stop-the-world collection of every unprotected node.
    pub fn collect_garbage(&self) -> GcStats {
        self.lib.lock.enter_exclusive(&self.ctx);
        // SAFETY: inside the exclusive section.
        let stats = unsafe {
            let stats = self.lib.collect_locked();
            if self.lib.rehash_due() {
                self.lib.grow_locked();
            }
            stats
        };
        self.lib.lock.leave_exclusive(&self.ctx);
        stats
    }

    /// Runs `f` inside an exclusive section. Pending table growth is done
    /// first.
    pub fn with_exclusive<R>(&self, f: impl FnOnce(&ExclusiveView<'_>) -> R) -> R {
        self.lib.lock.enter_exclusive(&self.ctx);
        // SAFETY: inside the exclusive section.
        unsafe {
            if self.lib.rehash_due() {
                self.lib.grow_locked();
            }
        }
        let r = f(&ExclusiveView {
            lib: self.lib,
            _section: PhantomData,
        });
        self.lib.lock.leave_exclusive(&self.ctx);
        r
    }

    /// A thread-independent root that can be sent to another thread and
    /// adopted there.
    pub fn pin(&self, term: TermRef<'_>) -> PinnedTerm<'lib> {
        self.lib.pin_node(term.node);
        PinnedTerm {
            lib: self.lib,
            node: term.node,
        }
    }

    /// Takes over a pinned term as a handle of this session.
    pub fn adopt(&self, pinned: PinnedTerm<'lib>) -> Term<'_> {
        assert!(ptr::eq(pinned.lib, self.lib), "pinned term from another library");
        let term = self.copy(pinned.as_ref());
        drop(pinned);
        term
    }
}

impl Drop for Session<'_> {
    fn drop(&mut self) {
        if self.lib.config.strategy == Strategy::ProtectionSet {
            self.lib.lock.enter_shared(&self.ctx);
            // SAFETY: inside the shared section.
            unsafe { self.own_set().clear() };
            self.lib.lock.leave_shared(&self.ctx);
        }
        self.lib.destroyed.fetch_add(self.pending_destroys.get(), Relaxed);
        let _ = self.lib.lock.deregister(&self.ctx);
        self.lib.slots.lock().unwrap()[self.slot] = false;
    }
}

/// An unprotected view of a live term, valid while whatever keeps it alive
/// (usually a [`Term`] handle) is borrowed.
#[repr(transparent)]
#[derive(Clone, Copy)]
pub struct TermRef<'a> {
    node: NonNull<Node>,
    _life: PhantomData<&'a Node>,
}

impl<'a> TermRef<'a> {
    fn new(node: NonNull<Node>) -> Self {
        TermRef {
            node,
            _life: PhantomData,
        }
    }

    fn as_nodes<'s>(refs: &'s [TermRef<'_>]) -> &'s [NonNull<Node>] {
        // SAFETY: TermRef is a transparent wrapper around NonNull<Node>.
        unsafe { std::slice::from_raw_parts(refs.as_ptr() as *const NonNull<Node>, refs.len()) }
    }

    fn node(&self) -> &'a Node {
        // SAFETY: the view's lifetime keeps the node alive.
        unsafe { &*self.node.as_ptr() }
    }

    pub fn address(self) -> usize {
        self.node.as_ptr() as usize
    }

    pub fn function(self) -> FunctionSymbol {
        let n = self.node();
        FunctionSymbol {
            id: n.symbol,
            arity: n.arity,
        }
    }

    pub fn arity(self) -> usize {
        self.node().arity as usize
    }

    pub fn argument(self, index: usize) -> Result<TermRef<'a>, TermError> {
        self.node()
            .children()
            .get(index)
            .map(|&c| TermRef::new(c))
            .ok_or(TermError::ArgumentOutOfRange {
                index,
                arity: self.arity(),
            })
    }

    pub fn arguments(self) -> impl ExactSizeIterator<Item = TermRef<'a>> {
        self.node().children().iter().map(|&c| TermRef::new(c))
    }
}

impl PartialEq for TermRef<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl Eq for TermRef<'_> {}

impl Hash for TermRef<'_> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.node.hash(state);
    }
}

impl fmt::Debug for TermRef<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TermRef({:#x}, {})", self.address(), self.function())
    }
}

/// A protected handle owned by one session. Dropping it releases the
/// protection; cloning it protects the term again.
pub struct Term<'s> {
    node: NonNull<Node>,
    session: &'s Session<'s>,
}

impl<'s> Term<'s> {
    pub fn as_ref(&self) -> TermRef<'_> {
        TermRef::new(self.node)
    }

    pub fn address(&self) -> usize {
        self.as_ref().address()
    }

    pub fn function(&self) -> FunctionSymbol {
        self.as_ref().function()
    }

    pub fn arity(&self) -> usize {
        self.as_ref().arity()
    }

    pub fn argument(&self, index: usize) -> Result<TermRef<'_>, TermError> {
        self.as_ref().argument(index)
    }
}

impl Clone for Term<'_> {
    fn clone(&self) -> Self {
        self.session.copy(self.as_ref())
    }
}

impl Drop for Term<'_> {
    fn drop(&mut self) {
        self.session.release(self.node);
    }
}

impl PartialEq for Term<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl Eq for Term<'_> {}

impl Hash for Term<'_> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.node.hash(state);
    }
}

impl fmt::Debug for Term<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Term({:#x}, {})", self.address(), self.function())
    }
}

/// A root that belongs to no thread. Send it to another thread and
/// [`Session::adopt`] it there.
pub struct PinnedTerm<'lib> {
    lib: &'lib TermLibrary,
    node: NonNull<Node>,
}

// SAFETY: the pin keeps an immutable node alive; unpinning is synchronised.
unsafe impl Send for PinnedTerm<'_> {}
unsafe impl Sync for PinnedTerm<'_> {}

impl PinnedTerm<'_> {
    pub fn as_ref(&self) -> TermRef<'_> {
        TermRef::new(self.node)
    }
}

impl Drop for PinnedTerm<'_> {
    fn drop(&mut self) {
        self.lib.unpin_node(self.node);
    }
}

/// Read access to the whole table while every other thread is fenced out.
pub struct ExclusiveView<'a> {
    lib: &'a TermLibrary,
    _section: PhantomData<*const ()>,
}

impl ExclusiveView<'_> {
    pub fn live_nodes(&self) -> usize {
        let mut n = 0;
        // SAFETY: views exist only inside the exclusive section.
        unsafe { self.lib.for_each_node(|_| n += 1) };
        n
    }

    pub fn contains(&self, address: usize) -> bool {
        let mut found = false;
        // SAFETY: as above.
        unsafe { self.lib.for_each_node(|n| found |= n as *const Node as usize == address) };
        found
    }

    /// Whether the collector would keep the node at `address`.
    pub fn is_protected(&self, address: usize) -> bool {
        let lib = self.lib;
        match lib.config.strategy {
            Strategy::RefCount => {
                // SAFETY: as above; only addresses of live nodes are read.
                let mut count = None;
                unsafe {
                    lib.for_each_node(|n| {
                        if n as *const Node as usize == address {
                            count = Some(n.refs.get());
                        }
                    })
                };
                count.is_some_and(|c| c != 0)
            }
            Strategy::ProtectionSet => {
                let mut hit = false;
                // SAFETY: as above; marks are cleared again before returning.
                unsafe {
                    lib.mark_from(lib.roots());
                    lib.for_each_node(|n| {
                        if n as *const Node as usize == address {
                            hit = n.is_marked();
                        }
                        n.set_mark(false);
                    });
                }
                hit
            }
        }
    }

    /// Number of nodes in each bucket.
    pub fn bucket_lengths(&self) -> Vec<usize> {
        // SAFETY: as above.
        unsafe {
            self.lib
                .buckets()
                .iter()
                .map(|head| {
                    let mut len = 0;
                    let mut cur = head.load(Relaxed);
                    while !cur.is_null() {
                        len += 1;
                        cur = (*cur).next.load(Relaxed);
                    }
                    len
                })
                .collect()
        }
    }

    /// Table and protection invariants; returns the number of violations.
    pub fn audit(&self) -> usize {
        // SAFETY: as above.
        unsafe { self.lib.audit_locked(false) }
    }

    /// Like [`audit`](Self::audit), and additionally counts every live node
    /// the collector could reclaim. Only meaningful right after a
    /// collection with no concurrent releases.
    pub fn audit_complete(&self) -> usize {
        // SAFETY: as above.
        unsafe { self.lib.audit_locked(true) }
    }

    /// Structural fingerprints of all live nodes, sorted. Independent of
    /// addresses, so two libraries can be compared.
    pub fn fingerprints(&self) -> Vec<u128> {
        let lib = self.lib;
        let mut memo: FxHashMap<usize, u128> = FxHashMap::default();
        let mut nodes: Vec<NonNull<Node>> = Vec::new();
        // SAFETY: as above.
        unsafe { lib.for_each_node(|n| nodes.push(NonNull::from(n))) };
        for &root in &nodes {
            let mut stack = vec![(root, false)];
            while let Some((n, expanded)) = stack.pop() {
                let a = n.as_ptr() as usize;
                if memo.contains_key(&a) {
                    continue;
                }
                // SAFETY: live node.
                let node = unsafe { n.as_ref() };
                if expanded {
                    let name = lib.symbols.name(FunctionSymbol {
                        id: node.symbol,
                        arity: node.arity,
                    });
                    let kids: Vec<u128> = node.children().iter().map(|c| memo[&(c.as_ptr() as usize)]).collect();
                    memo.insert(a, fingerprint(&name, &kids));
                } else {
                    stack.push((n, true));
                    stack.extend(node.children().iter().map(|&c| (c, false)));
                }
            }
        }
        let mut out: Vec<u128> = nodes.iter().map(|n| memo[&(n.as_ptr() as usize)]).collect();
        out.sort_unstable();
        out
    }
}

fn fingerprint(name: &str, children: &[u128]) -> u128 {
    fn mix(mut h: u64) -> u64 {
        h ^= h >> 33;
        h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
        h ^= h >> 33;
        h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
        h ^ (h >> 33)
    }
    let (mut lo, mut hi) = (0x243f_6a88_85a3_08d3u64, 0x1319_8a2e_0370_7344u64);
    let mut feed = |w: u64| {
        lo = mix(lo ^ w).wrapping_add(hi.rotate_left(17));
        hi = mix(hi ^ w.rotate_left(29)).wrapping_add(lo);
    };
    for b in name.bytes() {
        feed(u64::from(b));
    }
    feed(0xff00 | children.len() as u64);
    for &c in children {
        feed(c as u64);
        feed((c >> 64) as u64);
    }
    (u128::from(hi) << 64) | u128::from(lo)
}
