//! Root protection: atomic reference counts or per-thread protection sets.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering::SeqCst};

use rustc_hash::FxHashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtectionError {
    #[error("unprotect of {address:#x} without a matching protect")]
    Unmatched { address: usize },
    #[error("unknown protection strategy `{0}` (expected refcount or protection-set)")]
    UnknownStrategy(String),
}

/// How the garbage collector decides which nodes are live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Count = external protections + parent occurrences.
    RefCount,
    /// Each thread keeps the addresses it protects; live = reachable from
    /// the union of all sets.
    ProtectionSet,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::RefCount, Strategy::ProtectionSet];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::RefCount => "refcount",
            Strategy::ProtectionSet => "protection-set",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = ProtectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "refcount" => Ok(Strategy::RefCount),
            "protection-set" => Ok(Strategy::ProtectionSet),
            other => Err(ProtectionError::UnknownStrategy(other.to_string())),
        }
    }
}

/// Atomic 64-bit reference count. All updates are sequentially consistent.
#[derive(Debug, Default)]
pub struct RefCount(AtomicU64);

impl RefCount {
    pub fn new(count: u64) -> Self {
        RefCount(AtomicU64::new(count))
    }

    pub fn get(&self) -> u64 {
        self.0.load(SeqCst)
    }

    pub fn increment(&self) {
        let before = self.0.fetch_add(1, SeqCst);
        assert!(before != u64::MAX, "reference count overflow");
    }

    /// Decrements and returns the new count; refuses to go below zero.
    pub fn decrement(&self, address: usize) -> Result<u64, ProtectionError> {
        self.0
            .fetch_update(SeqCst, SeqCst, |c| c.checked_sub(1))
            .map(|before| before - 1)
            .map_err(|_| ProtectionError::Unmatched { address })
    }
}

/// Addresses protected by one thread, with multiplicities, since a thread
/// may hold several handles to the same term.
#[derive(Debug, Clone)]
pub struct ProtectionSet {
    owner: usize,
    entries: FxHashMap<usize, u32>,
}

impl ProtectionSet {
    pub fn new(owner: usize) -> Self {
        ProtectionSet {
            owner,
            entries: FxHashMap::default(),
        }
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn protect(&mut self, by: usize, address: usize) {
        debug_assert_eq!(by, self.owner, "protection set mutated by a non-owner");
        *self.entries.entry(address).or_insert(0) += 1;
    }

    pub fn unprotect(&mut self, by: usize, address: usize) -> Result<(), ProtectionError> {
        debug_assert_eq!(by, self.owner, "protection set mutated by a non-owner");
        match self.entries.get_mut(&address) {
            Some(m) if *m > 1 => {
                *m -= 1;
                Ok(())
            }
            Some(_) => {
                self.entries.remove(&address);
                Ok(())
            }
            None => Err(ProtectionError::Unmatched { address }),
        }
    }

    pub fn contains(&self, address: usize) -> bool {
        self.entries.contains_key(&address)
    }

    pub fn multiplicity(&self, address: usize) -> u32 {
        self.entries.get(&address).copied().unwrap_or(0)
    }

    /// Number of distinct addresses.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of all multiplicities.
    pub fn total(&self) -> u64 {
        self.entries.values().map(|&m| u64::from(m)).sum()
    }

    pub fn addresses(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
