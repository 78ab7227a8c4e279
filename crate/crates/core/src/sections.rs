//! Lock backends that can guard the term table: the busy-forbidden protocol
//! or a conventional readers-writer lock.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use lock_api::RawRwLock as _;
use thiserror::Error;

use crate::busy_forbidden::{BfConfig, BfLock, LockError, LockStats, Section, ThreadContext};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown lock backend `{0}` (expected bf or platform-rw)")]
pub struct UnknownBackend(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    BusyForbidden,
    PlatformRw,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::BusyForbidden => "bf",
            Backend::PlatformRw => "platform-rw",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = UnknownBackend;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bf" => Ok(Backend::BusyForbidden),
            "platform-rw" => Ok(Backend::PlatformRw),
            other => Err(UnknownBackend(other.to_string())),
        }
    }
}

/// A readers-writer lock with a single shared counter word, used as the
/// baseline the busy-forbidden protocol is compared against.
pub struct PlatformRwLock {
    raw: parking_lot::RawRwLock,
}

impl Default for PlatformRwLock {
    fn default() -> Self {
        PlatformRwLock {
            raw: parking_lot::RawRwLock::INIT,
        }
    }
}

impl PlatformRwLock {
    pub fn enter_shared(&self) {
        self.raw.lock_shared();
    }

    /// # Safety
    /// The caller must hold a shared lock taken with `enter_shared`.
    pub unsafe fn leave_shared(&self) {
        self.raw.unlock_shared();
    }

    pub fn enter_exclusive(&self) {
        self.raw.lock_exclusive();
    }

    /// # Safety
    /// The caller must hold the exclusive lock taken with `enter_exclusive`.
    pub unsafe fn leave_exclusive(&self) {
        self.raw.unlock_exclusive();
    }
}

pub(crate) enum SectionLock {
    Bf(BfLock),
    Rw(PlatformRwLock),
}

pub(crate) enum SectionContext {
    Bf(ThreadContext),
    Rw(Cell<Section>),
}

impl SectionLock {
    pub(crate) fn new(backend: Backend, config: BfConfig) -> Self {
        match backend {
            Backend::BusyForbidden => SectionLock::Bf(BfLock::new(config)),
            Backend::PlatformRw => SectionLock::Rw(PlatformRwLock::default()),
        }
    }

    pub(crate) fn register(&self) -> Result<SectionContext, LockError> {
        match self {
            SectionLock::Bf(l) => l.register().map(SectionContext::Bf),
            SectionLock::Rw(_) => Ok(SectionContext::Rw(Cell::new(Section::Free))),
        }
    }

    pub(crate) fn deregister(&self, ctx: &SectionContext) -> Result<(), LockError> {
        match (self, ctx) {
            (SectionLock::Bf(l), SectionContext::Bf(c)) => l.deregister(c),
            (SectionLock::Rw(_), SectionContext::Rw(s)) if s.get() != Section::Free => {
                Err(LockError::InSection(s.get()))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub(crate) fn enter_shared(&self, ctx: &SectionContext) {
        match (self, ctx) {
            (SectionLock::Bf(l), SectionContext::Bf(c)) => l.enter_shared(c),
            (SectionLock::Rw(l), SectionContext::Rw(s)) => {
                l.enter_shared();
                s.set(Section::Shared);
            }
            _ => unreachable!("context from another backend"),
        }
    }

    #[inline]
    pub(crate) fn leave_shared(&self, ctx: &SectionContext) {
        match (self, ctx) {
            (SectionLock::Bf(l), SectionContext::Bf(c)) => l.leave_shared(c),
            (SectionLock::Rw(l), SectionContext::Rw(s)) => {
                assert_eq!(s.replace(Section::Free), Section::Shared);
                // SAFETY: the section state says we hold a shared lock.
                unsafe { l.leave_shared() }
            }
            _ => unreachable!("context from another backend"),
        }
    }

    pub(crate) fn enter_exclusive(&self, ctx: &SectionContext) {
        match (self, ctx) {
            (SectionLock::Bf(l), SectionContext::Bf(c)) => l.enter_exclusive(c),
            (SectionLock::Rw(l), SectionContext::Rw(s)) => {
                l.enter_exclusive();
                s.set(Section::Exclusive);
            }
            _ => unreachable!("context from another backend"),
        }
    }

    pub(crate) fn leave_exclusive(&self, ctx: &SectionContext) {
        match (self, ctx) {
            (SectionLock::Bf(l), SectionContext::Bf(c)) => l.leave_exclusive(c),
            (SectionLock::Rw(l), SectionContext::Rw(s)) => {
                assert_eq!(s.replace(Section::Free), Section::Exclusive);
                // SAFETY: the section state says we hold the exclusive lock.
                unsafe { l.leave_exclusive() }
            }
            _ => unreachable!("context from another backend"),
        }
    }

    pub(crate) fn stats(&self) -> LockStats {
        match self {
            SectionLock::Bf(l) => l.stats(),
            SectionLock::Rw(_) => LockStats::default(),
        }
    }
}
