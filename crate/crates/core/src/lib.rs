//! A thread-safe library of maximally shared terms.
//!
//! Terms are hash-consed into a concurrent table: structurally equal terms
//! share one node, so equality is pointer comparison. Threads create and
//! copy terms in the shared sections of a [`BfLock`]; garbage collection and
//! table growth run in its exclusive sections.

pub mod busy_forbidden;
pub mod protection;
pub mod sections;
pub mod term;

pub use busy_forbidden::{Backoff, BfConfig, BfLock, LockError, LockStats, Rate, Section, ThreadContext};
pub use protection::{ProtectionError, ProtectionSet, RefCount, Strategy};
pub use sections::{Backend, PlatformRwLock};
pub use term::{
    ExclusiveView, FunctionSymbol, GcPolicy, GcStats, LibraryConfig, LibraryStats, PinnedTerm, Session,
    Term, TermError, TermLibrary, TermRef,
};
