//! The property catalogue: six for the lock, four for the term library.

use serde::Serialize;

use crate::action::{Action, Addr, Op, TermId, Thread};
use crate::liveness::{check_progress, Obligation, Plain, Progress, Witness, WitnessEnd};
use crate::lts::Lts;
use crate::models::termlib::is_library_visible;
use crate::safety::{self, find_violation, Monitor};
use crate::CheckError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Property {
    MutualExclusion,
    SectionExclusion,
    SharedEntry,
    ExclusiveEntry,
    Leave,
    InstantEntry,
    StableAddress,
    InjectiveAddress,
    CanStart,
    Finish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Safety,
    Liveness,
    Entry,
}

impl Property {
    pub const LOCK: [Property; 6] = [
        Property::MutualExclusion,
        Property::SectionExclusion,
        Property::SharedEntry,
        Property::ExclusiveEntry,
        Property::Leave,
        Property::InstantEntry,
    ];

    pub const LIBRARY: [Property; 4] = [
        Property::StableAddress,
        Property::InjectiveAddress,
        Property::CanStart,
        Property::Finish,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Property::MutualExclusion => "bf1",
            Property::SectionExclusion => "bf2",
            Property::SharedEntry => "bf3",
            Property::ExclusiveEntry => "bf4",
            Property::Leave => "bf5",
            Property::InstantEntry => "bf6",
            Property::StableAddress => "lib1",
            Property::InjectiveAddress => "lib2",
            Property::CanStart => "lib3",
            Property::Finish => "lib4",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Property::MutualExclusion => "at most one thread in the exclusive section",
            Property::SectionExclusion => "exclusive and shared sections never overlap",
            Property::SharedEntry => "shared entry is granted unless a thread is exclusive",
            Property::ExclusiveEntry => "exclusive entry is granted unless another thread is in a section",
            Property::Leave => "leaving a section completes",
            Property::InstantEntry => "a free thread can always call enter",
            Property::StableAddress => "a held term keeps its address",
            Property::InjectiveAddress => "distinct held terms have distinct addresses",
            Property::CanStart => "an idle thread can always start create or destroy",
            Property::Finish => "started creates and destroys finish",
        }
    }

    pub fn kind(self) -> Kind {
        match self {
            Property::MutualExclusion
            | Property::SectionExclusion
            | Property::StableAddress
            | Property::InjectiveAddress => Kind::Safety,
            Property::SharedEntry | Property::ExclusiveEntry | Property::Leave | Property::Finish => {
                Kind::Liveness
            }
            Property::InstantEntry | Property::CanStart => Kind::Entry,
        }
    }
}

/// Sizes of the parameter domains the quantifiers range over.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Dims {
    pub threads: usize,
    pub terms: usize,
    pub addresses: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub property: &'static str,
    pub title: &'static str,
    pub holds: bool,
    /// Counterexample as a label sequence; empty when the property holds.
    pub trace: Vec<String>,
    pub note: Option<String>,
}

impl Verdict {
    fn pass(p: Property) -> Self {
        Verdict {
            property: p.id(),
            title: p.title(),
            holds: true,
            trace: Vec::new(),
            note: None,
        }
    }

    fn fail(p: Property, trace: &[Action], note: Option<String>) -> Self {
        Verdict {
            property: p.id(),
            title: p.title(),
            holds: false,
            trace: trace.iter().map(|a| a.to_string()).collect(),
            note,
        }
    }
}

fn from_witness(p: Property, w: Witness) -> Verdict {
    let mut trace = w.prefix.clone();
    let split = trace.len();
    trace.extend(w.walk);
    let end = match w.end {
        WitnessEnd::SuccessUnreachable => "success is unreachable at the end",
        WitnessEnd::Cycle => "the last step closes a cycle without progress",
    };
    Verdict::fail(p, &trace, Some(format!("obligation starts after step {split}; {end}")))
}

fn safety<M: Monitor>(p: Property, lts: &Lts, monitors: impl IntoIterator<Item = M>) -> Verdict {
    for m in monitors {
        if let Some(trace) = find_violation(lts, &m) {
            return Verdict::fail(p, &trace, None);
        }
    }
    Verdict::pass(p)
}

fn liveness<P: Progress>(
    p: Property,
    lts: &Lts,
    specs: impl IntoIterator<Item = P>,
    cap: usize,
) -> Result<Verdict, CheckError> {
    for spec in specs {
        if let Some(w) = check_progress(lts, &spec, cap)? {
            return Ok(from_witness(p, w));
        }
    }
    Ok(Verdict::pass(p))
}

fn call(a: &Action, op: Op) -> bool {
    matches!(a, Action::Call(o, _) if *o == op)
}

fn ret(a: &Action, op: Op) -> bool {
    matches!(a, Action::Return(o, _) if *o == op)
}

/// Shared entry by `thread`. The outer counter tracks threads between
/// `enter_exclusive_call` and `leave_exclusive_return`; while it is
/// positive, no progress is demanded.
struct SharedEntry {
    thread: Thread,
}

impl Progress for SharedEntry {
    type Outer = i32;

    fn outer_initial(&self) -> i32 {
        0
    }

    fn outer_step(&self, &n: &i32, a: &Action) -> i32 {
        if call(a, Op::EnterExclusive) {
            n + 1
        } else if ret(a, Op::LeaveExclusive) {
            n - 1
        } else {
            n
        }
    }

    fn trigger(&self, &n: &i32, a: &Action) -> Option<i32> {
        (a == &Action::Call(Op::EnterShared, self.thread)).then_some(n)
    }

    fn is_success(&self, a: &Action) -> bool {
        a == &Action::Return(Op::EnterShared, self.thread)
    }

    fn obligations(&self, n: i32, a: &Action, out: &mut Vec<Obligation>) {
        if call(a, Op::EnterShared) || a == &Action::Improbable {
            out.push(Obligation::Nu(n));
        } else if call(a, Op::EnterExclusive) {
            out.push(Obligation::Nu(n + 1));
        } else if ret(a, Op::LeaveExclusive) {
            out.push(Obligation::Nu(n - 1));
        } else {
            progress_unless_blocked(n, out);
        }
    }
}

fn progress_unless_blocked(n: i32, out: &mut Vec<Obligation>) {
    match n {
        0 => out.push(Obligation::Mu(n)),
        n if n > 0 => out.push(Obligation::Nu(n)),
        _ => {}
    }
}

/// Exclusive entry by `thread`. The counter tracks other threads that are
/// in, or on their way into or out of, a section.
struct ExclusiveEntry {
    thread: Thread,
}

impl Progress for ExclusiveEntry {
    type Outer = i32;

    fn outer_initial(&self) -> i32 {
        0
    }

    fn outer_step(&self, &n: &i32, a: &Action) -> i32 {
        if call(a, Op::EnterExclusive) || call(a, Op::EnterShared) {
            n + 1
        } else if ret(a, Op::LeaveShared) || ret(a, Op::LeaveExclusive) {
            n - 1
        } else {
            n
        }
    }

    fn trigger(&self, &n: &i32, a: &Action) -> Option<i32> {
        (a == &Action::Call(Op::EnterExclusive, self.thread)).then_some(n)
    }

    fn is_success(&self, a: &Action) -> bool {
        a == &Action::Return(Op::EnterExclusive, self.thread)
    }

    fn obligations(&self, n: i32, a: &Action, out: &mut Vec<Obligation>) {
        if call(a, Op::EnterShared) || call(a, Op::EnterExclusive) {
            out.push(Obligation::Nu(n + 1));
        } else if ret(a, Op::LeaveShared) {
            out.push(Obligation::Nu(n - 1));
        } else if a == &Action::Improbable {
            out.push(Obligation::Nu(n));
        } else if ret(a, Op::LeaveExclusive) {
            // Not constrained any further.
        } else {
            progress_unless_blocked(n, out);
            // Another thread got in: it no longer counts as blocking.
            if ret(a, Op::EnterExclusive) {
                out.push(Obligation::Nu(n - 1));
            }
        }
    }
}

type Pred = Box<dyn Fn(&Action) -> bool>;

fn leave_specs(p: Thread) -> Vec<Plain<Pred, Pred, Pred>> {
    let interrupt = |a: &Action| call(a, Op::EnterExclusive) || call(a, Op::EnterShared) || a == &Action::Improbable;
    [Op::LeaveShared, Op::LeaveExclusive]
        .into_iter()
        .map(|op| Plain {
            trigger: Box::new(move |a: &Action| a == &Action::Call(op, p)) as Pred,
            success: Box::new(move |a: &Action| a == &Action::Return(op, p)) as Pred,
            interrupt: Box::new(interrupt) as Pred,
        })
        .collect()
}

fn finish_specs(dims: Dims) -> Vec<Plain<Pred, Pred, Pred>> {
    let mut specs: Vec<Plain<Pred, Pred, Pred>> = Vec::new();
    for p in 0..dims.threads as Thread {
        let interrupt = move |a: &Action| match *a {
            Action::CreateCall(q, _) | Action::DestroyCall(q, _) => q != p,
            Action::Improbable => true,
            _ => false,
        };
        for t in 0..dims.terms as TermId {
            specs.push(Plain {
                trigger: Box::new(move |a: &Action| a == &Action::CreateCall(p, t)) as Pred,
                success: Box::new(move |a: &Action| matches!(*a, Action::CreateReturn(q, u, _) if q == p && u == t)),
                interrupt: Box::new(interrupt),
            });
            specs.push(Plain {
                trigger: Box::new(move |a: &Action| a == &Action::DestroyCall(p, t)),
                success: Box::new(move |a: &Action| a == &Action::DestroyReturn(p, t)),
                interrupt: Box::new(interrupt),
            });
        }
    }
    specs
}

pub fn check(lts: &Lts, property: Property, dims: Dims, cap: usize) -> Result<Verdict, CheckError> {
    let threads = 0..dims.threads as Thread;
    Ok(match property {
        Property::MutualExclusion => safety(property, lts, [safety::MutualExclusion]),
        Property::SectionExclusion => safety(property, lts, [safety::SectionExclusion]),
        Property::InstantEntry => safety(property, lts, threads.map(|thread| safety::InstantEntry { thread })),
        Property::StableAddress => safety(
            property,
            lts,
            (0..dims.terms as TermId).map(|term| safety::StableAddress { term }),
        ),
        Property::InjectiveAddress => safety(
            property,
            lts,
            (0..dims.addresses as Addr).map(|addr| safety::InjectiveAddress { addr }),
        ),
        Property::CanStart => {
            let is_tau: Vec<bool> = lts.labels().iter().map(|a| !is_library_visible(a)).collect();
            safety(
                property,
                lts,
                threads.map(|p| safety::CanStart::new(lts, p, dims.terms, &is_tau)),
            )
        }
        Property::SharedEntry => liveness(property, lts, threads.map(|thread| SharedEntry { thread }), cap)?,
        Property::ExclusiveEntry => liveness(property, lts, threads.map(|thread| ExclusiveEntry { thread }), cap)?,
        Property::Leave => liveness(property, lts, threads.flat_map(leave_specs), cap)?,
        Property::Finish => liveness(property, lts, finish_specs(dims), cap)?,
    })
}
