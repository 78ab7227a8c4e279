//! Safety properties as monitor automata run in lockstep with the LTS.
//! Breadth-first search makes every counterexample a shortest one.

use std::hash::Hash;

use indexmap::IndexSet;
use rustc_hash::FxBuildHasher;

use crate::action::{Action, Addr, Op, TermId, Thread};
use crate::lts::Lts;

pub trait Monitor {
    type State: Clone + Eq + Hash;

    fn initial(&self) -> Self::State;

    /// `None` when taking `a` violates the property.
    fn step(&self, m: &Self::State, a: &Action) -> Option<Self::State>;

    /// Checked in every reachable product state.
    fn state_ok(&self, _m: &Self::State, _lts: &Lts, _s: u32) -> bool {
        true
    }
}

/// Shortest trace to a violation, if any.
pub fn find_violation<M: Monitor>(lts: &Lts, monitor: &M) -> Option<Vec<Action>> {
    let mut seen: IndexSet<(u32, M::State), FxBuildHasher> = IndexSet::default();
    let mut parent: Vec<(u32, u32)> = Vec::new();
    let trace = |parent: &[(u32, u32)], mut i: usize, last: Option<u32>| {
        let mut labels: Vec<u32> = last.into_iter().collect();
        while i != 0 {
            let (p, l) = parent[i];
            labels.push(l);
            i = p as usize;
        }
        labels.reverse();
        labels.into_iter().map(|l| lts.action(l).clone()).collect::<Vec<_>>()
    };
    let init = monitor.initial();
    if !monitor.state_ok(&init, lts, lts.initial()) {
        return Some(Vec::new());
    }
    seen.insert((lts.initial(), init));
    parent.push((0, 0));
    let mut next = 0;
    while next < seen.len() {
        let (s, m) = seen[next].clone();
        for e in lts.successors(s) {
            let Some(m2) = monitor.step(&m, lts.action(e.label)) else {
                return Some(trace(&parent, next, Some(e.label)));
            };
            let (i, fresh) = seen.insert_full((e.target, m2));
            if fresh {
                parent.push((next as u32, e.label));
                let (t, m2) = &seen[i];
                if !monitor.state_ok(m2, lts, *t) {
                    return Some(trace(&parent, i, None));
                }
            }
        }
        next += 1;
    }
    None
}

/// No second `enter_exclusive_return` before a `leave_exclusive_call`.
pub struct MutualExclusion;

impl Monitor for MutualExclusion {
    type State = bool;

    fn initial(&self) -> bool {
        false
    }

    fn step(&self, inside: &bool, a: &Action) -> Option<bool> {
        match a {
            Action::Return(Op::EnterExclusive, _) if *inside => None,
            Action::Return(Op::EnterExclusive, _) => Some(true),
            Action::Call(Op::LeaveExclusive, _) => Some(false),
            _ => Some(*inside),
        }
    }
}

/// Counts threads in the shared and the exclusive section; both positive is
/// a violation.
pub struct SectionExclusion;

impl Monitor for SectionExclusion {
    type State = (i32, i32);

    fn initial(&self) -> (i32, i32) {
        (0, 0)
    }

    fn step(&self, &(shared, exclusive): &(i32, i32), a: &Action) -> Option<(i32, i32)> {
        let next = match a {
            Action::Return(Op::EnterShared, _) => (shared + 1, exclusive),
            Action::Return(Op::EnterExclusive, _) => (shared, exclusive + 1),
            Action::Call(Op::LeaveShared, _) => (shared - 1, exclusive),
            Action::Call(Op::LeaveExclusive, _) => (shared, exclusive - 1),
            _ => (shared, exclusive),
        };
        (!(next.0 > 0 && next.1 > 0)).then_some(next)
    }
}

/// While some thread holds term `t`, every create of `t` returns the same
/// address.
pub struct StableAddress {
    pub term: TermId,
}

impl Monitor for StableAddress {
    type State = (Option<Addr>, u8);

    fn initial(&self) -> Self::State {
        (None, 0)
    }

    fn step(&self, &(addr, owners): &Self::State, a: &Action) -> Option<Self::State> {
        match *a {
            Action::CreateReturn(p, t, a2) if t == self.term => {
                if addr != Some(a2) && owners != 0 {
                    return None;
                }
                Some((Some(a2), owners | 1 << p))
            }
            Action::DestroyCall(p, t) if t == self.term => Some((addr, owners & !(1 << p))),
            _ => Some((addr, owners)),
        }
    }
}

/// While some thread holds the term at address `addr`, no create of another
/// term returns that address.
pub struct InjectiveAddress {
    pub addr: Addr,
}

impl Monitor for InjectiveAddress {
    type State = (Option<TermId>, u8);

    fn initial(&self) -> Self::State {
        (None, 0)
    }

    fn step(&self, &(term, owners): &Self::State, a: &Action) -> Option<Self::State> {
        match *a {
            Action::CreateReturn(p, t2, a2) if a2 == self.addr => {
                if term.is_some_and(|t| t != t2) && owners != 0 {
                    return None;
                }
                Some((Some(t2), owners | 1 << p))
            }
            Action::DestroyCall(p, t) if Some(t) == term => Some((term, owners & !(1 << p))),
            _ => Some((term, owners)),
        }
    }
}

/// A thread outside both sections has both entry calls enabled.
pub struct InstantEntry {
    pub thread: Thread,
}

impl Monitor for InstantEntry {
    /// (entering or in shared, entering or in exclusive)
    type State = (bool, bool);

    fn initial(&self) -> (bool, bool) {
        (false, false)
    }

    fn step(&self, &(sh, ex): &(bool, bool), a: &Action) -> Option<(bool, bool)> {
        let p = self.thread;
        Some(match *a {
            Action::Call(Op::EnterShared, q) if q == p => (true, ex),
            Action::Return(Op::LeaveShared, q) if q == p => (false, ex),
            Action::Call(Op::EnterExclusive, q) if q == p => (sh, true),
            Action::Return(Op::LeaveExclusive, q) if q == p => (sh, false),
            _ => (sh, ex),
        })
    }

    fn state_ok(&self, &(sh, ex): &(bool, bool), lts: &Lts, s: u32) -> bool {
        if sh || ex {
            return true;
        }
        let enabled = |op| lts.successors(s).iter().any(|e| lts.action(e.label) == &Action::Call(op, self.thread));
        enabled(Op::EnterShared) && enabled(Op::EnterExclusive)
    }
}

/// States from which every τ-path stays able to reach, by τ-steps only, a
/// state where `target` is enabled.
pub fn always_reachable_by_tau(lts: &Lts, is_tau: &[bool], target: &Action) -> Vec<bool> {
    let n = lts.num_states();
    let (offsets, preds) = lts.reverse();
    let backward = |seed: Vec<bool>| {
        let mut mark = seed;
        let mut stack: Vec<u32> = (0..n as u32).filter(|&s| mark[s as usize]).collect();
        while let Some(s) = stack.pop() {
            let range = offsets[s as usize] as usize..offsets[s as usize + 1] as usize;
            for &(p, l) in &preds[range] {
                if is_tau[l as usize] && !mark[p as usize] {
                    mark[p as usize] = true;
                    stack.push(p);
                }
            }
        }
        mark
    };
    let enabled = (0..n as u32)
        .map(|s| lts.successors(s).iter().any(|e| lts.action(e.label) == target))
        .collect();
    let reach = backward(enabled);
    let lost = backward(reach.iter().map(|r| !r).collect());
    lost.into_iter().map(|l| !l).collect()
}

/// A thread that is not creating or destroying can start creating any term
/// it does not hold and destroying any term it holds.
pub struct CanStart {
    pub thread: Thread,
    pub terms: usize,
    /// `[t][0]`: create of `t` stays possible; `[t][1]`: destroy of `t`.
    pub good: Vec<[Vec<bool>; 2]>,
}

impl CanStart {
    pub fn new(lts: &Lts, thread: Thread, terms: usize, is_tau: &[bool]) -> Self {
        let good = (0..terms as TermId)
            .map(|t| {
                [
                    always_reachable_by_tau(lts, is_tau, &Action::CreateCall(thread, t)),
                    always_reachable_by_tau(lts, is_tau, &Action::DestroyCall(thread, t)),
                ]
            })
            .collect();
        CanStart {
            thread,
            terms,
            good,
        }
    }
}

impl Monitor for CanStart {
    /// (busy, held terms)
    type State = (bool, u8);

    fn initial(&self) -> (bool, u8) {
        (false, 0)
    }

    fn step(&self, &(busy, known): &(bool, u8), a: &Action) -> Option<(bool, u8)> {
        let p = self.thread;
        Some(match *a {
            Action::CreateCall(q, _) | Action::DestroyCall(q, _) if q == p => (true, known),
            Action::CreateReturn(q, t, _) if q == p => (false, known | 1 << t),
            Action::DestroyReturn(q, t) if q == p => (false, known & !(1 << t)),
            _ => (busy, known),
        })
    }

    fn state_ok(&self, &(busy, known): &(bool, u8), _lts: &Lts, s: u32) -> bool {
        busy || (0..self.terms).all(|t| self.good[t][(known >> t & 1) as usize][s as usize])
    }
}
