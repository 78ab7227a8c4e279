//! External behaviour of the busy-forbidden lock: eleven states per thread,
//! with guards over the other threads' states.

use crate::action::{Action, Op, Thread};
use crate::explore::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecState {
    Free,
    EnterS,
    Loe1,
    Shared,
    LeaveS,
    EnterE,
    Loe2,
    Los,
    Exclusive,
    LeaveE1,
    LeaveE2,
}

impl SpecState {
    pub const ALL: [SpecState; 11] = [
        SpecState::Free,
        SpecState::EnterS,
        SpecState::Loe1,
        SpecState::Shared,
        SpecState::LeaveS,
        SpecState::EnterE,
        SpecState::Loe2,
        SpecState::Los,
        SpecState::Exclusive,
        SpecState::LeaveE1,
        SpecState::LeaveE2,
    ];
}

/// The two published guards for `EnterE -> LOE2` differ in whether a thread
/// in `LeaveE1` blocks the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnterGuard {
    /// Blocked by LOE2, LOS, LeaveE1 or Exclusive (the state diagram).
    #[default]
    WithLeaving,
    /// Blocked by LOE2, LOS or Exclusive only (the process text).
    WithoutLeaving,
}

#[derive(Debug, Clone, Copy)]
pub struct SpecModel {
    pub threads: usize,
    pub guard: EnterGuard,
}

impl SpecModel {
    pub fn new(threads: usize) -> Self {
        SpecModel {
            threads,
            guard: EnterGuard::default(),
        }
    }
}

fn any(s: &[SpecState], set: &[SpecState]) -> bool {
    s.iter().any(|x| set.contains(x))
}

/// Moves of thread `p` as `(action, new state of p)`.
pub fn moves(s: &[SpecState], p: usize, guard: EnterGuard, out: &mut Vec<(Action, SpecState)>) {
    use SpecState::*;
    let t = p as Thread;
    match s[p] {
        Free => {
            out.push((Action::Call(Op::EnterShared, t), EnterS));
            out.push((Action::Call(Op::EnterExclusive, t), EnterE));
        }
        EnterS => {
            if any(s, &[Los, Exclusive]) {
                out.push((Action::Improbable, EnterS));
            } else {
                out.push((Action::Tau, Loe1));
            }
        }
        Loe1 => out.push((Action::Return(Op::EnterShared, t), Shared)),
        Shared => out.push((Action::Call(Op::LeaveShared, t), LeaveS)),
        LeaveS => out.push((Action::Return(Op::LeaveShared, t), Free)),
        EnterE => {
            let blocking: &[SpecState] = match guard {
                EnterGuard::WithLeaving => &[Loe2, Los, LeaveE1, Exclusive],
                EnterGuard::WithoutLeaving => &[Loe2, Los, Exclusive],
            };
            if !any(s, blocking) {
                out.push((Action::Tau, Loe2));
            }
        }
        Loe2 => {
            out.push((Action::Improbable, Loe2));
            if !any(s, &[Loe1, Shared]) {
                out.push((Action::Tau, Los));
            }
        }
        Los => out.push((Action::Return(Op::EnterExclusive, t), Exclusive)),
        Exclusive => out.push((Action::Call(Op::LeaveExclusive, t), LeaveE1)),
        LeaveE1 => {
            out.push((Action::Improbable, LeaveE1));
            out.push((Action::Tau, LeaveE2));
        }
        LeaveE2 => out.push((Action::Return(Op::LeaveExclusive, t), Free)),
    }
}

/// Mutual exclusion as visible in the state vector.
pub fn sound(s: &[SpecState]) -> bool {
    use SpecState::*;
    let exclusive = s.iter().filter(|x| matches!(x, Los | Exclusive)).count();
    let shared = s.iter().any(|x| matches!(x, Loe1 | Shared));
    exclusive <= 1 && !(exclusive == 1 && shared)
}

impl Model for SpecModel {
    type State = Vec<SpecState>;

    fn initial(&self) -> Self::State {
        vec![SpecState::Free; self.threads]
    }

    fn successors(&self, s: &Self::State, out: &mut Vec<(Action, Self::State)>) {
        debug_assert!(sound(s), "spec reached an unsound state {s:?}");
        let mut mv = Vec::new();
        for p in 0..self.threads {
            mv.clear();
            moves(s, p, self.guard, &mut mv);
            for (a, next) in mv.drain(..) {
                let mut t = s.clone();
                t[p] = next;
                out.push((a, t));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explore::explore;
    use std::collections::{HashSet, VecDeque};

    #[test]
    fn one_thread_visits_each_state_once() {
        for guard in [EnterGuard::WithLeaving, EnterGuard::WithoutLeaving] {
            let e = explore(&SpecModel { threads: 1, guard }, 1000).unwrap();
            assert_eq!(e.lts.num_states(), 11);
            let seen: HashSet<_> = e.states.iter().map(|s| s[0]).collect();
            assert_eq!(seen.len(), 11);
        }
    }

    // Plain BFS over the state vector, written independently of `explore`.
    fn naive_count(threads: usize, guard: EnterGuard) -> usize {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([vec![SpecState::Free; threads]]);
        seen.insert(queue[0].clone());
        let mut out = Vec::new();
        while let Some(s) = queue.pop_front() {
            for p in 0..threads {
                out.clear();
                moves(&s, p, guard, &mut out);
                for (_, n) in &out {
                    let mut t = s.clone();
                    t[p] = *n;
                    if seen.insert(t.clone()) {
                        queue.push_back(t);
                    }
                }
            }
        }
        seen.len()
    }

    #[test]
    fn explorer_agrees_with_naive_search() {
        for n in 1..=3 {
            let m = SpecModel::new(n);
            let e = explore(&m, 1 << 20).unwrap();
            assert_eq!(e.lts.num_states(), naive_count(n, m.guard));
            assert!(e.states.iter().all(|s| sound(s)));
        }
    }

    #[test]
    fn numbering_is_deterministic() {
        let a = explore(&SpecModel::new(2), 1 << 20).unwrap();
        let b = explore(&SpecModel::new(2), 1 << 20).unwrap();
        assert!(a.lts.transitions().eq(b.lts.transitions()));
    }
}
