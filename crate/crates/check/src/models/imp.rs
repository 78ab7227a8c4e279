//! The lock implementation at the granularity of single flag and mutex
//! accesses, plus seeded bugs.

use std::fmt;
use std::str::FromStr;

use crate::action::{Action, Flag, Internal, Op, Thread};
use crate::explore::Model;
use crate::CheckError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutant {
    #[default]
    None,
    /// Both heuristic `sometimes` branches removed.
    NoSometimes,
    /// The sweep treats every thread as idle regardless of its busy flag.
    SkipBusyRecheck,
    /// `leave_exclusive` never clears thread 0's forbidden flag.
    NoForbiddenReset,
    /// `enter_shared` returns even when it reads forbidden = true.
    NoRetryLoop,
}

impl Mutant {
    pub const ALL: [Mutant; 4] = [
        Mutant::NoSometimes,
        Mutant::SkipBusyRecheck,
        Mutant::NoForbiddenReset,
        Mutant::NoRetryLoop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutant::None => "none",
            Mutant::NoSometimes => "no-sometimes",
            Mutant::SkipBusyRecheck => "skip-busy-recheck",
            Mutant::NoForbiddenReset => "no-forbidden-reset",
            Mutant::NoRetryLoop => "no-retry-loop",
        }
    }
}

impl fmt::Display for Mutant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mutant {
    type Err = CheckError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        std::iter::once(Mutant::None)
            .chain(Mutant::ALL)
            .find(|m| m.name() == s)
            .ok_or_else(|| CheckError::Usage(format!("unknown mutant `{s}`")))
    }
}

/// Program counter of one thread. Sets are thread bitmasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pc {
    Idle,
    EsStore,
    EsLoad,
    EsReset,
    EsImprobable,
    EsReturn,
    InShared,
    LsStore,
    LsReturn,
    EeLock,
    SetAll(u8),
    /// Forbidden flag of the second thread just set; next its busy flag is read.
    SaStored(u8, u8),
    SaClear(u8, u8),
    SaImprobable(u8),
    EeReturn,
    InExclusive,
    Allow(u8),
    AlImprobable(u8),
    LeUnlock,
    LeReturn,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImplState {
    pub pcs: Vec<Pc>,
    pub busy: u8,
    pub forbidden: u8,
    pub locked: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ImplModel {
    pub threads: usize,
    pub mutant: Mutant,
}

impl ImplModel {
    pub fn new(threads: usize) -> Self {
        assert!((1..=8).contains(&threads), "between 1 and 8 threads");
        ImplModel {
            threads,
            mutant: Mutant::None,
        }
    }

    fn all(&self) -> u8 {
        ((1u16 << self.threads) - 1) as u8
    }
}

fn bit(p: usize) -> u8 {
    1 << p
}

impl Model for ImplModel {
    type State = ImplState;

    fn initial(&self) -> ImplState {
        ImplState {
            pcs: vec![Pc::Idle; self.threads],
            busy: 0,
            forbidden: 0,
            locked: false,
        }
    }

    fn successors(&self, s: &ImplState, out: &mut Vec<(Action, ImplState)>) {
        for p in 0..self.threads {
            self.thread_moves(s, p, out);
        }
    }
}

impl ImplModel {
    fn thread_moves(&self, s: &ImplState, p: usize, out: &mut Vec<(Action, ImplState)>) {
        let by = p as Thread;
        let sometimes = self.mutant != Mutant::NoSometimes;
        let go = |out: &mut Vec<(Action, ImplState)>, a: Action, pc: Pc, f: &dyn Fn(&mut ImplState)| {
            let mut t = s.clone();
            t.pcs[p] = pc;
            f(&mut t);
            out.push((a, t));
        };
        let store = |flag, value| Action::Internal(Internal::Store { flag, value, by });
        let load = |flag, value| Action::Internal(Internal::Load { flag, value, by });
        let none = &|_: &mut ImplState| {};
        match s.pcs[p] {
            Pc::Idle => {
                go(out, Action::Call(Op::EnterShared, by), Pc::EsStore, none);
                go(out, Action::Call(Op::EnterExclusive, by), Pc::EeLock, none);
            }
            Pc::EsStore => go(out, store(Flag::Busy(by), true), Pc::EsLoad, &|t| t.busy |= bit(p)),
            Pc::EsLoad => {
                let f = s.forbidden & bit(p) != 0;
                let next = if !f || self.mutant == Mutant::NoRetryLoop {
                    Pc::EsReturn
                } else {
                    Pc::EsReset
                };
                go(out, load(Flag::Forbidden(by), f), next, none);
            }
            Pc::EsReset => {
                go(out, store(Flag::Busy(by), false), Pc::EsImprobable, &|t| t.busy &= !bit(p))
            }
            Pc::EsImprobable => go(out, Action::Improbable, Pc::EsStore, none),
            Pc::EsReturn => go(out, Action::Return(Op::EnterShared, by), Pc::InShared, none),
            Pc::InShared => go(out, Action::Call(Op::LeaveShared, by), Pc::LsStore, none),
            Pc::LsStore => {
                go(out, store(Flag::Busy(by), false), Pc::LsReturn, &|t| t.busy &= !bit(p))
            }
            Pc::LsReturn => go(out, Action::Return(Op::LeaveShared, by), Pc::Idle, none),
            Pc::EeLock => {
                if !s.locked {
                    go(out, Action::Internal(Internal::Lock(by)), Pc::SetAll(0), &|t| {
                        t.locked = true
                    });
                }
            }
            Pc::SetAll(set) => {
                if set == self.all() {
                    go(out, Action::Internal(Internal::Done), Pc::EeReturn, none);
                }
                // A thread already in the set may be selected again, but
                // only the branches that clear its flag lead anywhere new;
                // re-reading busy = false would be a stutter step.
                for q in 0..self.threads {
                    let member = set & bit(q) != 0;
                    if member && !sometimes {
                        continue;
                    }
                    let a = store(Flag::Forbidden(q as Thread), true);
                    go(out, a, Pc::SaStored(set, q as u8), &|t| t.forbidden |= bit(q));
                }
            }
            Pc::SaStored(set, q) => {
                let qi = q as usize;
                let b = s.busy & bit(qi) != 0;
                let flag = Flag::Busy(q);
                let member = set & bit(qi) != 0;
                if !b || self.mutant == Mutant::SkipBusyRecheck {
                    if !member {
                        go(out, load(flag, b), Pc::SetAll(set | bit(qi)), none);
                    }
                } else {
                    go(out, load(flag, true), Pc::SaClear(set, q), none);
                }
                if sometimes {
                    let a = store(Flag::Forbidden(q), false);
                    go(out, a, Pc::SaImprobable(set & !bit(qi)), &|t| t.forbidden &= !bit(qi));
                }
            }
            Pc::SaClear(set, q) => {
                let a = store(Flag::Forbidden(q), false);
                go(out, a, Pc::SaImprobable(set & !bit(q as usize)), &|t| t.forbidden &= !bit(q as usize));
            }
            Pc::SaImprobable(set) => go(out, Action::Improbable, Pc::SetAll(set), none),
            Pc::EeReturn => go(out, Action::Return(Op::EnterExclusive, by), Pc::InExclusive, none),
            Pc::InExclusive => go(out, Action::Call(Op::LeaveExclusive, by), Pc::Allow(0), none),
            Pc::Allow(set) => {
                if set == self.all() {
                    go(out, Action::Internal(Internal::Done), Pc::LeUnlock, none);
                }
                for q in 0..self.threads {
                    let member = set & bit(q) != 0;
                    if !member {
                        let next = Pc::Allow(set | bit(q));
                        if q == 0 && self.mutant == Mutant::NoForbiddenReset {
                            go(out, Action::Internal(Internal::Done), next, none);
                        } else {
                            let a = store(Flag::Forbidden(q as Thread), false);
                            go(out, a, next, &|t| t.forbidden &= !bit(q));
                        }
                    }
                    if sometimes {
                        let a = store(Flag::Forbidden(q as Thread), true);
                        go(out, a, Pc::AlImprobable(set & !bit(q)), &|t| t.forbidden |= bit(q));
                    }
                }
            }
            Pc::AlImprobable(set) => go(out, Action::Improbable, Pc::Allow(set), none),
            Pc::LeUnlock => {
                go(out, Action::Internal(Internal::Unlock(by)), Pc::LeReturn, &|t| {
                    t.locked = false
                })
            }
            Pc::LeReturn => go(out, Action::Return(Op::LeaveExclusive, by), Pc::Idle, none),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explore::explore;

    #[test]
    fn mutant_names_round_trip() {
        for m in Mutant::ALL {
            assert_eq!(m.name().parse::<Mutant>().unwrap(), m);
        }
        assert!("bogus".parse::<Mutant>().is_err());
    }

    #[test]
    fn no_deadlock() {
        for n in 1..=2 {
            let e = explore(&ImplModel::new(n), 1 << 22).unwrap();
            for s in 0..e.lts.num_states() as u32 {
                assert!(!e.lts.successors(s).is_empty(), "deadlock in {:?}", e.states[s as usize]);
            }
        }
    }

    #[test]
    fn lock_held_exactly_while_sweeping_or_exclusive() {
        let e = explore(&ImplModel::new(2), 1 << 22).unwrap();
        for s in &e.states {
            let holders = s
                .pcs
                .iter()
                .filter(|pc| {
                    !matches!(
                        pc,
                        Pc::Idle
                            | Pc::EsStore
                            | Pc::EsLoad
                            | Pc::EsReset
                            | Pc::EsImprobable
                            | Pc::EsReturn
                            | Pc::InShared
                            | Pc::LsStore
                            | Pc::LsReturn
                            | Pc::EeLock
                            | Pc::LeReturn
                    )
                })
                .count();
            assert_eq!(holders, s.locked as usize, "{s:?}");
        }
    }
}
