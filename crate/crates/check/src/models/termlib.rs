//! Threads creating and destroying constant terms through a hash table,
//! with the lock specification as the synchronisation component.

use rustc_hash::FxHashMap;

use crate::action::{Action, Addr, Internal, Op, TermId, Thread};
use crate::explore::Model;
use crate::models::spec::{self, EnterGuard, SpecState};
use crate::CheckError;

#[derive(Debug, Clone)]
pub struct TermLibModel {
    pub threads: usize,
    pub terms: usize,
    pub addresses: usize,
    pub guard: EnterGuard,
    phases: Vec<Phase>,
    phase_index: FxHashMap<Phase, u32>,
}

impl TermLibModel {
    /// Panics when the dimensions are out of range; see [`Self::try_new`].
    pub fn new(threads: usize, terms: usize, addresses: usize) -> Self {
        Self::try_new(threads, terms, addresses).unwrap()
    }

    pub fn try_new(threads: usize, terms: usize, addresses: usize) -> Result<Self, CheckError> {
        if !(1..=8).contains(&threads) || !(1..=8).contains(&terms) || !(1..=8).contains(&addresses) {
            return Err(CheckError::Usage("threads, terms and addresses must be between 1 and 8".into()));
        }
        let phases = all_phases(terms, addresses);
        let phase_index = phases.iter().enumerate().map(|(i, ph)| (*ph, i as u32)).collect();
        let model = TermLibModel {
            threads,
            terms,
            addresses,
            guard: EnterGuard::default(),
            phases,
            phase_index,
        };
        let bits: f64 = model.radices().map(|r| (r as f64).log2()).sum();
        if bits > 127.0 {
            return Err(CheckError::Usage(format!(
                "a ({threads},{terms},{addresses}) state needs {bits:.0} bits; at most 127 fit"
            )));
        }
        Ok(model)
    }

    /// Mixed-radix digits of a packed state, in encoding order.
    fn radices(&self) -> impl Iterator<Item = u128> + '_ {
        let (n, k, m) = (self.threads, self.terms, self.addresses);
        let a = m as u128 + 1;
        std::iter::repeat_n(SpecState::ALL.len() as u128, n)
            .chain(std::iter::repeat_n(self.phases.len() as u128, n))
            .chain(std::iter::repeat_n(a, n * k + k))
            .chain(std::iter::once(1u128 << m))
            .chain(std::iter::repeat_n(n as u128 + 1, m))
    }

    fn encode(&self, s: &LibState) -> u128 {
        let addr = |a: &Option<Addr>| a.map_or(0, |a| a as u128 + 1);
        let digits = s
            .lock
            .iter()
            .map(|l| SpecState::ALL.iter().position(|x| x == l).unwrap() as u128)
            .chain(s.phases.iter().map(|ph| self.phase_index[ph] as u128))
            .chain(s.known.iter().map(addr))
            .chain(s.table.iter().map(addr))
            .chain(std::iter::once(s.used as u128))
            .chain(s.counter.iter().map(|&c| c as u128));
        let mut code = 0u128;
        let mut scale = 1u128;
        for (d, r) in digits.zip(self.radices()) {
            debug_assert!(d < r);
            code += d * scale;
            scale = scale.wrapping_mul(r);
        }
        code
    }

    pub fn decode(&self, mut code: u128) -> LibState {
        let (n, k, m) = (self.threads, self.terms, self.addresses);
        let mut radices = self.radices();
        let mut next = || {
            let r = radices.next().unwrap();
            let d = code % r;
            code /= r;
            d
        };
        let addr = |d: u128| (d != 0).then(|| (d - 1) as Addr);
        LibState {
            lock: (0..n).map(|_| SpecState::ALL[next() as usize]).collect(),
            phases: (0..n).map(|_| self.phases[next() as usize]).collect(),
            known: (0..n * k).map(|_| addr(next())).collect(),
            table: (0..k).map(|_| addr(next())).collect(),
            used: next() as u8,
            counter: (0..m).map(|_| next() as u8).collect(),
        }
    }

    fn all_terms(&self) -> u8 {
        ((1u16 << self.terms) - 1) as u8
    }
}

/// Thread phase. `t` is the term being created or destroyed; in GC phases
/// `checked` is a term bitmask and `u` the term being inspected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Idle,
    CreateEnter(TermId),
    CreateEntering(TermId),
    Contains(TermId),
    Construct(TermId),
    Insert(TermId, Addr),
    Destruct(TermId, Addr),
    Protect(TermId, Addr),
    CreateLeave(TermId, Addr),
    CreateLeaving(TermId, Addr),
    CreateReturn(TermId, Addr),
    Unprotect(TermId),
    Choice(TermId),
    GcEnter(TermId),
    GcEntering(TermId),
    Gc { t: TermId, checked: u8 },
    GcProtected { t: TermId, checked: u8, u: TermId, a: Addr },
    GcDestruct { t: TermId, checked: u8, u: TermId, a: Addr },
    GcDelete { t: TermId, checked: u8, u: TermId },
    GcLeaving(TermId),
    DestroyReturn(TermId),
}

fn all_phases(k: usize, m: usize) -> Vec<Phase> {
    let ts = || (0..k as TermId).collect::<Vec<_>>();
    let ta = || ts().into_iter().flat_map(|t| (0..m as Addr).map(move |a| (t, a))).collect::<Vec<_>>();
    let mut out = vec![Phase::Idle];
    for t in ts() {
        out.extend([
            Phase::CreateEnter(t),
            Phase::CreateEntering(t),
            Phase::Contains(t),
            Phase::Construct(t),
            Phase::Unprotect(t),
            Phase::Choice(t),
            Phase::GcEnter(t),
            Phase::GcEntering(t),
            Phase::GcLeaving(t),
            Phase::DestroyReturn(t),
        ]);
    }
    for (t, a) in ta() {
        out.extend([
            Phase::Insert(t, a),
            Phase::Destruct(t, a),
            Phase::Protect(t, a),
            Phase::CreateLeave(t, a),
            Phase::CreateLeaving(t, a),
            Phase::CreateReturn(t, a),
        ]);
    }
    for t in ts() {
        for checked in (0..1u16 << k).map(|c| c as u8) {
            out.push(Phase::Gc { t, checked });
            for u in ts().into_iter().filter(|&u| checked & (1 << u) == 0) {
                out.push(Phase::GcDelete { t, checked, u });
                for a in 0..m as Addr {
                    out.push(Phase::GcProtected { t, checked, u, a });
                    out.push(Phase::GcDestruct { t, checked, u, a });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LibState {
    pub lock: Vec<SpecState>,
    pub phases: Vec<Phase>,
    /// Per thread and term, the address the thread holds (`p * terms + t`).
    pub known: Vec<Option<Addr>>,
    pub table: Vec<Option<Addr>>,
    pub used: u8,
    pub counter: Vec<u8>,
}

impl Model for TermLibModel {
    /// Packed with [`TermLibModel::decode`]'s layout to keep large state
    /// spaces in memory.
    type State = u128;

    fn initial(&self) -> u128 {
        self.encode(&self.initial_state())
    }

    fn successors(&self, code: &u128, out: &mut Vec<(Action, u128)>) {
        let mut moves = Vec::new();
        self.state_successors(&self.decode(*code), &mut moves);
        out.extend(moves.into_iter().map(|(a, s)| (a, self.encode(&s))));
    }
}

impl TermLibModel {
    pub fn initial_state(&self) -> LibState {
        LibState {
            lock: vec![SpecState::Free; self.threads],
            phases: vec![Phase::Idle; self.threads],
            known: vec![None; self.threads * self.terms],
            table: vec![None; self.terms],
            used: 0,
            counter: vec![0; self.addresses],
        }
    }

    pub fn state_successors(&self, s: &LibState, out: &mut Vec<(Action, LibState)>) {
        let mut lock_moves = Vec::new();
        for p in 0..self.threads {
            lock_moves.clear();
            spec::moves(&s.lock, p, self.guard, &mut lock_moves);
            // Steps the lock takes on its own; calls and returns are
            // synchronised with the thread below.
            for (a, next) in &lock_moves {
                if matches!(a, Action::Tau | Action::Improbable) {
                    let mut t = s.clone();
                    t.lock[p] = *next;
                    out.push((a.clone(), t));
                }
            }
            self.thread_moves(s, p, out);
        }
    }
}

impl TermLibModel {
    fn thread_moves(&self, s: &LibState, p: usize, out: &mut Vec<(Action, LibState)>) {
        let by = p as Thread;
        let k = self.terms;
        let go = |out: &mut Vec<(Action, LibState)>, a: Action, ph: Phase, f: &dyn Fn(&mut LibState)| {
            let mut t = s.clone();
            t.phases[p] = ph;
            f(&mut t);
            out.push((a, t));
        };
        let none = &|_: &mut LibState| {};
        let int = Action::Internal;
        // Lock interface: the thread's step is enabled only together with
        // the matching step of the lock specification.
        let sync = |out: &mut Vec<(Action, LibState)>, a: Action, from: SpecState, to: SpecState, ph: Phase| {
            if s.lock[p] == from {
                go(out, a, ph, &|t| t.lock[p] = to);
            }
        };
        use SpecState as L;
        match s.phases[p] {
            Phase::Idle => {
                for t in 0..k {
                    let tt = t as TermId;
                    if s.known[p * k + t].is_none() {
                        go(out, Action::CreateCall(by, tt), Phase::CreateEnter(tt), none);
                    } else {
                        go(out, Action::DestroyCall(by, tt), Phase::Unprotect(tt), none);
                    }
                }
            }
            Phase::CreateEnter(t) => {
                sync(out, Action::Call(Op::EnterShared, by), L::Free, L::EnterS, Phase::CreateEntering(t))
            }
            Phase::CreateEntering(t) => {
                sync(out, Action::Return(Op::EnterShared, by), L::Loe1, L::Shared, Phase::Contains(t))
            }
            Phase::Contains(t) => {
                let addr = s.table[t as usize];
                let next = addr.map_or(Phase::Construct(t), |a| Phase::Protect(t, a));
                go(out, int(Internal::Contains { term: t, addr, by }), next, none);
            }
            Phase::Construct(t) => {
                for a in (0..self.addresses).filter(|&a| s.used & (1 << a) == 0) {
                    let addr = a as Addr;
                    let act = int(Internal::ConstructTerm { term: t, addr, by });
                    go(out, act, Phase::Insert(t, addr), &|x| x.used |= 1 << a);
                }
            }
            Phase::Insert(t, a) => {
                if s.table[t as usize].is_none() {
                    let act = int(Internal::Insert { term: t, addr: a, ok: true, by });
                    go(out, act, Phase::Protect(t, a), &|x| x.table[t as usize] = Some(a));
                } else {
                    let act = int(Internal::Insert { term: t, addr: a, ok: false, by });
                    go(out, act, Phase::Destruct(t, a), none);
                }
            }
            Phase::Destruct(t, a) => {
                let act = int(Internal::DestructTerm { term: t, addr: a, by });
                go(out, act, Phase::Contains(t), &|x| x.used &= !(1 << a));
            }
            Phase::Protect(t, a) => {
                let act = int(Internal::Protect { term: t, addr: a, by });
                go(out, act, Phase::CreateLeave(t, a), &|x| x.counter[a as usize] += 1);
            }
            Phase::CreateLeave(t, a) => sync(
                out,
                Action::Call(Op::LeaveShared, by),
                L::Shared,
                L::LeaveS,
                Phase::CreateLeaving(t, a),
            ),
            Phase::CreateLeaving(t, a) => sync(
                out,
                Action::Return(Op::LeaveShared, by),
                L::LeaveS,
                L::Free,
                Phase::CreateReturn(t, a),
            ),
            Phase::CreateReturn(t, a) => {
                go(out, Action::CreateReturn(by, t, a), Phase::Idle, &|x| {
                    x.known[p * k + t as usize] = Some(a)
                });
            }
            Phase::Unprotect(t) => {
                let a = s.known[p * k + t as usize].expect("destroying an unknown term");
                let act = int(Internal::Unprotect { term: t, addr: a, by });
                go(out, act, Phase::Choice(t), &|x| x.counter[a as usize] -= 1);
            }
            Phase::Choice(t) => {
                go(out, int(Internal::Skip(by)), Phase::DestroyReturn(t), none);
                go(out, int(Internal::Skip(by)), Phase::GcEnter(t), none);
            }
            Phase::GcEnter(t) => {
                sync(out, Action::Call(Op::EnterExclusive, by), L::Free, L::EnterE, Phase::GcEntering(t))
            }
            Phase::GcEntering(t) => sync(
                out,
                Action::Return(Op::EnterExclusive, by),
                L::Los,
                L::Exclusive,
                Phase::Gc { t, checked: 0 },
            ),
            Phase::Gc { t, checked } => {
                if checked == self.all_terms() {
                    sync(out, Action::Call(Op::LeaveExclusive, by), L::Exclusive, L::LeaveE1, Phase::GcLeaving(t));
                    return;
                }
                for u in (0..k).filter(|&u| checked & (1 << u) == 0) {
                    let uu = u as TermId;
                    let addr = s.table[u];
                    let next = match addr {
                        None => Phase::Gc { t, checked: checked | 1 << u },
                        Some(a) => Phase::GcProtected { t, checked, u: uu, a },
                    };
                    go(out, int(Internal::Contains { term: uu, addr, by }), next, none);
                }
            }
            Phase::GcProtected { t, checked, u, a } => {
                let value = s.counter[a as usize] != 0;
                let next = if value {
                    Phase::Gc { t, checked: checked | 1 << u }
                } else {
                    Phase::GcDestruct { t, checked, u, a }
                };
                go(out, int(Internal::Protected { addr: a, value, by }), next, none);
            }
            Phase::GcDestruct { t, checked, u, a } => {
                let act = int(Internal::DestructTerm { term: u, addr: a, by });
                go(out, act, Phase::GcDelete { t, checked, u }, &|x| x.used &= !(1 << a));
            }
            Phase::GcDelete { t, checked, u } => {
                let act = int(Internal::Delete { term: u, by });
                go(out, act, Phase::Gc { t, checked: checked | 1 << u }, &|x| {
                    x.table[u as usize] = None
                });
            }
            Phase::GcLeaving(t) => sync(
                out,
                Action::Return(Op::LeaveExclusive, by),
                L::LeaveE2,
                L::Free,
                Phase::DestroyReturn(t),
            ),
            Phase::DestroyReturn(t) => {
                go(out, Action::DestroyReturn(by, t), Phase::Idle, &|x| {
                    x.known[p * k + t as usize] = None
                });
            }
        }
    }
}

/// Visible in the library's external behaviour.
pub fn is_library_visible(a: &Action) -> bool {
    matches!(
        a,
        Action::CreateCall(..)
            | Action::CreateReturn(..)
            | Action::DestroyCall(..)
            | Action::DestroyReturn(..)
            | Action::Improbable
    )
}
