//! Transition labels shared by all models.
//!
//! Threads, terms and addresses are small indices. Visible actions print in
//! the `name(args)` form used in `.aut` files and counterexample traces.

use std::fmt;
use std::str::FromStr;

pub type Thread = u8;
pub type TermId = u8;
pub type Addr = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    EnterShared,
    LeaveShared,
    EnterExclusive,
    LeaveExclusive,
}

impl Op {
    pub const ALL: [Op; 4] = [
        Op::EnterShared,
        Op::LeaveShared,
        Op::EnterExclusive,
        Op::LeaveExclusive,
    ];

    fn stem(self) -> &'static str {
        match self {
            Op::EnterShared => "enter_shared",
            Op::LeaveShared => "leave_shared",
            Op::EnterExclusive => "enter_exclusive",
            Op::LeaveExclusive => "leave_exclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    Busy(Thread),
    Forbidden(Thread),
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::Busy(p) => write!(f, "Busy({p})"),
            Flag::Forbidden(p) => write!(f, "Forbidden({p})"),
        }
    }
}

/// Steps that are hidden before equivalence checking. `by` is the acting
/// thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Internal {
    Store { flag: Flag, value: bool, by: Thread },
    Load { flag: Flag, value: bool, by: Thread },
    Lock(Thread),
    Unlock(Thread),
    /// End of a flag sweep.
    Done,
    Contains { term: TermId, addr: Option<Addr>, by: Thread },
    ConstructTerm { term: TermId, addr: Addr, by: Thread },
    DestructTerm { term: TermId, addr: Addr, by: Thread },
    Insert { term: TermId, addr: Addr, ok: bool, by: Thread },
    Delete { term: TermId, by: Thread },
    Protect { term: TermId, addr: Addr, by: Thread },
    Unprotect { term: TermId, addr: Addr, by: Thread },
    Protected { addr: Addr, value: bool, by: Thread },
    Skip(Thread),
}

fn addr_or_bot(a: Option<Addr>) -> String {
    a.map_or_else(|| "bot".to_string(), |a| a.to_string())
}

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Internal::Store { flag, value, by } => write!(f, "store({flag},{value},{by})"),
            Internal::Load { flag, value, by } => write!(f, "load({flag},{value},{by})"),
            Internal::Lock(p) => write!(f, "lock({p})"),
            Internal::Unlock(p) => write!(f, "unlock({p})"),
            Internal::Done => f.write_str("internal"),
            Internal::Contains { term, addr, by } => {
                write!(f, "contains({term},{},{by})", addr_or_bot(addr))
            }
            Internal::ConstructTerm { term, addr, by } => {
                write!(f, "construct_term({term},{addr},{by})")
            }
            Internal::DestructTerm { term, addr, by } => {
                write!(f, "destruct_term({term},{addr},{by})")
            }
            Internal::Insert { term, addr, ok, by } => write!(f, "insert({term},{addr},{ok},{by})"),
            Internal::Delete { term, by } => write!(f, "delete({term},{by})"),
            Internal::Protect { term, addr, by } => write!(f, "protect({term},{addr},{by})"),
            Internal::Unprotect { term, addr, by } => write!(f, "unprotect({term},{addr},{by})"),
            Internal::Protected { addr, value, by } => write!(f, "protected({addr},{value},{by})"),
            Internal::Skip(p) => write!(f, "skip({p})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Tau,
    Improbable,
    Call(Op, Thread),
    Return(Op, Thread),
    CreateCall(Thread, TermId),
    CreateReturn(Thread, TermId, Addr),
    DestroyCall(Thread, TermId),
    DestroyReturn(Thread, TermId),
    Internal(Internal),
    /// A label read from a file that is none of the above.
    Other(String),
}

impl Action {
    /// Hidden before equivalence checking and by the term library's
    /// visibility filter. Unknown labels count as hidden.
    pub fn is_internal(&self) -> bool {
        matches!(self, Action::Internal(_) | Action::Other(_))
    }

    pub fn is_lock_interface(&self) -> bool {
        matches!(self, Action::Call(..) | Action::Return(..))
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, Action::Tau)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Tau => f.write_str("tau"),
            Action::Improbable => f.write_str("improbable"),
            Action::Call(op, p) => write!(f, "{}_call({p})", op.stem()),
            Action::Return(op, p) => write!(f, "{}_return({p})", op.stem()),
            Action::CreateCall(p, t) => write!(f, "create_call({p},{t})"),
            Action::CreateReturn(p, t, a) => write!(f, "create_return({p},{t},{a})"),
            Action::DestroyCall(p, t) => write!(f, "destroy_call({p},{t})"),
            Action::DestroyReturn(p, t) => write!(f, "destroy_return({p},{t})"),
            Action::Internal(i) => i.fmt(f),
            Action::Other(s) => f.write_str(s),
        }
    }
}

fn parse_visible(s: &str) -> Option<Action> {
    match s {
        "tau" | "i" => return Some(Action::Tau),
        "improbable" => return Some(Action::Improbable),
        _ => {}
    }
    let (name, rest) = s.split_once('(')?;
    let args: Vec<u8> = rest
        .strip_suffix(')')?
        .split(',')
        .map(|a| a.trim().parse().ok())
        .collect::<Option<_>>()?;
    for op in Op::ALL {
        if let Some(kind) = name.strip_prefix(op.stem()) {
            return match (kind, args.as_slice()) {
                ("_call", &[p]) => Some(Action::Call(op, p)),
                ("_return", &[p]) => Some(Action::Return(op, p)),
                _ => None,
            };
        }
    }
    match (name, args.as_slice()) {
        ("create_call", &[p, t]) => Some(Action::CreateCall(p, t)),
        ("create_return", &[p, t, a]) => Some(Action::CreateReturn(p, t, a)),
        ("destroy_call", &[p, t]) => Some(Action::DestroyCall(p, t)),
        ("destroy_return", &[p, t]) => Some(Action::DestroyReturn(p, t)),
        _ => None,
    }
}

impl FromStr for Action {
    type Err = std::convert::Infallible;

    /// Visible labels parse back to their variant; internal ones come back
    /// as `Other`, which is still hidden.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(parse_visible(s).unwrap_or_else(|| Action::Other(s.to_string())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visible_labels_round_trip() {
        let mut all = vec![Action::Tau, Action::Improbable];
        for op in Op::ALL {
            all.push(Action::Call(op, 2));
            all.push(Action::Return(op, 0));
        }
        all.extend([
            Action::CreateCall(1, 2),
            Action::CreateReturn(1, 2, 3),
            Action::DestroyCall(0, 1),
            Action::DestroyReturn(0, 1),
        ]);
        for a in all {
            assert_eq!(a.to_string().parse::<Action>().unwrap(), a);
        }
    }

    #[test]
    fn internal_labels_stay_hidden_after_parsing() {
        let a = Action::Internal(Internal::Store {
            flag: Flag::Forbidden(1),
            value: true,
            by: 0,
        });
        assert_eq!(a.to_string(), "store(Forbidden(1),true,0)");
        let back: Action = a.to_string().parse().unwrap();
        assert!(back.is_internal());
        let c = Action::Internal(Internal::Contains { term: 0, addr: None, by: 1 });
        assert_eq!(c.to_string(), "contains(0,bot,1)");
    }
}
