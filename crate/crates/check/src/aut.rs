//! Aldebaran `.aut` reading and writing.

use std::io::{BufRead, Write};

use crate::action::Action;
use crate::lts::{Lts, LtsBuilder};
use crate::CheckError;

pub fn write_aut(lts: &Lts, mut out: impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "des ({},{},{})",
        lts.initial(),
        lts.num_transitions(),
        lts.num_states()
    )?;
    for (s, e) in lts.transitions() {
        writeln!(out, "({},\"{}\",{})", s, lts.action(e.label), e.target)?;
    }
    out.flush()
}

fn bad(line: usize, message: impl Into<String>) -> CheckError {
    CheckError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(line: &str) -> Option<(u32, usize, usize)> {
    let inner = line.trim().strip_prefix("des")?.trim().strip_prefix('(')?.strip_suffix(')')?;
    let mut it = inner.split(',').map(|x| x.trim());
    let r = (it.next()?.parse().ok()?, it.next()?.parse().ok()?, it.next()?.parse().ok()?);
    it.next().is_none().then_some(r)
}

fn parse_transition(line: &str) -> Option<(u32, &str, u32)> {
    let inner = line.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (src, rest) = inner.split_once(',')?;
    let (label, dst) = rest.rsplit_once(',')?;
    let label = label.trim();
    let label = match label.strip_prefix('"') {
        Some(l) => l.strip_suffix('"')?,
        None => label,
    };
    Some((src.trim().parse().ok()?, label, dst.trim().parse().ok()?))
}

pub fn read_aut(input: impl BufRead) -> Result<Lts, CheckError> {
    let mut lines = input.lines().enumerate();
    let (initial, transitions, states) = loop {
        match lines.next() {
            None => return Err(bad(1, "missing des header")),
            Some((i, l)) => {
                let l = l?;
                if l.trim().is_empty() {
                    continue;
                }
                break parse_header(&l).ok_or_else(|| bad(i + 1, "malformed des header"))?;
            }
        }
    };
    if initial as usize >= states {
        return Err(bad(1, "initial state out of range"));
    }
    let mut b = LtsBuilder::new(states);
    let mut count = 0;
    for (i, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let (s, label, t) = parse_transition(&l).ok_or_else(|| bad(i + 1, "malformed transition"))?;
        if s as usize >= states || t as usize >= states {
            return Err(bad(i + 1, "state out of range"));
        }
        let action: Action = label.parse().expect("label parsing is infallible");
        b.add(s, &action, t);
        count += 1;
    }
    if count != transitions {
        return Err(bad(1, format!("header announces {transitions} transitions, found {count}")));
    }
    Ok(b.build(initial))
}
