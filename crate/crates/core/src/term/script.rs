//! Deterministic single-threaded scripts, one operation per line:
//!
//! ```text
//! create <symbol> <handle>...   # arity = number of handles
//! destroy <handle>
//! gc
//! ```
//!
//! Handles are numbered by the order of the `create` lines that made them.
//! Blank lines and `#` comments are ignored.

use std::fmt;

use super::{Term, TermError, TermLibrary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptOp {
    Create { symbol: String, args: Vec<usize> },
    Destroy(usize),
    Gc,
}

impl fmt::Display for ScriptOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScriptOp::Create { symbol, args } => {
                write!(f, "create {symbol}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
            ScriptOp::Destroy(i) => write!(f, "destroy {i}"),
            ScriptOp::Gc => f.write_str("gc"),
        }
    }
}

fn script_error(line: usize, message: impl Into<String>) -> TermError {
    TermError::Script {
        line,
        message: message.into(),
    }
}

pub fn parse(text: &str) -> Result<Vec<ScriptOp>, TermError> {
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut words = content.split_whitespace();
        let Some(op) = words.next() else { continue };
        let index = |w: &str| {
            w.parse::<usize>()
                .map_err(|_| script_error(line, format!("`{w}` is not a handle number")))
        };
        match op {
            "create" => {
                let symbol = words
                    .next()
                    .ok_or_else(|| script_error(line, "create needs a symbol"))?
                    .to_string();
                let args = words.map(index).collect::<Result<_, _>>()?;
                ops.push(ScriptOp::Create { symbol, args });
            }
            "destroy" => {
                let w = words.next().ok_or_else(|| script_error(line, "destroy needs a handle"))?;
                ops.push(ScriptOp::Destroy(index(w)?));
                if words.next().is_some() {
                    return Err(script_error(line, "destroy takes one handle"));
                }
            }
            "gc" => ops.push(ScriptOp::Gc),
            other => return Err(script_error(line, format!("unknown operation `{other}`"))),
        }
    }
    Ok(ops)
}

/// Runs the script on a fresh session, collects garbage at the end, and
/// returns the structural fingerprints of the surviving nodes.
pub fn run(lib: &TermLibrary, ops: &[ScriptOp]) -> Result<Vec<u128>, TermError> {
    let session = lib.session()?;
    let mut handles: Vec<Option<Term<'_>>> = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        let line = i + 1;
        match op {
            ScriptOp::Create { symbol, args } => {
                let f = lib.declare_symbol(symbol, args.len());
                let views = args
                    .iter()
                    .map(|&a| match handles.get(a) {
                        Some(Some(t)) => Ok(t.as_ref()),
                        Some(None) => Err(script_error(line, format!("handle {a} was destroyed"))),
                        None => Err(script_error(line, format!("no handle {a}"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let t = session.create(f, &views)?;
                handles.push(Some(t));
            }
            ScriptOp::Destroy(a) => match handles.get_mut(*a) {
                Some(slot @ Some(_)) => drop(slot.take()),
                Some(None) => return Err(script_error(line, format!("handle {a} destroyed twice"))),
                None => return Err(script_error(line, format!("no handle {a}"))),
            },
            ScriptOp::Gc => {
                session.collect_garbage();
            }
        }
    }
    session.collect_garbage();
    let census = session.with_exclusive(|view| view.fingerprints());
    drop(handles);
    Ok(census)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{GcPolicy, LibraryConfig};
    use crate::Strategy;

    fn lib(strategy: Strategy) -> TermLibrary {
        TermLibrary::new(LibraryConfig {
            gc: GcPolicy {
                automatic: false,
                ..GcPolicy::default()
            },
            ..LibraryConfig::with_strategy(strategy)
        })
    }

    #[test]
    fn parse_and_print_round_trip() {
        let text = "create c\ncreate f 0 0 # pair\n\ndestroy 0\ngc\n";
        let ops = parse(text).unwrap();
        assert_eq!(ops.len(), 4);
        let printed: Vec<String> = ops.iter().map(|o| o.to_string()).collect();
        assert_eq!(printed, ["create c", "create f 0 0", "destroy 0", "gc"]);
        assert_eq!(parse(&printed.join("\n")).unwrap(), ops);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(matches!(parse("create"), Err(TermError::Script { line: 1, .. })));
        assert!(matches!(parse("gc\ndestroy x"), Err(TermError::Script { line: 2, .. })));
        assert!(matches!(parse("frobnicate"), Err(TermError::Script { .. })));
    }

    #[test]
    fn double_destroy_is_a_usage_error() {
        let ops = parse("create c\ndestroy 0\ndestroy 0").unwrap();
        for s in Strategy::ALL {
            assert!(matches!(run(&lib(s), &ops), Err(TermError::Script { line: 3, .. })));
        }
    }

    #[test]
    fn survivors_are_the_held_terms_and_their_subterms() {
        let ops = parse("create a\ncreate b\ncreate f 0 1\ncreate g 2\ndestroy 3\ndestroy 0").unwrap();
        for s in Strategy::ALL {
            // a, b and f(a,b) survive through handle 2; g(f(a,b)) does not
            assert_eq!(run(&lib(s), &ops).unwrap().len(), 3, "{s}");
        }
    }
}
