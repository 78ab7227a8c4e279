//! A synthetic state space explored in parallel. States are terms
//! `pair(x, y)` over unary numerals on a `width` by `height` grid; each
//! state steps to `(x+1, y)` and `(x, y+1)` while inside the grid.

use std::collections::VecDeque;
use std::sync::Barrier;
use std::time::Instant;

use parking_lot::Mutex;
use rustc_hash::FxHashSet;
use tf_core::{PinnedTerm, Term, TermLibrary};

use crate::terms::library_config;
use crate::{BenchConfig, BenchError, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub width: u32,
    pub height: u32,
}

impl Grid {
    pub const DEFAULT: Grid = Grid {
        width: 100,
        height: 1000,
    };

    pub fn states(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }
}

struct Work<'lib> {
    queue: VecDeque<(u32, u32, PinnedTerm<'lib>)>,
    seen: FxHashSet<usize>,
    /// Entries taken from the queue whose successors are not yet pushed.
    active: usize,
    failed: bool,
}

/// Threads share one work queue behind a plain mutex. A state is new when
/// the address of its term has not been seen before.
pub fn run_exploration_workload(cfg: &BenchConfig, grid: &Grid) -> Result<Outcome, BenchError> {
    if grid.width == 0 || grid.height == 0 {
        return Err(BenchError::Usage("empty grid".into()));
    }
    let lib = TermLibrary::new(library_config(cfg));
    let zero = lib.declare_symbol("zero", 0);
    let succ = lib.declare_symbol("succ", 1);
    let pair = lib.declare_symbol("pair", 2);

    let work = {
        let session = lib.session()?;
        let z = session.constant(zero)?;
        let init = session.create(pair, &[z.as_ref(), z.as_ref()])?;
        Mutex::new(Work {
            seen: FxHashSet::from_iter([init.address()]),
            queue: VecDeque::from([(0, 0, session.pin(init.as_ref()))]),
            active: 0,
            failed: false,
        })
    };
    let barrier = Barrier::new(cfg.threads + 1);
    let mut start = Instant::now();

    let results: Vec<Result<(), BenchError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.threads)
            .map(|_| {
                let (lib, work, barrier) = (&lib, &work, &barrier);
                s.spawn(move || -> Result<(), BenchError> {
                    let session = lib.session();
                    barrier.wait();
                    let session = session?;
                    // Expanded states stay protected until the run ends.
                    let mut done: Vec<Term<'_>> = Vec::new();
                    loop {
                        let item = {
                            let mut w = work.lock();
                            if w.failed {
                                break;
                            }
                            match w.queue.pop_front() {
                                Some(item) => {
                                    w.active += 1;
                                    Some(item)
                                }
                                None if w.active == 0 => break,
                                None => None,
                            }
                        };
                        let Some((x, y, pinned)) = item else {
                            std::thread::yield_now();
                            continue;
                        };
                        let state = session.adopt(pinned);
                        let expand = || -> Result<_, BenchError> {
                            let (nx, ny) = (state.argument(0)?, state.argument(1)?);
                            let mut next = Vec::with_capacity(2);
                            if x + 1 < grid.width {
                                let n = session.create(succ, &[nx])?;
                                let t = session.create(pair, &[n.as_ref(), ny])?;
                                next.push((x + 1, y, session.pin(t.as_ref())));
                            }
                            if y + 1 < grid.height {
                                let n = session.create(succ, &[ny])?;
                                let t = session.create(pair, &[nx, n.as_ref()])?;
                                next.push((x, y + 1, session.pin(t.as_ref())));
                            }
                            Ok(next)
                        };
                        let next = match expand() {
                            Ok(next) => next,
                            Err(e) => {
                                let mut w = work.lock();
                                w.failed = true;
                                w.active -= 1;
                                return Err(e);
                            }
                        };
                        let mut duplicates = Vec::new();
                        {
                            let mut w = work.lock();
                            for entry in next {
                                if w.seen.insert(entry.2.as_ref().address()) {
                                    w.queue.push_back(entry);
                                } else {
                                    duplicates.push(entry);
                                }
                            }
                            w.active -= 1;
                        }
                        drop(duplicates);
                        done.push(state);
                    }
                    Ok(())
                })
            })
            .collect();
        barrier.wait();
        start = Instant::now();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let seconds = start.elapsed().as_secs_f64();
    results.into_iter().collect::<Result<(), _>>()?;

    let visits = work.into_inner().seen.len() as u64;
    let stats = lib.stats();
    Ok(Outcome {
        seconds,
        live_nodes: stats.live_nodes,
        visits,
        lock: stats.lock,
        audit_violations: stats.audit_violations + stats.lock.violations,
    })
}
