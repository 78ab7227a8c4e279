use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Barrier;
use std::time::Instant;

use tf_core::{FunctionSymbol, GcPolicy, LibraryConfig, Session, Term, TermLibrary, TermRef};

use crate::{share, BenchConfig, BenchError, Outcome, Scenario, TERM_DEPTH, TRAVERSE_DEPTH};

pub fn library_config(cfg: &BenchConfig) -> LibraryConfig {
    LibraryConfig {
        strategy: cfg.strategy,
        backend: cfg.backend,
        // The timed parts never collect; a collection at the end checks
        // the node count.
        gc: GcPolicy {
            automatic: false,
            ..GcPolicy::default()
        },
        audit: cfg.audit,
        ..LibraryConfig::default()
    }
}

/// t_0 = c, t_{i+1} = f(t_i, t_i).
pub fn chain<'s>(
    session: &'s Session<'_>,
    c: FunctionSymbol,
    f: FunctionSymbol,
    depth: usize,
) -> Result<Term<'s>, BenchError> {
    let mut t = session.constant(c)?;
    for _ in 0..depth {
        t = session.create(f, &[t.as_ref(), t.as_ref()])?;
    }
    Ok(t)
}

/// Breadth-first traversal that visits shared subterms once per occurrence.
pub fn traverse(term: TermRef<'_>) -> u64 {
    let mut queue = VecDeque::from([term]);
    let mut visits = 0;
    while let Some(t) = queue.pop_front() {
        visits += 1;
        queue.extend(t.arguments());
    }
    visits
}

/// Runs one of the five term scenarios. Every thread holds its final term
/// until a collection has counted the live nodes.
pub fn run_term_benchmark(cfg: &BenchConfig, scenario: Scenario) -> Result<Outcome, BenchError> {
    let threads = cfg.threads;
    if threads > tf_core::BfConfig::default().capacity {
        return Err(BenchError::Usage(format!("at most {} threads", tf_core::BfConfig::default().capacity)));
    }
    let lib = TermLibrary::new(library_config(cfg));
    let f = lib.declare_symbol("f", 2);
    let distinct = matches!(scenario, Scenario::CreateDistinct | Scenario::LookupDistinct);
    let instances = cfg.instances();
    let barrier = Barrier::new(threads + 1);
    let live = AtomicUsize::new(0);
    let visits = AtomicU64::new(0);
    let mut start = Instant::now();
    let mut seconds = 0.0;

    std::thread::scope(|s| {
        for t in 0..threads {
            let (lib, barrier, live, visits) = (&lib, &barrier, &live, &visits);
            s.spawn(move || {
                let session = lib.session().expect("thread count checked against capacity");
                let c = lib.declare_symbol(&if distinct { format!("c{t}") } else { "c".into() }, 0);
                let depth = match scenario {
                    Scenario::Traverse => TRAVERSE_DEPTH,
                    _ if distinct => share(TERM_DEPTH as u64, threads, t) as usize,
                    _ => TERM_DEPTH,
                };
                let build = || chain(&session, c, f, depth).expect("no node limit is set");
                let prepared = match scenario {
                    Scenario::CreateShared | Scenario::CreateDistinct => None,
                    _ => Some(build()),
                };
                let repeat = share(instances, threads, t);

                barrier.wait();
                let held = match scenario {
                    Scenario::CreateShared | Scenario::CreateDistinct => build(),
                    Scenario::Traverse => {
                        let term = prepared.expect("prepared above");
                        for _ in 0..repeat {
                            visits.store(traverse(term.as_ref()), Ordering::Relaxed);
                        }
                        term
                    }
                    _ => {
                        for _ in 0..repeat {
                            drop(build());
                        }
                        prepared.expect("prepared above")
                    }
                };
                barrier.wait();

                if t == 0 {
                    session.collect_garbage();
                    live.store(lib.live_nodes(), Ordering::SeqCst);
                }
                barrier.wait();
                drop(held);
            });
        }
        barrier.wait();
        start = Instant::now();
        barrier.wait();
        seconds = start.elapsed().as_secs_f64();
        barrier.wait();
    });

    let stats = lib.stats();
    Ok(Outcome {
        seconds,
        live_nodes: live.into_inner(),
        visits: visits.into_inner(),
        lock: stats.lock,
        audit_violations: stats.audit_violations + stats.lock.violations,
    })
}
