//! One test per acceptance criterion. Each prints a single PASS/FAIL line
//! straight to stdout, so the lines show up without `--nocapture`.
//! The tests take a common lock: the timing criteria must not share the
//! processor with the stress run.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use clap::Parser;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use tf_bench::{run, run_once, BenchConfig, Scenario};
use tf_check::cli::{self, Args, Report};
use tf_core::term::script::{self, ScriptOp};
use tf_core::{Backend, BfConfig, GcPolicy, LibraryConfig, Rate, Strategy, Term, TermLibrary, TermRef};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(criterion: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{tag} criterion {criterion}: {detail}");
    let _ = out.flush();
}

fn check(args: &str) -> (Report, f64) {
    let args = Args::parse_from(std::iter::once("tf-check").chain(args.split_whitespace()));
    let start = Instant::now();
    let report = cli::run(&args).unwrap();
    (report, start.elapsed().as_secs_f64())
}

const LOCK_IDS: [&str; 6] = ["bf1", "bf2", "bf3", "bf4", "bf5", "bf6"];

fn holds(report: &Report, id: &str) -> bool {
    report.verdicts.iter().any(|v| v.property == id && v.holds)
}

#[test]
fn criterion_1_lock_properties_at_two_threads() {
    let _g = serial();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for model in ["bf-spec", "bf-impl"] {
        let (report, secs) = check(&format!("--model {model} --threads 2 --check all"));
        let ids: Vec<_> = LOCK_IDS.iter().filter(|id| !holds(&report, id)).collect();
        if !ids.is_empty() || secs >= 60.0 {
            failures.push(format!("{model}: failing {ids:?}, {secs:.2}s"));
        }
        details.push(format!("{model} {} states {secs:.2}s", report.states));
    }
    verdict("1", failures.is_empty(), &format!("bf1-bf6 hold; {}", details.join(", ")));
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn criterion_2_equivalence() {
    let _g = serial();
    let mut ok = true;
    let mut details = Vec::new();
    for n in 1..=2 {
        let (report, secs) = check(&format!("--model bf-impl --threads {n} --check equivalence"));
        let pass = holds(&report, "equivalence") && secs < 300.0;
        ok &= pass;
        details.push(format!("n={n} {} ({secs:.2}s)", if pass { "equivalent" } else { "NOT equivalent" }));
    }
    for n in 1..=2 {
        let (report, _) = check(&format!("--model bf-impl --threads {n} --check equivalence --mutant no-sometimes"));
        let detected = !holds(&report, "equivalence");
        ok &= detected;
        details.push(format!("no-sometimes n={n} {}", if detected { "distinguished" } else { "NOT distinguished" }));
    }
    verdict("2", ok, &details.join(", "));
    assert!(ok);
}

#[test]
fn criterion_3_seeded_bugs() {
    let _g = serial();
    let mut ok = true;
    let mut details = Vec::new();
    for mutant in ["skip-busy-recheck", "no-forbidden-reset", "no-retry-loop"] {
        let found = (1..=3).find_map(|n| {
            let (report, _) = check(&format!("--model bf-impl --threads {n} --check all --mutant {mutant}"));
            report
                .verdicts
                .iter()
                .find(|v| !v.holds && !v.trace.is_empty())
                .map(|v| format!("{mutant}: {} fails at n={n} ({}-step trace)", v.property, v.trace.len()))
        });
        ok &= found.is_some();
        details.push(found.unwrap_or_else(|| format!("{mutant}: undetected")));
    }
    verdict("3", ok, &details.join(", "));
    assert!(ok);
}

#[test]
fn criterion_4_term_library_model() {
    let _g = serial();
    let (report, secs) = check("--model termlib --threads 2 --terms 2 --addresses 3");
    let failing: Vec<_> = report.verdicts.iter().filter(|v| !v.holds).map(|v| v.property).collect();
    let ok = report.verdicts.len() == 4 && failing.is_empty();
    verdict(
        "4",
        ok,
        &format!("(2,2,3): {} states, failing {failing:?}, {secs:.1}s; (3,3,4) is the ignored test", report.states),
    );
    assert!(ok);
}

#[test]
#[ignore = "explores several hundred million states; needs far more memory than a desk machine"]
fn criterion_4_paper_instance() {
    let _g = serial();
    let (report, secs) = check("--model termlib --threads 3 --terms 3 --addresses 4 --state-cap 4000000000");
    let ok = report.passed();
    verdict("4 (3,3,4)", ok, &format!("{} states, {secs:.0}s", report.states));
    assert!(ok);
}

/// Structural equality that never compares the addresses of the two terms
/// directly; visited pairs are memoised so shared subterms stay cheap.
fn structurally_equal(a: TermRef<'_>, b: TermRef<'_>) -> bool {
    let mut seen = HashSet::new();
    let mut stack = vec![(a, b)];
    while let Some((x, y)) = stack.pop() {
        if !seen.insert((x.address(), y.address())) {
            continue;
        }
        if x.function() != y.function() {
            return false;
        }
        stack.extend(x.arguments().zip(y.arguments()));
    }
    true
}

/// A hash of the term's structure, memoised per node.
fn structure_hash(t: TermRef<'_>, memo: &mut HashMap<usize, u64>) -> u64 {
    if let Some(&h) = memo.get(&t.address()) {
        return h;
    }
    let mut h = u64::from(t.function().id()).wrapping_mul(0x100_0000_01b3) ^ t.arity() as u64;
    for a in t.arguments() {
        h = (h.rotate_left(5) ^ structure_hash(a, memo)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }
    memo.insert(t.address(), h);
    h
}

#[derive(Default)]
struct StressCounts {
    hc_checks: AtomicU64,
    hc_failures: AtomicU64,
    snapshots: AtomicU64,
    stable_failures: AtomicU64,
    gc_checks: AtomicU64,
    gc_failures: AtomicU64,
    ops: AtomicU64,
}

const MAX_DEPTH: usize = 12;

fn stress_worker(lib: &TermLibrary, seed: u64, deadline: Instant, counts: &StressCounts) {
    let s = lib.session().unwrap();
    let mut rng = SmallRng::seed_from_u64(seed);
    let consts: Vec<_> = (0..4).map(|i| lib.declare_symbol(&format!("c{i}"), 0)).collect();
    let g = lib.declare_symbol("g", 1);
    let f = lib.declare_symbol("f", 2);
    let mut pool: Vec<(Term<'_>, usize)> = Vec::new();
    let mut snapshots: Vec<(Term<'_>, usize, u64)> = Vec::new();
    let bump = |c: &AtomicU64| c.fetch_add(1, Ordering::Relaxed);
    let mut local_hc = 0u64;
    let mut local_snap = 0u64;

    while Instant::now() < deadline || local_hc < 10_000 / 8 + 1 || local_snap < 1000 / 8 + 1 {
        bump(&counts.ops);
        match rng.gen_range(0..100) {
            0..=39 => {
                let pick = |rng: &mut SmallRng| rng.gen_range(0..pool.len());
                let (t, d) = if pool.is_empty() || rng.gen_bool(0.2) {
                    (s.constant(consts[rng.gen_range(0..4)]).unwrap(), 0)
                } else if rng.gen_bool(0.5) {
                    let (a, da) = &pool[pick(&mut rng)];
                    if *da >= MAX_DEPTH {
                        continue;
                    }
                    (s.create(g, &[a.as_ref()]).unwrap(), da + 1)
                } else {
                    let (a, da) = &pool[pick(&mut rng)];
                    let (b, db) = &pool[pick(&mut rng)];
                    if (*da).max(*db) >= MAX_DEPTH {
                        continue;
                    }
                    (s.create(f, &[a.as_ref(), b.as_ref()]).unwrap(), da.max(db) + 1)
                };
                pool.push((t, d));
            }
            40..=54 if !pool.is_empty() => {
                let i = rng.gen_range(0..pool.len());
                let copy = s.copy(pool[i].0.as_ref());
                let d = pool[i].1;
                pool.push((copy, d));
            }
            55..=79 if !pool.is_empty() => {
                let i = rng.gen_range(0..pool.len());
                s.destroy(pool.swap_remove(i).0);
            }
            80..=91 if pool.len() >= 2 => {
                // HC-1: equal addresses exactly for equal structures, and
                // rebuilding a term from its parts finds the same node.
                let a = &pool[rng.gen_range(0..pool.len())].0;
                let b = &pool[rng.gen_range(0..pool.len())].0;
                let mut ok = (a.address() == b.address()) == structurally_equal(a.as_ref(), b.as_ref());
                let args: Vec<_> = a.as_ref().arguments().collect();
                ok &= s.create(a.function(), &args).unwrap().address() == a.address();
                local_hc += 1;
                bump(&counts.hc_checks);
                if !ok {
                    bump(&counts.hc_failures);
                }
            }
            92..=96 if !pool.is_empty() => {
                // STABLE-1: a held term keeps its address and structure.
                let t = &pool[rng.gen_range(0..pool.len())].0;
                let h = structure_hash(t.as_ref(), &mut HashMap::new());
                snapshots.push((t.clone(), t.address(), h));
                if snapshots.len() > 16 {
                    let (t, addr, h) = snapshots.swap_remove(rng.gen_range(0..snapshots.len()));
                    local_snap += 1;
                    bump(&counts.snapshots);
                    if t.address() != addr || structure_hash(t.as_ref(), &mut HashMap::new()) != h {
                        bump(&counts.stable_failures);
                    }
                }
            }
            97..=99 => {
                // GC-SOUND: after a collection every held term is still in
                // the table and protected.
                s.collect_garbage();
                let held = pool.iter().map(|(t, _)| t).chain(snapshots.iter().map(|(t, ..)| t));
                let lost = s.with_exclusive(|v| {
                    v.audit() + held.filter(|t| !v.contains(t.address()) || !v.is_protected(t.address())).count()
                });
                bump(&counts.gc_checks);
                if lost > 0 {
                    bump(&counts.gc_failures);
                }
            }
            _ => {}
        }
        if pool.len() > 64 {
            let i = rng.gen_range(0..pool.len());
            s.destroy(pool.swap_remove(i).0);
        }
    }
}

#[test]
fn criterion_5_stress() {
    let _g = serial();
    let secs: u64 = std::env::var("TF_STRESS_SECS").ok().and_then(|v| v.parse().ok()).unwrap_or(60);
    let mut ok = true;
    let mut details = Vec::new();
    for strategy in Strategy::ALL {
        let lib = TermLibrary::new(LibraryConfig {
            strategy,
            backend: Backend::BusyForbidden,
            lock: BfConfig {
                enter_sometimes: Rate::Every(std::num::NonZeroU32::new(7).unwrap()),
                leave_sometimes: Rate::Every(std::num::NonZeroU32::new(5).unwrap()),
                ..BfConfig::default()
            },
            gc: GcPolicy {
                automatic: true,
                threshold: 256,
                fraction: 0.5,
            },
            audit: true,
            ..LibraryConfig::default()
        });
        let counts = StressCounts::default();
        let deadline = Instant::now() + Duration::from_secs(secs);
        std::thread::scope(|scope| {
            for t in 0..8 {
                let (lib, counts) = (&lib, &counts);
                scope.spawn(move || stress_worker(lib, 1000 + t, deadline, counts));
            }
        });
        // GC-COMPLETE: with every handle gone a collection leaves nothing.
        let s = lib.session().unwrap();
        s.collect_garbage();
        let leftover = s.with_exclusive(|v| v.audit_complete() + v.live_nodes());
        drop(s);

        let stats = lib.stats();
        let get = |c: &AtomicU64| c.load(Ordering::Relaxed);
        let pass = stats.lock.violations == 0
            && stats.audit_violations == 0
            && get(&counts.hc_checks) >= 10_000
            && get(&counts.hc_failures) == 0
            && get(&counts.snapshots) >= 1000
            && get(&counts.stable_failures) == 0
            && get(&counts.gc_checks) > 0
            && get(&counts.gc_failures) == 0
            && leftover == 0;
        ok &= pass;
        details.push(format!(
            "{strategy}: {} ops, mutex violations {}, HC-1 {}/{} bad, STABLE-1 {}/{} bad, GC audits {} + {}/{} bad, {} collections, leftover {leftover}",
            get(&counts.ops),
            stats.lock.violations,
            get(&counts.hc_failures),
            get(&counts.hc_checks),
            get(&counts.stable_failures),
            get(&counts.snapshots),
            stats.audit_violations,
            get(&counts.gc_failures),
            get(&counts.gc_checks),
            stats.collections,
        ));
    }
    verdict("5", ok, &format!("{secs}s per strategy, 8 threads; {}", details.join("; ")));
    assert!(ok);
}

#[test]
fn criterion_6_exact_node_counts() {
    let _g = serial();
    let mut bad = Vec::new();
    for strategy in Strategy::ALL {
        for threads in [1, 3, 8] {
            let cfg = BenchConfig {
                threads,
                strategy,
                ..BenchConfig::default()
            };
            let shared = run_once(&BenchConfig { scenario: Scenario::CreateShared, ..cfg }, 1).unwrap();
            if shared.live_nodes != 400_001 {
                bad.push(format!("create-shared {strategy} T={threads}: {}", shared.live_nodes));
            }
            let distinct = run_once(&BenchConfig { scenario: Scenario::CreateDistinct, ..cfg }, 1).unwrap();
            if distinct.live_nodes != 400_000 + threads {
                bad.push(format!("create-distinct {strategy} T={threads}: {}", distinct.live_nodes));
            }
        }
    }
    let traverse = run_once(
        &BenchConfig {
            scenario: Scenario::Traverse,
            threads: 2,
            scale: 500,
            ..BenchConfig::default()
        },
        1,
    )
    .unwrap();
    if traverse.visits != (1 << 21) - 1 {
        bad.push(format!("traverse: {} visits", traverse.visits));
    }
    verdict(
        "6",
        bad.is_empty(),
        &format!("400001 shared, 400000+T distinct, {} visits per traversal; mismatches {bad:?}", traverse.visits),
    );
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn criterion_7_performance_ratios() {
    let _g = serial();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());

    // (iii) holds on any machine: no internal lock in a pure-shared run.
    let pure = run_once(
        &BenchConfig {
            scenario: Scenario::Lock,
            threads: 4,
            p_shared: 1.0,
            scale: 1000,
            ..BenchConfig::default()
        },
        1,
    )
    .unwrap();
    let fast_path = pure.lock.lock_acquisitions == 0;
    verdict(
        "7(iii)",
        fast_path,
        &format!("{} internal-lock acquisitions in a pure-shared run", pure.lock.lock_acquisitions),
    );

    let lock = |backend| {
        run(&BenchConfig {
            scenario: Scenario::Lock,
            threads: 4,
            backend,
            reps: 3,
            ..BenchConfig::default()
        })
        .unwrap()
        .mean()
    };
    let (bf, rw) = (lock(Backend::BusyForbidden), lock(Backend::PlatformRw));
    let lookup = |threads| {
        run(&BenchConfig {
            scenario: Scenario::LookupShared,
            threads,
            reps: 3,
            ..BenchConfig::default()
        })
        .unwrap()
        .mean()
    };
    let (one, four) = (lookup(1), lookup(4));
    let machine = if cores >= 4 {
        String::new()
    } else {
        format!("; precondition unmet: {cores} core(s) available, at least 4 required")
    };
    let lock_ok = cores >= 4 && bf <= rw / 3.0;
    let lookup_ok = cores >= 4 && four <= 0.6 * one;
    verdict(
        "7(i)",
        lock_ok,
        &format!("bf {bf:.3}s vs platform-rw {rw:.3}s at 4 threads, ratio {:.2} (gate <= 0.33){machine}", bf / rw),
    );
    verdict(
        "7(ii)",
        lookup_ok,
        &format!("lookup-shared 4 threads {four:.3}s vs 1 thread {one:.3}s, ratio {:.2} (gate <= 0.6){machine}", four / one),
    );
    assert!(fast_path && lock_ok && lookup_ok);
}

fn random_script(seed: u64) -> Vec<ScriptOp> {
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut ops = Vec::new();
    let mut live: Vec<usize> = Vec::new();
    let mut handles = 0;
    for _ in 0..rng.gen_range(20..200) {
        match rng.gen_range(0..10) {
            0..=5 => {
                let arity = if live.is_empty() { 0 } else { rng.gen_range(0..=2) };
                let args: Vec<usize> = (0..arity).map(|_| live[rng.gen_range(0..live.len())]).collect();
                let symbol = match arity {
                    0 => format!("c{}", rng.gen_range(0..3)),
                    1 => "g".to_string(),
                    _ => format!("f{}", rng.gen_range(0..2)),
                };
                ops.push(ScriptOp::Create { symbol, args });
                live.push(handles);
                handles += 1;
            }
            6..=8 if !live.is_empty() => {
                let h = live.swap_remove(rng.gen_range(0..live.len()));
                ops.push(ScriptOp::Destroy(h));
            }
            _ => ops.push(ScriptOp::Gc),
        }
    }
    ops
}

/// Distinct structures reachable from the handles a script never destroys.
fn expected_survivors(ops: &[ScriptOp]) -> usize {
    #[derive(Clone, PartialEq, Eq, Hash)]
    enum Shape {
        Node(String, Vec<usize>),
    }
    let mut ids: HashMap<Shape, usize> = HashMap::new();
    let mut kids: Vec<Vec<usize>> = Vec::new();
    let mut handle_to_id = Vec::new();
    let mut alive = Vec::new();
    for op in ops {
        match op {
            ScriptOp::Create { symbol, args } => {
                let args: Vec<usize> = args.iter().map(|&h| handle_to_id[h]).collect();
                let next = ids.len();
                let id = *ids.entry(Shape::Node(symbol.clone(), args.clone())).or_insert(next);
                if id == kids.len() {
                    kids.push(args);
                }
                handle_to_id.push(id);
                alive.push(true);
            }
            ScriptOp::Destroy(h) => alive[*h] = false,
            ScriptOp::Gc => {}
        }
    }
    let mut reach = HashSet::new();
    let mut stack: Vec<usize> = handle_to_id.iter().zip(&alive).filter(|(_, &a)| a).map(|(&i, _)| i).collect();
    while let Some(i) = stack.pop() {
        if reach.insert(i) {
            stack.extend(&kids[i]);
        }
    }
    reach.len()
}

#[test]
fn criterion_8_strategy_equivalence() {
    let _g = serial();
    let mut mismatches = Vec::new();
    for seed in 0..100 {
        let ops = random_script(seed);
        let census = |strategy| {
            let lib = TermLibrary::new(LibraryConfig {
                audit: true,
                ..LibraryConfig::with_strategy(strategy)
            });
            script::run(&lib, &ops).unwrap()
        };
        let rc = census(Strategy::RefCount);
        let ps = census(Strategy::ProtectionSet);
        if rc != ps || rc.len() != expected_survivors(&ops) {
            mismatches.push(seed);
        }
    }
    verdict(
        "8",
        mismatches.is_empty(),
        &format!("100 seeded scripts, post-GC census mismatches at seeds {mismatches:?}"),
    );
    assert!(mismatches.is_empty());
}
