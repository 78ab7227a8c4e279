use tf_bench::explore::{run_exploration_workload, Grid};
use tf_bench::{run, run_once, BenchConfig, BenchError, Scenario};
use tf_core::{Backend, Strategy};

fn cfg(scenario: Scenario, threads: usize) -> BenchConfig {
    BenchConfig {
        scenario,
        threads,
        reps: 1,
        scale: 1000,
        audit: true,
        ..BenchConfig::default()
    }
}

#[test]
fn exploration_visits_the_whole_grid_at_any_thread_count() {
    for strategy in Strategy::ALL {
        for threads in [1, 2, 5] {
            let c = BenchConfig { strategy, ..cfg(Scenario::Explore, threads) };
            let out = run_exploration_workload(&c, &Grid::DEFAULT).unwrap();
            assert_eq!(out.visits, 100_000, "{strategy} T={threads}");
            // One node per state plus the numerals 0..999.
            assert_eq!(out.live_nodes, 100_000 + 1000);
            assert_eq!(out.audit_violations, 0);
        }
    }
}

#[test]
fn odd_grid_sizes() {
    let one = run_exploration_workload(&cfg(Scenario::Explore, 3), &Grid { width: 1, height: 1 }).unwrap();
    assert_eq!(one.visits, 1);
    let thin = run_exploration_workload(&cfg(Scenario::Explore, 2), &Grid { width: 7, height: 3 }).unwrap();
    assert_eq!(thin.visits, 21);
    assert!(run_exploration_workload(&cfg(Scenario::Explore, 1), &Grid { width: 0, height: 3 }).is_err());
}

#[test]
fn lookups_leave_the_prepared_terms_only() {
    for threads in [1, 3] {
        let shared = run_once(&cfg(Scenario::LookupShared, threads), 1).unwrap();
        assert_eq!(shared.live_nodes, 400_001);
        let distinct = run_once(&cfg(Scenario::LookupDistinct, threads), 1).unwrap();
        assert_eq!(distinct.live_nodes, 400_000 + threads);
    }
}

#[test]
fn platform_backend_reaches_the_same_counts() {
    let c = BenchConfig {
        backend: Backend::PlatformRw,
        ..cfg(Scenario::CreateDistinct, 3)
    };
    assert_eq!(run_once(&c, 1).unwrap().live_nodes, 400_003);
}

#[test]
fn lock_microbench_counts_exclusive_entries() {
    // With p = 0 every iteration takes the internal mutex once.
    let c = BenchConfig {
        p_shared: 0.0,
        ..cfg(Scenario::Lock, 2)
    };
    let out = run_once(&c, 1).unwrap();
    assert_eq!(out.lock.lock_acquisitions, 2 * c.lock_iterations());
    assert_eq!(out.audit_violations, 0);
}

#[test]
fn repetitions_produce_one_row_each() {
    let c = BenchConfig { reps: 5, ..cfg(Scenario::Traverse, 2) };
    let r = run(&c).unwrap();
    let rows = r.rows();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows.iter().map(|s| s.run).collect::<Vec<_>>(), [1, 2, 3, 4, 5]);
    assert!(rows.iter().all(|s| s.scenario == "traverse" && s.threads == 2));
    assert!((r.mean() - rows.iter().map(|s| s.seconds).sum::<f64>() / 5.0).abs() < 1e-12);
}

#[test]
fn zero_threads_is_a_usage_error() {
    assert!(matches!(run_once(&cfg(Scenario::Lock, 0), 0), Err(BenchError::Usage(_))));
}
