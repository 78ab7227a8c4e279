use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tf_bench::{run, write_csv, BenchConfig, BenchError, Scenario};
use tf_core::{Backend, Strategy};

#[derive(Debug, Parser)]
#[command(name = "tf-bench", about = "Lock and term library benchmarks")]
struct Args {
    /// lock, create-shared, create-distinct, lookup-shared, lookup-distinct,
    /// traverse or explore.
    #[arg(long)]
    scenario: String,
    /// Comma-separated thread counts.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads: Vec<usize>,
    /// bf or platform-rw.
    #[arg(long, default_value = "bf")]
    backend: String,
    /// refcount or protection-set.
    #[arg(long, default_value = "protection-set")]
    strategy: String,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Divides the repetition counts of the lock and lookup/traverse runs.
    #[arg(long, default_value_t = 100)]
    scale: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Probability of the shared section in the lock scenario.
    #[arg(long, default_value_t = 0.9999)]
    p_shared: f64,
    /// Audit lock occupancy and table invariants while running.
    #[arg(long)]
    audit: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn config(args: &Args) -> Result<BenchConfig, BenchError> {
    let usage = |e: &dyn std::fmt::Display| BenchError::Usage(e.to_string());
    if !(0.0..=1.0).contains(&args.p_shared) {
        return Err(BenchError::Usage("--p-shared must lie in [0, 1]".into()));
    }
    if args.scale == 0 {
        return Err(BenchError::Usage("--scale must be at least 1".into()));
    }
    Ok(BenchConfig {
        scenario: args.scenario.parse()?,
        threads: 1,
        backend: args.backend.parse::<Backend>().map_err(|e| usage(&e))?,
        strategy: args.strategy.parse::<Strategy>().map_err(|e| usage(&e))?,
        reps: args.reps,
        scale: args.scale,
        seed: args.seed,
        p_shared: args.p_shared,
        audit: args.audit,
    })
}

fn main_inner(args: &Args) -> Result<(), BenchError> {
    let base = config(args)?;
    let mut rows = Vec::new();
    println!("scenario,backend,strategy,threads,mean_seconds,detail");
    for &threads in &args.threads {
        let cfg = BenchConfig { threads, ..base };
        let result = run(&cfg)?;
        let last = result.runs.last().copied().unwrap_or_default();
        let detail = match cfg.scenario {
            Scenario::Lock => format!("internal_lock_acquisitions={}", last.lock.lock_acquisitions),
            Scenario::Traverse => format!("visits_per_traversal={}", last.visits),
            Scenario::Explore => format!("states={} states_per_second={:.0}", last.visits, last.visits as f64 / last.seconds),
            _ => format!("live_nodes={}", last.live_nodes),
        };
        println!(
            "{},{},{},{},{:.6},{}",
            cfg.scenario,
            cfg.backend,
            cfg.strategy,
            threads,
            result.mean(),
            detail
        );
        if result.runs.iter().any(|r| r.audit_violations > 0) {
            eprintln!("tf-bench: audit reported violations");
        }
        rows.extend(result.rows());
    }
    if let Some(path) = &args.csv {
        write_csv(&rows, BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tf-bench: {e}");
            ExitCode::from(if matches!(e, BenchError::Usage(_)) { 2 } else { 1 })
        }
    }
}
