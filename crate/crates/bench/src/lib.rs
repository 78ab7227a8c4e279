//! Benchmarks for the busy-forbidden lock and the term library: the lock
//! microbenchmark, five term scenarios and a parallel exploration workload.

pub mod explore;
pub mod lock;
pub mod report;
pub mod terms;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;
use tf_core::{Backend, LockStats, Strategy, TermError};

pub use report::{read_csv, write_csv, Sample};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Lock,
    CreateShared,
    CreateDistinct,
    LookupShared,
    LookupDistinct,
    Traverse,
    Explore,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Lock,
        Scenario::CreateShared,
        Scenario::CreateDistinct,
        Scenario::LookupShared,
        Scenario::LookupDistinct,
        Scenario::Traverse,
        Scenario::Explore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Lock => "lock",
            Scenario::CreateShared => "create-shared",
            Scenario::CreateDistinct => "create-distinct",
            Scenario::LookupShared => "lookup-shared",
            Scenario::LookupDistinct => "lookup-distinct",
            Scenario::Traverse => "traverse",
            Scenario::Explore => "explore",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| BenchError::Usage(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub scenario: Scenario,
    pub threads: usize,
    pub backend: Backend,
    pub strategy: Strategy,
    /// Timed repetitions; one untimed warm-up run comes first.
    pub reps: usize,
    /// Divides every repetition count taken from the original experiments.
    pub scale: u64,
    pub seed: u64,
    /// Probability of picking the shared section in the lock microbenchmark.
    pub p_shared: f64,
    /// Run the term library with its audits on.
    pub audit: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scenario: Scenario::CreateShared,
            threads: 1,
            backend: Backend::BusyForbidden,
            strategy: Strategy::ProtectionSet,
            reps: 5,
            scale: 100,
            seed: 42,
            p_shared: 0.9999,
            audit: false,
        }
    }
}

/// Enter/leave pairs per thread in the lock microbenchmark before scaling.
pub const LOCK_ITERATIONS: u64 = 1_000_000_000;
/// Depth of the created terms: t_400000.
pub const TERM_DEPTH: usize = 400_000;
/// Instances (lookup scenarios) or traversals, divided over the threads.
pub const INSTANCES: u64 = 1000;
/// Depth of the traversed term.
pub const TRAVERSE_DEPTH: usize = 20;

/// Part `index` of `total` split over `parts` as evenly as possible.
pub fn share(total: u64, parts: usize, index: usize) -> u64 {
    let parts = parts as u64;
    let index = index as u64;
    total / parts + u64::from(index < total % parts)
}

impl BenchConfig {
    pub fn lock_iterations(&self) -> u64 {
        (LOCK_ITERATIONS / self.scale.max(1)).max(1)
    }

    pub fn instances(&self) -> u64 {
        (INSTANCES / self.scale.max(1)).max(1)
    }
}

/// What one timed run measured besides its wall clock time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Outcome {
    pub seconds: f64,
    /// Live nodes after a collection at the end of the timed part.
    pub live_nodes: usize,
    /// Nodes visited by each traversal, or states explored.
    pub visits: u64,
    pub lock: LockStats,
    pub audit_violations: u64,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub runs: Vec<Outcome>,
}

impl BenchResult {
    pub fn samples(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.seconds).collect()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.samples())
    }

    pub fn rows(&self) -> Vec<Sample> {
        let c = &self.config;
        self.runs
            .iter()
            .enumerate()
            .map(|(i, r)| Sample {
                scenario: c.scenario.to_string(),
                backend: c.backend.to_string(),
                strategy: c.strategy.to_string(),
                threads: c.threads,
                run: i + 1,
                seconds: r.seconds,
            })
            .collect()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One run of the configured scenario.
pub fn run_once(cfg: &BenchConfig, rep: u64) -> Result<Outcome, BenchError> {
    if cfg.threads == 0 {
        return Err(BenchError::Usage("--threads must be at least 1".into()));
    }
    match cfg.scenario {
        Scenario::Lock => Ok(lock::run_lock_microbench(cfg, rep)),
        Scenario::Explore => explore::run_exploration_workload(cfg, &explore::Grid::DEFAULT),
        s => terms::run_term_benchmark(cfg, s),
    }
}

/// One warm-up run followed by `reps` timed runs.
pub fn run(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    run_once(cfg, 0)?;
    let runs = (1..=cfg.reps as u64).map(|rep| run_once(cfg, rep)).collect::<Result<_, _>>()?;
    Ok(BenchResult { config: *cfg, runs })
}
