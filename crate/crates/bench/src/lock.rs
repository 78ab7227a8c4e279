use std::sync::Barrier;
use std::time::Instant;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use tf_core::{Backend, BfConfig, BfLock, LockStats, PlatformRwLock};

use crate::{BenchConfig, Outcome};

fn thread_rng(cfg: &BenchConfig, rep: u64, thread: usize) -> SmallRng {
    SmallRng::seed_from_u64(cfg.seed ^ rep.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (thread as u64) << 32)
}

/// Every thread enters and leaves a randomly chosen section
/// `cfg.lock_iterations()` times. The random choice is part of the timed
/// loop.
pub fn run_lock_microbench(cfg: &BenchConfig, rep: u64) -> Outcome {
    let iterations = cfg.lock_iterations();
    let barrier = Barrier::new(cfg.threads + 1);
    let mut start = Instant::now();
    let (seconds, lock) = match cfg.backend {
        Backend::BusyForbidden => {
            let lock = BfLock::new(BfConfig {
                capacity: cfg.threads,
                audit: cfg.audit,
                ..BfConfig::default()
            });
            std::thread::scope(|s| {
                for t in 0..cfg.threads {
                    let (lock, barrier) = (&lock, &barrier);
                    let mut rng = thread_rng(cfg, rep, t);
                    s.spawn(move || {
                        let ctx = lock.register().expect("capacity covers every thread");
                        barrier.wait();
                        for _ in 0..iterations {
                            if rng.gen_bool(cfg.p_shared) {
                                lock.enter_shared(&ctx);
                                lock.leave_shared(&ctx);
                            } else {
                                lock.enter_exclusive(&ctx);
                                lock.leave_exclusive(&ctx);
                            }
                        }
                        lock.deregister(&ctx).expect("free after the loop");
                    });
                }
                barrier.wait();
                start = Instant::now();
            });
            (start.elapsed().as_secs_f64(), lock.stats())
        }
        Backend::PlatformRw => {
            let lock = PlatformRwLock::default();
            std::thread::scope(|s| {
                for t in 0..cfg.threads {
                    let (lock, barrier) = (&lock, &barrier);
                    let mut rng = thread_rng(cfg, rep, t);
                    s.spawn(move || {
                        barrier.wait();
                        for _ in 0..iterations {
                            // SAFETY: each leave matches the enter just before it.
                            if rng.gen_bool(cfg.p_shared) {
                                lock.enter_shared();
                                unsafe { lock.leave_shared() };
                            } else {
                                lock.enter_exclusive();
                                unsafe { lock.leave_exclusive() };
                            }
                        }
                    });
                }
                barrier.wait();
                start = Instant::now();
            });
            (start.elapsed().as_secs_f64(), LockStats::default())
        }
    };
    Outcome {
        seconds,
        lock,
        audit_violations: lock.violations,
        ..Outcome::default()
    }
}
