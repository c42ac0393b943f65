use std::time::{Duration, Instant};

use rayon::prelude::*;
use sfedca_core::fed::Executor;

/// Runs client jobs on a rayon pool. Results come back in input order,
/// so a run's history does not depend on the thread count.
#[derive(Debug)]
pub struct Rayon {
    pool: rayon::ThreadPool,
    origin: Instant,
}

impl Rayon {
    /// A pool with `threads` workers; 0 picks one per core.
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Self { pool, origin: Instant::now() })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Rayon {
    fn map<T, F>(&self, ids: &[usize], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| ids.par_iter().map(|&i| job(i)).collect())
    }

    fn now(&self) -> Option<Duration> {
        Some(self.origin.elapsed())
    }
}

/// Serial execution with a wall clock.
#[derive(Debug)]
pub struct Timed {
    origin: Instant,
}

impl Default for Timed {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Executor for Timed {
    fn map<T, F>(&self, ids: &[usize], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        ids.iter().map(|&i| job(i)).collect()
    }

    fn now(&self) -> Option<Duration> {
        Some(self.origin.elapsed())
    }
}
