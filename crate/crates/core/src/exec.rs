//! Execution of the per-agent local solves.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuildError};

/// Runs one closure per agent, sequentially or on a dedicated thread pool.
/// Results always come back in agent-index order.
#[derive(Debug, Default)]
pub struct AgentExecutor {
    pool: Option<ThreadPool>,
}

impl AgentExecutor {
    pub fn sequential() -> Self {
        Self { pool: None }
    }

    /// `threads <= 1` runs sequentially.
    pub fn with_threads(threads: usize) -> Result<Self, ThreadPoolBuildError> {
        if threads <= 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Self { pool: Some(pool) })
    }

    pub fn threads(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    pub fn map<R, F>(&self, count: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match &self.pool {
            None => (0..count).map(f).collect(),
            Some(pool) => pool.install(|| (0..count).into_par_iter().map(f).collect()),
        }
    }
}
