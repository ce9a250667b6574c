use otpool_core::exec::Executor;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// [`Executor`] backed by a dedicated rayon pool.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `threads = 0` lets rayon pick the number of logical CPUs.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::input(format!("cannot start thread pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        // indexed collect keeps results in index order
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
