use fluxgrad_core::Executor;
use rayon::prelude::*;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FLUXGRAD_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("{THREADS_ENV} must be a positive integer, got {0:?}")]
    BadThreadCount(String),
    #[error(transparent)]
    Build(#[from] rayon::ThreadPoolBuildError),
}

/// Rayon-backed [`Executor`]. Results come back in index order, and every
/// core routine reduces in that order, so outputs do not depend on the
/// worker count.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    pub fn new(threads: usize) -> Result<Self, PoolError> {
        if threads == 0 {
            return Err(PoolError::BadThreadCount("0".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()?;
        Ok(Pool { pool })
    }

    /// Uses `FLUXGRAD_THREADS` when set, otherwise rayon's default.
    pub fn from_env() -> Result<Self, PoolError> {
        match std::env::var(THREADS_ENV) {
            Ok(raw) => match raw.trim().parse::<usize>() {
                Ok(n) if n > 0 => Pool::new(n),
                _ => Err(PoolError::BadThreadCount(raw)),
            },
            Err(_) => Ok(Pool {
                pool: rayon::ThreadPoolBuilder::new().build()?,
            }),
        }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..count).into_par_iter().map(f).collect())
    }
}
