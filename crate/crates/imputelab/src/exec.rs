use imputelab_core::pipeline::Executor;
use rayon::prelude::*;

/// Parallel map on a dedicated rayon pool. Output order follows input
/// order, so results do not depend on the worker count.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `jobs = None` uses one worker per available core.
    pub fn new(jobs: Option<usize>) -> Result<Self, rayon::ThreadPoolBuildError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = jobs {
            b = b.num_threads(n.max(1));
        }
        Ok(Self { pool: b.build()? })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        for jobs in [1, 3, 8] {
            let ex = RayonExecutor::new(Some(jobs)).unwrap();
            assert_eq!(ex.map(&items, |x| x * x), items.iter().map(|x| x * x).collect::<Vec<_>>());
        }
    }
}
