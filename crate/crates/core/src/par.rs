//! Worker pool shared by column-parallel scans.
//!
//! All parallel work in this crate is per-column and order-preserving, so
//! results are identical for any worker count. `workers <= 1` bypasses rayon
//! entirely; cross-validation forces that path inside parallel folds to avoid
//! nested parallelism.

use rayon::prelude::*;

pub struct Pool {
    inner: Option<rayon::ThreadPool>,
}

impl Pool {
    pub fn new(workers: usize) -> Pool {
        let inner = if workers > 1 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .ok()
        } else {
            None
        };
        Pool { inner }
    }

    pub fn serial() -> Pool {
        Pool { inner: None }
    }

    pub fn workers(&self) -> usize {
        self.inner.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// Map `f` over `items`, preserving order.
    pub fn map<T, R>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R>
    where
        T: Sync,
        R: Send,
    {
        match &self.inner {
            None => items.iter().map(f).collect(),
            Some(pool) => pool.install(|| items.par_iter().map(f).collect()),
        }
    }
}
