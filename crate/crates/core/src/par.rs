//! Ordered data-parallel maps.
//!
//! With the `parallel` feature, work is spread over a rayon pool sized by the
//! caller's worker count; without it (or with one worker) the same closure runs
//! sequentially. Results always come back in input order, so any fold the caller
//! performs afterwards is independent of the worker count.

/// Number of worker threads; `0` means "all available cores".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[derive(Default)]
pub struct Workers(pub usize);


impl Workers {
    pub const SEQUENTIAL: Workers = Workers(1);

    pub fn resolved(self) -> usize {
        if self.0 > 0 {
            self.0
        } else {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        }
    }
}

#[cfg(feature = "parallel")]
mod pool {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};

    use rayon::{ThreadPool, ThreadPoolBuilder};

    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();

    pub fn get(threads: usize) -> Arc<ThreadPool> {
        let pools = POOLS.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = pools.lock().expect("pool registry poisoned");
        guard
            .entry(threads)
            .or_insert_with(|| {
                Arc::new(
                    ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build()
                        .expect("could not spawn threads"),
                )
            })
            .clone()
    }
}

/// `items.iter().map(f).collect()`, possibly in parallel, preserving order.
pub fn map_ordered<T, R, F>(items: &[T], workers: Workers, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        let threads = workers.resolved();
        if threads > 1 && items.len() > 1 {
            use rayon::prelude::*;
            return pool::get(threads).install(|| items.par_iter().map(&f).collect());
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    items.iter().map(f).collect()
}

/// Ordered map over `0..n`.
pub fn map_range<R, F>(n: usize, workers: Workers, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let idx: Vec<usize> = (0..n).collect();
    map_ordered(&idx, workers, |&i| f(i))
}
