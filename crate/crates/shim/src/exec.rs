//! Execution strategy for embarrassingly parallel batches (experiment
//! trials, per-pattern inference).
//!
//! With the `parallel` feature (on by default) [`par_map`] fans work out
//! over a rayon pool; without it the same call runs sequentially, so callers
//! never branch on the feature themselves.  Results keep input order either
//! way, which the deterministic-output guarantees rely on.  [`seq_map`] is
//! always sequential, kept distinct so benchmarks can compare the two
//! honestly under the same binary.

/// Order-preserving map, parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

/// Order-preserving map, parallel when the `parallel` feature is enabled.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Always-sequential map with the same signature as [`par_map`].
pub fn seq_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Caps the worker-thread count.  `None` leaves the default (one thread per
/// core).  Must be called before the first parallel batch; later calls are
/// ignored.  A no-op without the `parallel` feature.
pub fn configure_threads(jobs: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(jobs) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_maps_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let par = par_map(items.clone(), |x| x * x);
        let seq = seq_map(items, |x| x * x);
        assert_eq!(par, seq);
        assert_eq!(par[10], 100);
    }
}
