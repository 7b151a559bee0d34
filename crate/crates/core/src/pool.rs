use rayon::prelude::*;

/// Maps `f` over `items` with at most `workers` calls in flight, preserving input order.
pub fn bounded_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let workers = workers.max(1);
    if workers == 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("could not start a {workers}-thread pool ({e}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}
