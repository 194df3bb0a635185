//! Order-preserving job fan-out. With the `parallel` feature, jobs run on a
//! dedicated rayon pool of the requested size; otherwise (or with one
//! worker) they run sequentially on the calling thread.

/// Number of workers used when the caller does not pick one.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Evaluates `job(i)` for `i in 0..count` and returns results in index order.
pub fn map_indexed<R, F>(count: usize, workers: usize, job: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if workers <= 1 || count <= 1 {
        return (0..count).map(job).collect();
    }
    parallel_map(count, workers, job)
}

#[cfg(feature = "parallel")]
fn parallel_map<R, F>(count: usize, workers: usize, job: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&job).collect()),
        Err(e) => {
            log::warn!("could not start {workers} workers ({e}); running sequentially");
            (0..count).map(job).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<R, F>(count: usize, _workers: usize, job: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..count).map(job).collect()
}
