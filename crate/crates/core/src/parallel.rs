//! Order-preserving map over independent jobs (replicas, sweep points).
//!
//! With the `parallel` feature the jobs run on the rayon pool; without it,
//! or with [`Execution::Sequential`], they run in order on the caller's
//! thread. Results come back in input order either way.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

pub fn map_jobs<T, R, F>(exec: Execution, jobs: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            jobs.par_iter().map(f).collect()
        }
        _ => jobs.iter().map(f).collect(),
    }
}
