// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Runs independent simulations side by side.
//!
//! Each job owns its testbed, so results do not depend on scheduling and the
//! output order always follows the input order.

/// Maps `f` over `jobs`, in parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map<T, R, F>(jobs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    jobs.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(jobs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    map_sequential(jobs, f)
}

/// [`map`] when `parallel` is set, [`map_sequential`] otherwise.
pub fn map_with<T, R, F>(parallel: bool, jobs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    if parallel {
        map(jobs, f)
    } else {
        map_sequential(jobs, f)
    }
}

/// Always single-threaded; the reference the parallel path is checked against.
pub fn map_sequential<T, R, F>(jobs: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    jobs.into_iter().map(f).collect()
}
