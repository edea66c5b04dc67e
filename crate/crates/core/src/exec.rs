//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper writes element `i` from a pure function of `i`, so sequential
//! and parallel execution produce bit-identical results. Without the
//! `parallel` feature both policies run sequentially.

use serde::{Deserialize, Serialize};

use crate::Result;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this policy actually dispatches to the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `out[i] = f(i)` for every index.
pub fn fill<F>(exec: Execution, out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * CHUNK;
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = f(base + k);
                }
            });
        return;
    }
    let _ = exec;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Fallible `fill`. On failure the error with the smallest index is returned.
pub fn try_fill<F>(exec: Execution, out: &mut [f64], f: F) -> Result<()>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        let first_err = out
            .par_chunks_mut(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let base = c * CHUNK;
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = f(base + k)?;
                }
                Ok(())
            })
            .collect::<Vec<Result<()>>>();
        return first_err.into_iter().collect();
    }
    let _ = exec;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i)?;
    }
    Ok(())
}

/// Collects `f(i)` for `i in 0..n`, preserving order.
pub fn map_collect<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}
