//! Deterministic parallel replica execution.
//!
//! Replicas are grouped in fixed-size blocks; each block owns the random
//! stream `(key, block index)` and results are gathered in block order, so
//! totals do not depend on the number of worker threads.

use rayon::prelude::*;

use crate::rng::{derive_key, replica_rng};
use rand_chacha::ChaCha8Rng;

/// Replicas per random stream.
pub const BLOCK: u64 = 1024;

/// Runs `f(rng, replica_range)` for every block of `reps` replicas and
/// returns the per-block results in order.
pub fn map_blocks<T, F>(key: u64, reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, std::ops::Range<u64>) -> T + Sync,
{
    let blocks = reps.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = replica_rng(key, b);
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(reps);
            f(&mut rng, lo..hi)
        })
        .collect()
}

/// Quenched layout: `envs` environments, each with `reps` replicas split in
/// blocks. Every `(environment, block)` pair is an independent task with the
/// stream `(derive_key(key, env), block)`; results come back grouped per
/// environment, blocks in order.
pub fn map_env_blocks<T, F>(key: u64, envs: u64, reps: u64, f: F) -> Vec<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng, std::ops::Range<u64>) -> T + Sync,
{
    let blocks = reps.div_ceil(BLOCK);
    let flat: Vec<T> = (0..envs * blocks)
        .into_par_iter()
        .map(|task| {
            let (e, b) = (task / blocks, task % blocks);
            let mut rng = replica_rng(derive_key(key, e), b);
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(reps);
            f(e, &mut rng, lo..hi)
        })
        .collect();
    let mut out: Vec<Vec<T>> = (0..envs)
        .map(|_| Vec::with_capacity(blocks as usize))
        .collect();
    for (task, t) in flat.into_iter().enumerate() {
        out[task / blocks as usize].push(t);
    }
    out
}

/// Runs `f` on a dedicated pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send, F: FnOnce() -> T + Send>(workers: usize, f: F) -> T {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
        .install(f)
}
