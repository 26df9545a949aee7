//! Batch drivers behind the command-line tool: dataset generation and
//! dataset-level evaluation.

mod evaluate;
mod generate;

pub use evaluate::{evaluate_dataset, EvalConfig, FlowKind, GroupStat, MaskSource, DatasetEvalReport};
pub use generate::{generate_dataset, load_or_synthesize_asset, GenConfig, GenOutcome, SynthConfig};

use crate::error::{Error, Result};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "FACEFLOW_WORKERS";

/// Seed streams, so distinct uses of the global seed never collide.
pub(crate) mod stream {
    pub const SEQUENCE: u64 = 1;
    pub const IDENTITY: u64 = 2;
    pub const BACKGROUND: u64 = 3;
    pub const SPLIT: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-item seed from the global seed, a stream tag and an item id.
pub fn derive_seed(global: u64, stream: u64, id: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(global) ^ stream) ^ id)
}

/// Worker count: explicit value, else `FACEFLOW_WORKERS`, else the number of CPUs.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    let n = match explicit {
        Some(n) => n,
        None => match std::env::var(WORKERS_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("{WORKERS_ENV}={s:?} is not a positive integer")))?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(Error::Domain("worker count must be >= 1".into()));
    }
    Ok(n)
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start {workers} workers: {e}")))
}
