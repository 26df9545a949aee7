//! Sequence-level train/test/val assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Val,
}

impl Split {
    pub const ORDER: [Split; 3] = [Split::Train, Split::Test, Split::Val];
}

/// Default train : test : val ratio.
pub const DEFAULT_RATIOS: [u64; 3] = [97, 2, 1];

/// Largest-remainder apportionment of `total` items by `ratios`.
/// Ties in the remainder go to the earlier ratio.
pub fn apportion(total: usize, ratios: &[u64]) -> Result<Vec<usize>> {
    if ratios.is_empty() || ratios.contains(&0) {
        return Err(Error::Domain("ratios must be positive integers".into()));
    }
    let sum: u128 = ratios.iter().map(|&r| r as u128).sum();
    let scaled: Vec<u128> = ratios.iter().map(|&r| total as u128 * r as u128).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|s| (s / sum) as usize).collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| (scaled[b] % sum).cmp(&(scaled[a] % sum)).then(a.cmp(&b)));
    let left = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(left) {
        counts[i] += 1;
    }
    Ok(counts)
}

/// Assigns a split to each id, returned in input order.
///
/// Ids are shuffled deterministically from `seed`, then the first
/// `counts[0]` become train, the next `counts[1]` test, the rest val.
pub fn split_dataset(ids: &[u64], ratios: [u64; 3], seed: u64) -> Result<Vec<Split>> {
    if ids.is_empty() {
        return Err(Error::Domain("cannot split an empty record list".into()));
    }
    let counts = apportion(ids.len(), &ratios)?;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    // Sort first so the assignment depends on the id set, not the input order.
    order.sort_by_key(|&i| ids[i]);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut tags = vec![Split::Train; ids.len()];
    let mut cursor = 0;
    for (split, &count) in Split::ORDER.iter().zip(&counts) {
        for &i in &order[cursor..cursor + count] {
            tags[i] = *split;
        }
        cursor += count;
    }
    Ok(tags)
}
