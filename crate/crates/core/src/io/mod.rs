//! Readers and writers for dataset artifacts, dataset layout and splits.

pub mod flo;
pub mod manifest;
pub mod pfm;
pub mod png;
pub mod split;

pub use flo::{decode_flo, encode_flo, read_flo, write_flo};
pub use manifest::{DatasetManifest, SequenceRecord};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use split::{apportion, split_dataset, Split};
