//! Dataset manifest (`manifest.json`) and on-disk layout.
//!
//! Layout under the dataset root, for a sequence with id `i` and length `n`:
//! `seq_<i>/frame_<t>.png` and `seq_<i>/depth_<t>.pfm` for `t = 1..=n`,
//! `seq_<i>/head_frame_<t>.png` for `t = 2..=n`, and
//! `seq_<i>/flow_{f,h,e}_<t>.flo` for pairs `t = 1..n-1`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::flo::read_flo_dimensions;
use super::png::png_dimensions;
use super::split::Split;
use crate::error::{Error, Result};
use crate::face_model::FaceParams;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sequence_dir(id: u64) -> String {
    format!("seq_{id}")
}

pub fn frame_path(id: u64, t: usize) -> String {
    format!("{}/frame_{t}.png", sequence_dir(id))
}

pub fn head_frame_path(id: u64, t: usize) -> String {
    format!("{}/head_frame_{t}.png", sequence_dir(id))
}

pub fn depth_path(id: u64, t: usize) -> String {
    format!("{}/depth_{t}.pfm", sequence_dir(id))
}

/// `kind` is one of `f`, `h`, `e`.
pub fn flow_path(id: u64, kind: char, t: usize) -> String {
    format!("{}/flow_{kind}_{t}.flo", sequence_dir(id))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub sequences: usize,
    pub pairs: usize,
    pub train: usize,
    pub test: usize,
    pub val: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: u64,
    pub n: usize,
    pub seed: u64,
    pub split: Split,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub target: FaceParams,
    pub frames: Vec<String>,
    pub head_frames: Vec<String>,
    pub depths: Vec<String>,
    pub flow_facial: Vec<String>,
    pub flow_head: Vec<String>,
    pub flow_expression: Vec<String>,
}

impl SequenceRecord {
    pub fn num_pairs(&self) -> usize {
        self.flow_facial.len()
    }

    pub fn all_paths(&self) -> impl Iterator<Item = &String> {
        self.frames
            .iter()
            .chain(&self.head_frames)
            .chain(&self.depths)
            .chain(&self.flow_facial)
            .chain(&self.flow_head)
            .chain(&self.flow_expression)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub asset_fingerprint: String,
    pub width: usize,
    pub height: usize,
    pub background_depth: f64,
    pub global_seed: u64,
    pub complete: bool,
    pub counts: Counts,
    pub sequences: Vec<SequenceRecord>,
}

impl DatasetManifest {
    /// Recomputes `counts` and `complete` from the sequence list.
    pub fn refresh_counts(&mut self) {
        let tally = |s: Split| self.sequences.iter().filter(|r| r.split == s).count();
        self.counts = Counts {
            sequences: self.sequences.len(),
            pairs: self.sequences.iter().map(SequenceRecord::num_pairs).sum(),
            train: tally(Split::Train),
            test: tally(Split::Test),
            val: tally(Split::Val),
        };
        self.complete = self.sequences.iter().all(|r| r.complete);
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, root: impl AsRef<Path>) -> Result<()> {
        let path = root.as_ref().join(MANIFEST_FILE);
        std::fs::write(&path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DatasetManifest::from_json(&s)
    }

    /// Structural checks that need no filesystem access.
    pub fn check_structure(&self) -> Result<()> {
        let mut expected = self.clone();
        expected.refresh_counts();
        if expected.counts != self.counts {
            return Err(Error::format("counts", "counts disagree with the sequence list"));
        }
        if expected.complete != self.complete {
            return Err(Error::format("complete", "flag disagrees with per-sequence completeness"));
        }
        let mut ids: Vec<u64> = self.sequences.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::format("sequences", "duplicate sequence id"));
        }
        for r in self.sequences.iter().filter(|r| r.complete) {
            let pairs = r.n.saturating_sub(1);
            let ok = r.frames.len() == r.n
                && r.depths.len() == r.n
                && r.head_frames.len() == pairs
                && r.flow_facial.len() == pairs
                && r.flow_head.len() == pairs
                && r.flow_expression.len() == pairs;
            if !ok {
                return Err(Error::format("sequences", format!("record {} has inconsistent file lists", r.id)));
            }
        }
        Ok(())
    }

    /// Full validation against the files under `root`: every referenced file
    /// exists and every frame and flow matches the manifest dimensions.
    pub fn validate(&self, root: impl AsRef<Path>) -> Result<()> {
        self.check_structure()?;
        let root = root.as_ref();
        for r in &self.sequences {
            for p in r.all_paths() {
                if !root.join(p).is_file() {
                    return Err(Error::format("sequences", format!("record {} references missing file {p}", r.id)));
                }
            }
            for p in r.frames.iter().chain(&r.head_frames) {
                if png_dimensions(root.join(p))? != (self.width, self.height) {
                    return Err(Error::format("sequences", format!("frame {p} of record {} has wrong size", r.id)));
                }
            }
            for p in r.flow_facial.iter().chain(&r.flow_head).chain(&r.flow_expression) {
                if read_flo_dimensions(root.join(p))? != (self.width, self.height) {
                    return Err(Error::format(
                        "sequences",
                        format!("flow {p} of record {} disagrees with frame size", r.id),
                    ));
                }
            }
        }
        Ok(())
    }
}
