use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::thread_pool;
use crate::error::{Error, Result};
use crate::eval::{depth_mask, masked_epe};
use crate::flow::Mask;
use crate::io::flo::read_flo;
use crate::io::manifest::{DatasetManifest, SequenceRecord, MANIFEST_FILE};
use crate::io::pfm::read_pfm;
use crate::io::split::Split;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Facial,
    Head,
    Expression,
}

impl FlowKind {
    fn paths(self, r: &SequenceRecord) -> &[String] {
        match self {
            FlowKind::Facial => &r.flow_facial,
            FlowKind::Head => &r.flow_head,
            FlowKind::Expression => &r.flow_expression,
        }
    }
}

impl std::str::FromStr for FlowKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "facial" | "f" => Ok(FlowKind::Facial),
            "head" | "h" => Ok(FlowKind::Head),
            "expression" | "e" => Ok(FlowKind::Expression),
            _ => Err(Error::Domain(format!("unknown flow kind {s:?}"))),
        }
    }
}

/// Which pixels are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    /// Foreground from the source frame's depth map.
    Depth,
    /// Every pixel with valid flow.
    All,
}

impl std::str::FromStr for MaskSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(MaskSource::Depth),
            "all" => Ok(MaskSource::All),
            _ => Err(Error::Domain(format!("unknown mask source {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub dataset: PathBuf,
    /// Prediction tree mirroring the dataset's relative flow paths.
    pub predictions: PathBuf,
    pub target: FlowKind,
    pub mask: MaskSource,
    pub depth_epsilon: f64,
    /// Restrict to one split; all sequences when absent.
    pub split: Option<Split>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            dataset: PathBuf::from("dataset"),
            predictions: PathBuf::from("predictions"),
            target: FlowKind::Facial,
            mask: MaskSource::Depth,
            depth_epsilon: 1e-3,
            split: None,
        }
    }
}

/// Mean of per-pair EPE over a group of pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub epe: f64,
    pub pairs: usize,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEvalReport {
    pub target: FlowKind,
    pub mask: MaskSource,
    pub split: Option<Split>,
    pub aggregate: GroupStat,
    /// Keyed by motion scale `1/n`.
    pub groups: BTreeMap<String, GroupStat>,
    /// Prediction files that were not found, relative to the prediction root.
    pub missing: Vec<String>,
    /// Pairs that could not be scored for other reasons.
    pub errors: Vec<String>,
}

impl DatasetEvalReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty() && self.errors.is_empty()
    }
}

enum PairResult {
    Scored { n: usize, epe: f64, pixels: usize },
    Missing(String),
    Failed(String),
}

fn score_pair(cfg: &EvalConfig, m: &DatasetManifest, r: &SequenceRecord, t: usize) -> PairResult {
    let rel = &cfg.target.paths(r)[t];
    let pred_path = cfg.predictions.join(rel);
    if !pred_path.is_file() {
        return PairResult::Missing(rel.clone());
    }
    let run = || -> Result<(f64, usize)> {
        let pred = read_flo(&pred_path)?;
        let gt = read_flo(cfg.dataset.join(rel))?;
        let mask = match cfg.mask {
            MaskSource::Depth => depth_mask(&read_pfm(cfg.dataset.join(&r.depths[t]))?, m.background_depth, cfg.depth_epsilon)?,
            MaskSource::All => Mask::full(gt.width, gt.height),
        };
        let rep = masked_epe(&pred, &gt, &mask)?;
        Ok((rep.aggregate, rep.count))
    };
    match run() {
        Ok((epe, pixels)) => PairResult::Scored { n: r.n, epe, pixels },
        Err(e) => PairResult::Failed(format!("{rel}: {e}")),
    }
}

/// Scores every pair of the selected sequences. Missing predictions are
/// listed and skipped rather than failing the whole run.
pub fn evaluate_dataset(cfg: &EvalConfig, workers: usize) -> Result<DatasetEvalReport> {
    if !(cfg.depth_epsilon > 0.0) {
        return Err(Error::Domain("depth epsilon must be positive".into()));
    }
    let manifest = DatasetManifest::read(cfg.dataset.join(MANIFEST_FILE))?;
    manifest.check_structure()?;
    let pairs: Vec<(&SequenceRecord, usize)> = manifest
        .sequences
        .iter()
        .filter(|r| r.complete && cfg.split.map_or(true, |s| r.split == s))
        .flat_map(|r| (0..r.num_pairs()).map(move |t| (r, t)))
        .collect();
    let pool = thread_pool(workers)?;
    let results: Vec<PairResult> =
        pool.install(|| pairs.par_iter().map(|&(r, t)| score_pair(cfg, &manifest, r, t)).collect());

    let mut sums: BTreeMap<usize, (f64, usize, usize)> = BTreeMap::new();
    let mut total = (0.0, 0usize, 0usize);
    let mut missing = Vec::new();
    let mut errors = Vec::new();
    for res in results {
        match res {
            PairResult::Scored { n, epe, pixels } => {
                let g = sums.entry(n).or_default();
                g.0 += epe;
                g.1 += 1;
                g.2 += pixels;
                total.0 += epe;
                total.1 += 1;
                total.2 += pixels;
            }
            PairResult::Missing(p) => missing.push(p),
            PairResult::Failed(e) => errors.push(e),
        }
    }
    let stat = |(s, pairs, pixels): (f64, usize, usize)| GroupStat {
        epe: if pairs == 0 { 0.0 } else { s / pairs as f64 },
        pairs,
        pixels,
    };
    Ok(DatasetEvalReport {
        target: cfg.target,
        mask: cfg.mask,
        split: cfg.split,
        aggregate: stat(total),
        groups: sums.into_iter().map(|(n, g)| (format!("1/{n}"), stat(g))).collect(),
        missing,
        errors,
    })
}
