//! `faceflow` command-line tool.
//!
//! Exit codes: 0 ok, 1 validation, 2 io, 3 partial failure. Failures print a
//! one-line JSON record `{"error": kind, "message": ...}` on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use faceflow::decompose::{decompose_flow, fit_head_motion, IrlsConfig, MotionKind, RobustLoss};
use faceflow::eval::{
    depth_mask, embedding_stats, flow_to_colorwheel, landmark_epe, masked_epe, read_correspondences, LandmarkOptions,
    VERTEX_EVAL_REGIONS,
};
use faceflow::face_model::{asset_fingerprint, load_asset, make_synthetic_asset, save_asset, Region};
use faceflow::flow::{FlowField, Mask};
use faceflow::io::flo::{read_flo, write_flo};
use faceflow::io::manifest::{DatasetManifest, MANIFEST_FILE};
use faceflow::io::pfm::read_pfm;
use faceflow::io::png::{read_mask, write_png};
use faceflow::io::split::{split_dataset, Split};
use faceflow::pipeline::{
    evaluate_dataset, generate_dataset, resolve_workers, EvalConfig, FlowKind, GenConfig, MaskSource, WORKERS_ENV,
};
use faceflow::{Error, Result};

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "faceflow", version, about = "Synthetic facial optical-flow datasets with decomposed head and expression labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset: frames, depth, facial/head/expression flow and a manifest.
    Gen(GenArgs),
    /// Evaluate predictions or correspondences.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Split a flow field into parametric head flow and residual expression flow.
    Decompose(DecomposeArgs),
    /// Render a flow field as a color-wheel PNG.
    Viz(VizArgs),
    /// Reassign train/test/val tags of an existing dataset.
    Split(SplitArgs),
    /// Create or inspect face model assets.
    #[command(subcommand)]
    Asset(AssetCommand),
}

#[derive(Args)]
struct WorkerArgs {
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    /// JSON config file; command-line flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Face model asset; a synthetic asset is built when omitted.
    #[arg(long)]
    asset: Option<PathBuf>,
    /// Seed of the synthetic asset.
    #[arg(long)]
    synth_seed: Option<u64>,
    /// Vertex count of the synthetic asset.
    #[arg(long)]
    synth_vertices: Option<usize>,
    /// Identities; each gets one sequence per length.
    #[arg(long)]
    identities: Option<usize>,
    /// Comma-separated sequence lengths, e.g. 5,10,15,20.
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,
    /// Accept lengths other than 5, 10, 15 and 20.
    #[arg(long)]
    allow_any_length: bool,
    /// Frame width in pixels.
    #[arg(long)]
    width: Option<usize>,
    /// Frame height in pixels.
    #[arg(long)]
    height: Option<usize>,
    /// Global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Train:test:val ratio, e.g. 97:2:1.
    #[arg(long)]
    split_ratios: Option<String>,
    /// Directory of PNG backgrounds.
    #[arg(long)]
    background_dir: Option<PathBuf>,
    /// Flat background color as R,G,B.
    #[arg(long, value_delimiter = ',')]
    background_color: Option<Vec<u8>>,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    print_config: bool,
    #[command(flatten)]
    workers: WorkerArgs,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Masked EPE of a prediction tree against a generated dataset, grouped by motion scale.
    Dataset(EvalDatasetArgs),
    /// EPE of a single predicted flow against a reference flow.
    Pair(EvalPairArgs),
    /// Landmark/vertex EPE of a flow against point correspondences.
    Landmarks(EvalLandmarkArgs),
    /// Std, coefficient of variation and mean pairwise cosine of embedding vectors.
    Embeddings(EvalEmbeddingArgs),
}

#[derive(Args)]
struct EvalDatasetArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// facial, head or expression.
    #[arg(long)]
    target: Option<String>,
    /// depth or all.
    #[arg(long)]
    mask: Option<String>,
    #[arg(long)]
    depth_epsilon: Option<f64>,
    /// train, test or val.
    #[arg(long)]
    split: Option<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    workers: WorkerArgs,
}

#[derive(Args)]
struct MaskArgs {
    /// Mask PNG; nonzero pixels are selected.
    #[arg(long, conflicts_with = "depth")]
    mask: Option<PathBuf>,
    /// Depth PFM; pixels nearer than the background plane are selected.
    #[arg(long)]
    depth: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    background_depth: f64,
    #[arg(long, default_value_t = 1e-3)]
    depth_epsilon: f64,
}

impl MaskArgs {
    fn load(&self, width: usize, height: usize) -> Result<(Mask, String)> {
        let (mask, source) = match (&self.mask, &self.depth) {
            (Some(p), _) => (read_mask(p)?, format!("mask:{}", p.display())),
            (None, Some(p)) => {
                (depth_mask(&read_pfm(p)?, self.background_depth, self.depth_epsilon)?, format!("depth:{}", p.display()))
            }
            (None, None) => (Mask::full(width, height), "all".to_string()),
        };
        if (mask.width, mask.height) != (width, height) {
            return Err(Error::Shape(format!("mask is {}x{}, flow is {width}x{height}", mask.width, mask.height)));
        }
        Ok((mask, source))
    }
}

#[derive(Args)]
struct EvalPairArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[command(flatten)]
    mask: MaskArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalLandmarkArgs {
    #[arg(long)]
    flow: PathBuf,
    /// CSV with columns id,x1,y1,x2,y2,region.
    #[arg(long)]
    correspondences: PathBuf,
    /// Score against C1 - C2 instead of C2 - C1.
    #[arg(long)]
    literal_sign: bool,
    /// Comma-separated regions to keep, or "all".
    #[arg(long, default_value = "all")]
    regions: String,
    /// Keep only lips, cheeks and eyes.
    #[arg(long, conflicts_with = "regions")]
    vertex_regions: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalEmbeddingArgs {
    /// CSV without header, one vector per row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Input facial flow (.flo).
    #[arg(long)]
    flow: PathBuf,
    #[command(flatten)]
    mask: MaskArgs,
    /// translation, similarity or affine.
    #[arg(long, default_value = "affine")]
    model: String,
    /// huber or tukey.
    #[arg(long, default_value = "tukey")]
    loss: String,
    /// Loss scale in pixels; tukey estimates it from the data when omitted.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    /// Evaluate the head model outside the mask too.
    #[arg(long)]
    extrapolate: bool,
    #[arg(long)]
    head_out: PathBuf,
    #[arg(long)]
    expression_out: PathBuf,
    /// Write model and diagnostics JSON here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VizArgs {
    #[arg(long)]
    flow: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Magnitude mapped to full saturation; largest valid magnitude when omitted.
    #[arg(long)]
    max_magnitude: Option<f64>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "97:2:1")]
    ratios: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the assignment without rewriting the manifest.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum AssetCommand {
    /// Build a synthetic face model asset.
    Synth {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        vertices: usize,
        #[arg(long, default_value_t = 10)]
        shape: usize,
        #[arg(long, default_value_t = 8)]
        expression: usize,
    },
    /// Validate an asset and print its dimensions and fingerprint.
    Info { path: PathBuf },
}

/// Command failure with a chosen exit code.
struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.kind() == "io" { EXIT_IO } else { EXIT_VALIDATION };
        Failure { code, kind: e.kind().to_string(), message: e.to_string() }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn partial(message: String) -> Failure {
    Failure { code: EXIT_PARTIAL, kind: "partial".into(), message }
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    match path {
        Some(p) => std::fs::write(p, s).map_err(|e| Error::io(p, e)),
        None => {
            print!("{s}");
            Ok(())
        }
    }
}

fn parse_ratios(s: &str) -> Result<[u64; 3]> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Domain(format!("split ratios {s:?} must look like 97:2:1"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0u64; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| bad())?;
    }
    Ok(out)
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T> {
    s.parse()
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        "val" => Ok(Split::Val),
        _ => Err(Error::Domain(format!("unknown split {s:?}"))),
    }
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let mut cfg: GenConfig = match &a.config {
        Some(p) => read_json_file(p)?,
        None => GenConfig::default(),
    };
    if let Some(v) = a.output {
        cfg.output = v;
    }
    if let Some(v) = a.asset {
        cfg.asset = Some(v);
    }
    if let Some(v) = a.synth_seed {
        cfg.synth.seed = v;
    }
    if let Some(v) = a.synth_vertices {
        cfg.synth.vertices = v;
    }
    if let Some(v) = a.identities {
        cfg.identities = v;
    }
    if let Some(v) = a.lengths {
        cfg.lengths = v;
    }
    if a.allow_any_length {
        cfg.allow_any_length = true;
    }
    if let Some(v) = a.width {
        cfg.width = v;
    }
    if let Some(v) = a.height {
        cfg.height = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.split_ratios {
        cfg.split_ratios = parse_ratios(&v)?;
    }
    if let Some(v) = a.background_dir {
        cfg.background_dir = Some(v);
    }
    if let Some(v) = a.background_color {
        cfg.background_color =
            v.try_into().map_err(|_| Error::Domain("background color needs exactly 3 components".into()))?;
    }
    if a.print_config {
        emit(&cfg, None)?;
        return Ok(());
    }
    let workers = resolve_workers(a.workers.workers)?;
    let outcome = generate_dataset(&cfg, workers)?;
    let m = &outcome.manifest;
    emit(
        &serde_json::json!({
            "output": cfg.output,
            "sequences": m.counts.sequences,
            "pairs": m.counts.pairs,
            "train": m.counts.train,
            "test": m.counts.test,
            "val": m.counts.val,
            "complete": m.complete,
            "failures": outcome.failures.iter().map(|(id, msg)| serde_json::json!({"id": id, "message": msg})).collect::<Vec<_>>(),
        }),
        None,
    )?;
    if !outcome.failures.is_empty() {
        return Err(partial(format!("{} of {} sequences failed", outcome.failures.len(), m.counts.sequences)));
    }
    Ok(())
}

fn cmd_eval(c: EvalCommand) -> CmdResult {
    match c {
        EvalCommand::Dataset(a) => {
            let mut cfg: EvalConfig = match &a.config {
                Some(p) => read_json_file(p)?,
                None => EvalConfig::default(),
            };
            if let Some(v) = a.dataset {
                cfg.dataset = v;
            }
            if let Some(v) = a.predictions {
                cfg.predictions = v;
            }
            if let Some(v) = a.target {
                cfg.target = parse::<FlowKind>(&v)?;
            }
            if let Some(v) = a.mask {
                cfg.mask = parse::<MaskSource>(&v)?;
            }
            if let Some(v) = a.depth_epsilon {
                cfg.depth_epsilon = v;
            }
            if let Some(v) = a.split {
                cfg.split = Some(parse_split(&v)?);
            }
            let report = evaluate_dataset(&cfg, resolve_workers(a.workers.workers)?)?;
            emit(&report, a.report.as_deref())?;
            if !report.is_complete() {
                return Err(partial(format!(
                    "{} missing predictions, {} unscored pairs",
                    report.missing.len(),
                    report.errors.len()
                )));
            }
        }
        EvalCommand::Pair(a) => {
            let pred = read_flo(&a.pred)?;
            let gt = read_flo(&a.gt)?;
            let (mask, source) = a.mask.load(gt.width, gt.height)?;
            let mut report = masked_epe(&pred, &gt, &mask)?;
            report.mask_source = source;
            emit(&report, a.report.as_deref())?;
        }
        EvalCommand::Landmarks(a) => {
            let flow = read_flo(&a.flow)?;
            let corr = read_correspondences(&a.correspondences)?;
            let regions = if a.vertex_regions {
                Some(VERTEX_EVAL_REGIONS.to_vec())
            } else if a.regions == "all" {
                None
            } else {
                Some(
                    a.regions
                        .split(',')
                        .map(|s| Region::parse(s.trim()).ok_or_else(|| Error::Domain(format!("unknown region {s:?}"))))
                        .collect::<Result<Vec<_>>>()?,
                )
            };
            let report = landmark_epe(&flow, &corr, &LandmarkOptions { literal_sign: a.literal_sign, regions })?;
            emit(&report, a.report.as_deref())?;
        }
        EvalCommand::Embeddings(a) => {
            let file = std::fs::File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
            let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(file);
            let mut vectors = Vec::new();
            for (i, row) in rdr.records().enumerate() {
                let row = row.map_err(|e| Error::Domain(format!("row {}: {e}", i + 1)))?;
                let v = row
                    .iter()
                    .map(|c| c.parse::<f64>().map_err(|_| Error::Domain(format!("row {}: bad number {c:?}", i + 1))))
                    .collect::<Result<Vec<_>>>()?;
                vectors.push(v);
            }
            emit(&embedding_stats(&vectors)?, a.report.as_deref())?;
        }
    }
    Ok(())
}

fn cmd_decompose(a: DecomposeArgs) -> CmdResult {
    let flow = read_flo(&a.flow)?;
    let (mask, source) = a.mask.load(flow.width, flow.height)?;
    let kind: MotionKind = parse(&a.model)?;
    let loss: RobustLoss = parse(&a.loss)?;
    let base = match loss {
        RobustLoss::Huber => IrlsConfig::huber(),
        RobustLoss::Tukey => IrlsConfig::tukey(),
    };
    let cfg = IrlsConfig {
        scale: a.scale.or(base.scale),
        max_iterations: a.max_iterations,
        tolerance: a.tolerance,
        ..base
    };
    let (model, diag) = fit_head_motion(&flow, &mask, kind, &cfg)?;
    let (head, expr) = decompose_flow(&flow, &mask, &model, a.extrapolate)?;
    write_flo(&head, &a.head_out)?;
    write_flo(&expr, &a.expression_out)?;
    emit(&serde_json::json!({ "mask_source": source, "model": model, "diagnostics": diag }), a.report.as_deref())?;
    Ok(())
}

fn cmd_viz(a: VizArgs) -> CmdResult {
    let flow: FlowField = read_flo(&a.flow)?;
    write_png(&flow_to_colorwheel(&flow, a.max_magnitude)?, &a.out)?;
    Ok(())
}

fn cmd_split(a: SplitArgs) -> CmdResult {
    let ratios = parse_ratios(&a.ratios)?;
    let mut m = DatasetManifest::read(a.dataset.join(MANIFEST_FILE))?;
    let ids: Vec<u64> = m.sequences.iter().map(|r| r.id).collect();
    let tags = split_dataset(&ids, ratios, a.seed)?;
    for (r, t) in m.sequences.iter_mut().zip(tags) {
        r.split = t;
    }
    m.refresh_counts();
    if !a.dry_run {
        m.write(&a.dataset)?;
    }
    let assignment: Vec<_> = m.sequences.iter().map(|r| serde_json::json!({"id": r.id, "split": r.split})).collect();
    emit(&serde_json::json!({ "counts": m.counts, "assignment": assignment }), None)?;
    Ok(())
}

fn cmd_asset(c: AssetCommand) -> CmdResult {
    let (asset, path) = match c {
        AssetCommand::Synth { out, seed, vertices, shape, expression } => {
            let asset = make_synthetic_asset(seed, vertices, shape, expression)?;
            save_asset(&asset, &out)?;
            (asset, out)
        }
        AssetCommand::Info { path } => (load_asset(&path)?, path),
    };
    emit(
        &serde_json::json!({
            "path": path,
            "vertices": asset.num_vertices(),
            "triangles": asset.num_triangles(),
            "shape_components": asset.num_shape(),
            "expression_components": asset.num_expression(),
            "joints": asset.num_joints(),
            "landmarks": asset.landmark_indices.len(),
            "fingerprint": asset_fingerprint(&asset),
        }),
        None,
    )?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Eval(c) => cmd_eval(c),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Viz(a) => cmd_viz(a),
        Command::Split(a) => cmd_split(a),
        Command::Asset(c) => cmd_asset(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let record = serde_json::json!({ "error": f.kind, "message": f.message, "exit_code": f.code });
            eprintln!("{record}");
            ExitCode::from(f.code)
        }
    }
}
