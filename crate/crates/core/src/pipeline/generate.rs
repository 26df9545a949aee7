use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, stream, thread_pool};
use crate::error::{Error, Result};
use crate::face_model::{asset_fingerprint, evaluate_model, load_asset, make_synthetic_asset, FaceModelAsset};
use crate::flow::compute_flow;
use crate::io::flo::write_flo;
use crate::io::manifest::{
    depth_path, flow_path, frame_path, head_frame_path, sequence_dir, Counts, DatasetManifest, SequenceRecord,
    MANIFEST_VERSION,
};
use crate::io::pfm::write_pfm;
use crate::io::png::{read_rgb, write_png};
use crate::io::split::{split_dataset, Split, DEFAULT_RATIOS};
use crate::math::{self, Vec3};
use crate::raster::{rasterize, Background, Camera, RenderConfig, RenderOutput};
use crate::sequence::{facial_params, head_params, sample_target, SampleBounds, SequenceSpec, STANDARD_LENGTHS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub vertices: usize,
    pub shape: usize,
    pub expression: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { seed: 0, vertices: 2000, shape: 10, expression: 8 }
    }
}

/// Everything that determines a generated dataset. The worker count is not
/// part of it: output bytes do not depend on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub output: PathBuf,
    /// Face model asset file; a synthetic asset is built when absent.
    pub asset: Option<PathBuf>,
    pub synth: SynthConfig,
    /// Number of identities; each gets one sequence per length.
    pub identities: usize,
    pub lengths: Vec<usize>,
    /// Permit lengths outside 5/10/15/20.
    pub allow_any_length: bool,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub split_ratios: [u64; 3],
    pub bounds: SampleBounds,
    /// Directory of PNG backdrops, chosen per sequence by seeded index.
    pub background_dir: Option<PathBuf>,
    pub background_color: [u8; 3],
    pub background_depth: f64,
    /// Overrides the default head camera; its size must match `width`/`height`.
    pub camera: Option<Camera>,
    pub light_dir: Vec3,
    pub ambient: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        let render = RenderConfig::default();
        let Background::Flat(background_color) = render.background else { unreachable!() };
        GenConfig {
            output: PathBuf::from("dataset"),
            asset: None,
            synth: SynthConfig::default(),
            identities: 1,
            lengths: STANDARD_LENGTHS.to_vec(),
            allow_any_length: false,
            width: 128,
            height: 128,
            seed: 0,
            split_ratios: DEFAULT_RATIOS,
            bounds: SampleBounds::default(),
            background_dir: None,
            background_color,
            background_depth: render.background_depth,
            camera: None,
            light_dir: render.light_dir,
            ambient: render.ambient,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.identities == 0 {
            return Err(Error::Domain("identities must be >= 1".into()));
        }
        if self.lengths.is_empty() {
            return Err(Error::Domain("at least one sequence length required".into()));
        }
        for &n in &self.lengths {
            if n < 2 || (!self.allow_any_length && !STANDARD_LENGTHS.contains(&n)) {
                return Err(Error::Domain(format!("sequence length {n} not allowed")));
            }
        }
        if self.split_ratios.iter().any(|&r| r == 0) {
            return Err(Error::Domain("split ratios must be positive".into()));
        }
        self.camera()?;
        self.render_config(Background::Flat(self.background_color)).validate()
    }

    pub fn camera(&self) -> Result<Camera> {
        match &self.camera {
            Some(c) => {
                c.validate()?;
                if (c.width, c.height) != (self.width, self.height) {
                    return Err(Error::Domain("camera image size differs from width/height".into()));
                }
                Ok(c.clone())
            }
            None => Camera::head_default(self.width, self.height),
        }
    }

    fn render_config(&self, background: Background) -> RenderConfig {
        RenderConfig {
            background,
            background_depth: self.background_depth,
            light_dir: math::normalize(self.light_dir),
            ambient: self.ambient,
            ..RenderConfig::default()
        }
    }
}

pub fn load_or_synthesize_asset(path: Option<&Path>, synth: &SynthConfig) -> Result<FaceModelAsset> {
    match path {
        Some(p) => load_asset(p),
        None => make_synthetic_asset(synth.seed, synth.vertices, synth.shape, synth.expression),
    }
}

#[derive(Debug, Clone)]
pub struct GenOutcome {
    pub manifest: DatasetManifest,
    /// `(sequence id, message)` for every sequence that failed.
    pub failures: Vec<(u64, String)>,
}

struct Job {
    id: u64,
    identity: u64,
    n: usize,
}

struct Context<'a> {
    cfg: &'a GenConfig,
    asset: &'a FaceModelAsset,
    camera: Camera,
    backgrounds: Vec<PathBuf>,
}

fn list_backgrounds(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::Domain(format!("no PNG files in background directory {}", dir.display())));
    }
    Ok(out)
}

/// Generates the dataset described by `cfg` using `workers` threads and
/// writes `manifest.json`. Sequences that fail are kept in the manifest with
/// `complete: false` and their partial files removed.
pub fn generate_dataset(cfg: &GenConfig, workers: usize) -> Result<GenOutcome> {
    cfg.validate()?;
    let asset = load_or_synthesize_asset(cfg.asset.as_deref(), &cfg.synth)?;
    let backgrounds = match &cfg.background_dir {
        Some(d) => list_backgrounds(d)?,
        None => Vec::new(),
    };
    let root = cfg.output.as_path();
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let ctx = Context { cfg, asset: &asset, camera: cfg.camera()?, backgrounds };

    let mut jobs = Vec::new();
    for identity in 0..cfg.identities as u64 {
        for &n in &cfg.lengths {
            jobs.push(Job { id: jobs.len() as u64, identity, n });
        }
    }
    let pool = thread_pool(workers)?;
    let mut records: Vec<SequenceRecord> = pool.install(|| jobs.par_iter().map(|job| run_job(&ctx, job)).collect());

    let ids: Vec<u64> = records.iter().map(|r| r.id).collect();
    let tags = split_dataset(&ids, cfg.split_ratios, derive_seed(cfg.seed, stream::SPLIT, 0))?;
    for (r, t) in records.iter_mut().zip(tags) {
        r.split = t;
    }
    let failures = records.iter().filter_map(|r| r.error.clone().map(|e| (r.id, e))).collect();
    let mut manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        asset_fingerprint: asset_fingerprint(&asset),
        width: cfg.width,
        height: cfg.height,
        background_depth: cfg.background_depth,
        global_seed: cfg.seed,
        complete: true,
        counts: Counts::default(),
        sequences: records,
    };
    manifest.refresh_counts();
    manifest.write(root)?;
    Ok(GenOutcome { manifest, failures })
}

fn run_job(ctx: &Context, job: &Job) -> SequenceRecord {
    let seed = derive_seed(ctx.cfg.seed, stream::SEQUENCE, job.id);
    let mut target = sample_target(ctx.asset, &ctx.cfg.bounds, seed);
    target.beta = sample_target(ctx.asset, &ctx.cfg.bounds, derive_seed(ctx.cfg.seed, stream::IDENTITY, job.identity)).beta;
    let spec = SequenceSpec { target, n: job.n, seed, allow_any_length: ctx.cfg.allow_any_length };
    let mut record = SequenceRecord {
        id: job.id,
        n: job.n,
        seed,
        split: Split::Train,
        complete: false,
        error: None,
        target: spec.target.clone(),
        frames: Vec::new(),
        head_frames: Vec::new(),
        depths: Vec::new(),
        flow_facial: Vec::new(),
        flow_head: Vec::new(),
        flow_expression: Vec::new(),
    };
    match write_sequence(ctx, &spec, &mut record) {
        Ok(()) => record.complete = true,
        Err(e) => {
            let _ = std::fs::remove_dir_all(ctx.cfg.output.join(sequence_dir(job.id)));
            for list in [
                &mut record.frames,
                &mut record.head_frames,
                &mut record.depths,
                &mut record.flow_facial,
                &mut record.flow_head,
                &mut record.flow_expression,
            ] {
                list.clear();
            }
            record.error = Some(format!("{}: {e}", e.kind()));
        }
    }
    record
}

fn write_sequence(ctx: &Context, spec: &SequenceSpec, record: &mut SequenceRecord) -> Result<()> {
    spec.validate(ctx.asset)?;
    let root = &ctx.cfg.output;
    let id = record.id;
    let dir = root.join(sequence_dir(id));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let background = match ctx.backgrounds.len() {
        0 => Background::Flat(ctx.cfg.background_color),
        k => {
            let pick = derive_seed(ctx.cfg.seed, stream::BACKGROUND, id) % k as u64;
            Background::Image(Arc::new(read_rgb(&ctx.backgrounds[pick as usize])?))
        }
    };
    let render_cfg = ctx.cfg.render_config(background);
    let cam = &ctx.camera;
    let n = spec.n;

    let mut facial = Vec::with_capacity(n);
    let mut renders: Vec<RenderOutput> = Vec::with_capacity(n);
    for t in 1..=n {
        let mesh = evaluate_model(ctx.asset, &facial_params(spec, t)?)?;
        let out = rasterize(&mesh, cam, &render_cfg)?;
        let (fp, dp) = (frame_path(id, t), depth_path(id, t));
        write_png(&out.frame, root.join(&fp))?;
        write_pfm(&out.depth, root.join(&dp))?;
        record.frames.push(fp);
        record.depths.push(dp);
        facial.push(mesh);
        renders.push(out);
    }
    for t in 1..n {
        let head = evaluate_model(ctx.asset, &head_params(spec, t + 1)?)?;
        let head_out = rasterize(&head, cam, &render_cfg)?;
        let hp = head_frame_path(id, t + 1);
        write_png(&head_out.frame, root.join(&hp))?;
        record.head_frames.push(hp);

        let (src, dst) = (&facial[t - 1], &facial[t]);
        let vis = &renders[t - 1].visibility;
        let ff = compute_flow(src, dst, cam, vis, Some(&renders[t].depth))?;
        let fh = compute_flow(src, &head, cam, vis, Some(&head_out.depth))?;
        let fe = ff.difference(&fh)?;
        for (kind, flow, list) in [
            ('f', &ff, &mut record.flow_facial),
            ('h', &fh, &mut record.flow_head),
            ('e', &fe, &mut record.flow_expression),
        ] {
            let p = flow_path(id, kind, t);
            write_flo(flow, root.join(&p))?;
            list.push(p);
        }
    }
    Ok(())
}
