//! Dense flow fields and ground-truth flow from mesh correspondence.

use crate::error::{Error, Result};
use crate::face_model::Mesh;
use crate::math::{self, Vec3};
use crate::raster::{rasterize, Camera, DepthMap, RenderConfig, RenderOutput, VisibilityBuffer};
use crate::sequence::MeshPairSample;

/// Middlebury sentinel for unknown flow; stored at every invalid pixel.
pub const UNKNOWN_FLOW: f32 = 1.0e10;
/// Components above this magnitude are read back as invalid.
pub const UNKNOWN_FLOW_THRESHOLD: f32 = 1.0e9;

/// Per-pixel boolean selection, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Mask> {
        if bits.len() != width * height {
            return Err(Error::Shape(format!("mask has {} entries for {width}x{height}", bits.len())));
        }
        Ok(Mask { width, height, bits })
    }

    pub fn full(width: usize, height: usize) -> Mask {
        Mask { width, height, bits: vec![true; width * height] }
    }

    pub fn empty(width: usize, height: usize) -> Mask {
        Mask { width, height, bits: vec![false; width * height] }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::Shape("mask dimensions differ".into()));
        }
        Ok(Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        })
    }
}

/// Per-pixel `(u, v)` displacement in pixels with a validity mask.
///
/// Invalid pixels always hold [`UNKNOWN_FLOW`], so two fields compare equal
/// exactly when their masks and valid vectors agree.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 2]>,
    pub valid: Vec<bool>,
    /// Pixels whose target surface point is hidden in the target frame.
    pub occlusion: Option<Vec<bool>>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> FlowField {
        FlowField {
            width,
            height,
            data: vec![[0.0; 2]; width * height],
            valid: vec![true; width * height],
            occlusion: None,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 2]) -> FlowField {
        let mut out = FlowField::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                out.data[y * width + x] = f(x, y);
            }
        }
        out
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.data[self.index(x, y)]
    }

    pub fn set_invalid(&mut self, idx: usize) {
        self.valid[idx] = false;
        self.data[idx] = [UNKNOWN_FLOW; 2];
    }

    pub fn valid_mask(&self) -> Mask {
        Mask { width: self.width, height: self.height, bits: self.valid.clone() }
    }

    pub fn same_size(&self, other: &FlowField) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Largest `|u|` or `|v|` over valid pixels.
    pub fn max_abs(&self) -> f32 {
        self.data
            .iter()
            .zip(&self.valid)
            .filter(|(_, v)| **v)
            .map(|(d, _)| d[0].abs().max(d[1].abs()))
            .fold(0.0, f32::max)
    }

    /// Mean vector magnitude over pixels selected by `mask` and valid.
    pub fn mean_magnitude(&self, mask: &Mask) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for ((d, v), m) in self.data.iter().zip(&self.valid).zip(&mask.bits) {
            if *v && *m {
                sum += (d[0] as f64).hypot(d[1] as f64);
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Pixelwise `self - other` on the shared validity mask.
    pub fn difference(&self, other: &FlowField) -> Result<FlowField> {
        if !self.same_size(other) {
            return Err(Error::Shape("flow dimensions differ".into()));
        }
        let mut out = FlowField::zeros(self.width, self.height);
        for i in 0..self.data.len() {
            if self.valid[i] && other.valid[i] {
                out.data[i] = [self.data[i][0] - other.data[i][0], self.data[i][1] - other.data[i][1]];
            } else {
                out.set_invalid(i);
            }
        }
        Ok(out)
    }
}

/// Occlusion tolerance: `1e-3` of the camera-frame depth range of `mesh`.
pub fn occlusion_tolerance(mesh: &Mesh, camera: &Camera) -> f64 {
    let (lo, hi) = mesh
        .vertices
        .iter()
        .map(|&p| camera.to_camera(p)[2])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z), hi.max(z)));
    if lo.is_finite() && hi.is_finite() {
        1e-3 * (hi - lo)
    } else {
        0.0
    }
}

/// Forward flow from `source_mesh` to `target_mesh` at every pixel of
/// `source_visibility`.
///
/// Covered pixels carry the projected displacement of their surface point;
/// background pixels are static and valid with zero flow. When
/// `target_depth` is supplied an occlusion mask is attached, flagging pixels
/// whose moved point lies behind the target frame's visible surface (or
/// leaves the image).
pub fn compute_flow(
    source_mesh: &Mesh,
    target_mesh: &Mesh,
    camera: &Camera,
    source_visibility: &VisibilityBuffer,
    target_depth: Option<&DepthMap>,
) -> Result<FlowField> {
    if !source_mesh.same_topology(target_mesh) {
        return Err(Error::Shape("source and target meshes differ in topology".into()));
    }
    let (w, h) = (camera.width, camera.height);
    if source_visibility.width != w || source_visibility.height != h {
        return Err(Error::Shape("visibility buffer size differs from camera image size".into()));
    }
    if let Some(d) = target_depth {
        if d.width != w || d.height != h {
            return Err(Error::Shape("target depth size differs from camera image size".into()));
        }
    }
    let eps_z = occlusion_tolerance(target_mesh, camera);

    let mut flow = FlowField::zeros(w, h);
    let mut occlusion = target_depth.map(|_| vec![false; w * h]);
    for idx in 0..w * h {
        let Some(tri) = source_visibility.covered(idx) else {
            continue;
        };
        let vi = source_mesh.triangles[tri as usize];
        let src: [Vec3; 3] = vi.map(|i| source_mesh.vertices[i as usize]);
        let dst: [Vec3; 3] = vi.map(|i| target_mesh.vertices[i as usize]);
        if src == dst {
            // unmoved triangle: exactly zero motion, never occluded by itself
            continue;
        }
        let b = source_visibility.barycentric[idx];
        let mut moved = [0.0; 3];
        for k in 0..3 {
            moved = math::add(moved, math::scale(dst[k], b[k]));
        }
        let pc = camera.to_camera(moved);
        if !(pc[2] > 0.0) {
            flow.set_invalid(idx);
            continue;
        }
        let uv = camera.project_camera_point(pc);
        let (x, y) = (idx % w, idx / w);
        let du = uv[0] - (x as f64 + 0.5);
        let dv = uv[1] - (y as f64 + 0.5);
        if !(du.is_finite() && dv.is_finite()) {
            flow.set_invalid(idx);
            continue;
        }
        flow.data[idx] = [du as f32, dv as f32];
        if let (Some(occ), Some(depth)) = (occlusion.as_mut(), target_depth) {
            let inside = uv[0] >= 0.0 && uv[1] >= 0.0 && uv[0] < w as f64 && uv[1] < h as f64;
            occ[idx] = !inside || pc[2] > depth.get(uv[0] as usize, uv[1] as usize) as f64 + eps_z;
        }
    }
    flow.occlusion = occlusion;
    Ok(flow)
}

/// Ground-truth labels and renders for one frame pair.
#[derive(Debug, Clone)]
pub struct DecomposedFlows {
    pub facial: FlowField,
    pub head: FlowField,
    pub expression: FlowField,
    pub source_render: RenderOutput,
    pub facial_target_render: RenderOutput,
    pub head_target_render: RenderOutput,
}

/// Facial, head and expression flow for a pair, all sharing one source visibility.
pub fn compute_decomposed_flows(sample: &MeshPairSample, camera: &Camera, config: &RenderConfig) -> Result<DecomposedFlows> {
    if !sample.source.same_topology(&sample.facial_target) || !sample.source.same_topology(&sample.head_target) {
        return Err(Error::Shape("sample meshes differ in topology".into()));
    }
    let source_render = rasterize(&sample.source, camera, config)?;
    let facial_target_render = rasterize(&sample.facial_target, camera, config)?;
    let head_target_render = rasterize(&sample.head_target, camera, config)?;
    let vis = &source_render.visibility;
    let facial = compute_flow(&sample.source, &sample.facial_target, camera, vis, Some(&facial_target_render.depth))?;
    let head = compute_flow(&sample.source, &sample.head_target, camera, vis, Some(&head_target_render.depth))?;
    let mut expression = facial.difference(&head)?;
    // Expression motion is hidden wherever the facial target point is hidden.
    expression.occlusion = facial.occlusion.clone();
    Ok(DecomposedFlows { facial, head, expression, source_render, facial_target_render, head_target_render })
}
