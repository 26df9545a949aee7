#![allow(dead_code)]

use std::sync::OnceLock;

use faceflow::face_model::{make_synthetic_asset, FaceModelAsset, FaceParams};
use faceflow::flow::{compute_decomposed_flows, DecomposedFlows, Mask};
use faceflow::raster::{Camera, RenderConfig};
use faceflow::sequence::{sample_pair, sample_target, SampleBounds, SequenceSpec};

pub fn asset() -> &'static FaceModelAsset {
    static ASSET: OnceLock<FaceModelAsset> = OnceLock::new();
    ASSET.get_or_init(|| make_synthetic_asset(11, 2000, 4, 8).unwrap())
}

pub fn camera(size: usize) -> Camera {
    Camera::head_default(size, size).unwrap()
}

pub fn rigid_bounds() -> SampleBounds {
    SampleBounds { global_rotation: 0.08, neck_rotation: 0.05, jaw: 0.0, eye_rotation: 0.0, psi: 0.0, ..Default::default() }
}

pub fn target(bounds: &SampleBounds, seed: u64) -> FaceParams {
    sample_target(asset(), bounds, seed)
}

pub fn theta_norm(p: &FaceParams) -> f64 {
    p.theta.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn pair_flows(target: &FaceParams, n: usize, t: usize, size: usize) -> DecomposedFlows {
    let spec = SequenceSpec { target: target.clone(), n, seed: 0, allow_any_length: true };
    let sample = sample_pair(asset(), &spec, t).unwrap();
    compute_decomposed_flows(&sample, &camera(size), &RenderConfig::default()).unwrap()
}

/// Pixels covered by the source frame's visible surface.
pub fn face_mask(flows: &DecomposedFlows) -> Mask {
    let vis = &flows.source_render.visibility;
    Mask::new(vis.width, vis.height, vis.coverage_mask()).unwrap()
}
