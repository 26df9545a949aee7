//! Parameterized deformable head model: identity and expression blendshapes
//! followed by linear blend skinning over a small joint hierarchy.
//!
//! Joint 0 is the implicit global joint, pivoting about the template-space
//! origin. Joints `1..=k` carry explicit pivots in [`FaceModelAsset::joint_offsets`]
//! and a parent index into `0..j`. The synthetic asset uses `k = 4`
//! (neck, jaw, left eye, right eye) with tree global → neck → {jaw, eyes}.

mod asset_io;
mod synth;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, RigidTransform, Vec3};

pub use asset_io::{asset_fingerprint, decode_asset, encode_asset, load_asset, save_asset};
pub use synth::make_synthetic_asset;

/// Named joint slots of the standard four-joint hierarchy (after the global joint).
pub mod joints {
    pub const GLOBAL: usize = 0;
    pub const NECK: usize = 1;
    pub const JAW: usize = 2;
    pub const LEFT_EYE: usize = 3;
    pub const RIGHT_EYE: usize = 4;
}

/// Per-vertex facial region tag, stored as a `u8` in asset files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Region {
    Lips = 0,
    Forehead = 1,
    Cheeks = 2,
    Nose = 3,
    Eyes = 4,
    Other = 5,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::Lips,
        Region::Forehead,
        Region::Cheeks,
        Region::Nose,
        Region::Eyes,
        Region::Other,
    ];

    pub fn from_u8(v: u8) -> Option<Region> {
        Region::ALL.get(v as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Lips => "lips",
            Region::Forehead => "forehead",
            Region::Cheeks => "cheeks",
            Region::Nose => "nose",
            Region::Eyes => "eyes",
            Region::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Region> {
        Region::ALL.into_iter().find(|r| r.name() == s.trim().to_ascii_lowercase())
    }
}

/// Template mesh, blendshape bases and skinning rig.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceModelAsset {
    pub template_vertices: Vec<Vec3>,
    pub triangles: Arc<Vec<[u32; 3]>>,
    /// `shape_basis[a][v]` is the offset of vertex `v` for identity component `a`.
    pub shape_basis: Vec<Vec<Vec3>>,
    pub expression_basis: Vec<Vec<Vec3>>,
    /// Pivot of joints `1..=k` in template space.
    pub joint_offsets: Vec<Vec3>,
    /// Parent of joints `1..=k`; each entry must be smaller than the joint's own index.
    pub kinematic_tree: Vec<u32>,
    /// Row-major `n_v × (k + 1)`, column 0 is the global joint.
    pub skin_weights: Vec<f64>,
    pub region_labels: Vec<Region>,
    pub landmark_indices: Vec<u32>,
}

impl FaceModelAsset {
    pub fn num_vertices(&self) -> usize {
        self.template_vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_shape(&self) -> usize {
        self.shape_basis.len()
    }

    pub fn num_expression(&self) -> usize {
        self.expression_basis.len()
    }

    /// Number of non-global joints.
    pub fn num_joints(&self) -> usize {
        self.joint_offsets.len()
    }

    pub fn weights_row(&self, v: usize) -> &[f64] {
        let cols = self.num_joints() + 1;
        &self.skin_weights[v * cols..(v + 1) * cols]
    }

    pub fn zero_params(&self) -> FaceParams {
        FaceParams::zeros(self.num_shape(), self.num_expression(), self.num_joints())
    }

    pub fn template_mesh(&self) -> Mesh {
        Mesh {
            vertices: self.template_vertices.clone(),
            triangles: Arc::clone(&self.triangles),
        }
    }

    /// Checks every structural invariant; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let nv = self.num_vertices();
        let k = self.num_joints();
        if nv == 0 {
            return Err(Error::format("template_vertices", "empty template"));
        }
        if self.template_vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::format("template_vertices", "non-finite coordinate"));
        }
        for (i, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&ix| ix as usize >= nv) {
                return Err(Error::format("triangles", format!("triangle {i} index out of range")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::format("triangles", format!("triangle {i} is degenerate")));
            }
        }
        if self.shape_basis.is_empty() {
            return Err(Error::format("shape_basis", "at least one identity component required"));
        }
        if self.expression_basis.is_empty() {
            return Err(Error::format(
                "expression_basis",
                "at least one expression component required",
            ));
        }
        for (name, basis) in [("shape_basis", &self.shape_basis), ("expression_basis", &self.expression_basis)] {
            for (a, comp) in basis.iter().enumerate() {
                if comp.len() != nv {
                    return Err(Error::format(name, format!("component {a} has {} vertices, expected {nv}", comp.len())));
                }
                if comp.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::format(name, format!("component {a} is non-finite")));
                }
            }
        }
        if self.kinematic_tree.len() != k {
            return Err(Error::format("kinematic_tree", "length differs from joint count"));
        }
        for (i, &p) in self.kinematic_tree.iter().enumerate() {
            if p as usize > i {
                return Err(Error::format(
                    "kinematic_tree",
                    format!("joint {} has parent {p} that is not an ancestor slot", i + 1),
                ));
            }
        }
        if self.joint_offsets.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::format("joint_offsets", "non-finite pivot"));
        }
        if self.skin_weights.len() != nv * (k + 1) {
            return Err(Error::format("skin_weights", "size is not n_v × (k + 1)"));
        }
        for v in 0..nv {
            let row = self.weights_row(v);
            if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::format("skin_weights", format!("row {v} has a negative or non-finite weight")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::format("skin_weights", format!("row {v} sums to {sum}, expected 1")));
            }
        }
        if self.region_labels.len() != nv {
            return Err(Error::format("region_labels", "length differs from vertex count"));
        }
        if self.landmark_indices.iter().any(|&ix| ix as usize >= nv) {
            return Err(Error::format("landmark_indices", "index out of range"));
        }
        Ok(())
    }
}

/// Identity, expression and pose coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceParams {
    pub beta: Vec<f64>,
    pub psi: Vec<f64>,
    /// Axis-angle triples: global rotation first, then one per joint.
    pub theta: Vec<f64>,
}

impl FaceParams {
    pub fn zeros(n_beta: usize, n_psi: usize, k: usize) -> Self {
        FaceParams {
            beta: vec![0.0; n_beta],
            psi: vec![0.0; n_psi],
            theta: vec![0.0; 3 * k + 3],
        }
    }

    /// Axis-angle rotation of joint `j` (0 = global).
    pub fn joint_rotation(&self, j: usize) -> Vec3 {
        [self.theta[3 * j], self.theta[3 * j + 1], self.theta[3 * j + 2]]
    }

    pub fn set_joint_rotation(&mut self, j: usize, w: Vec3) {
        self.theta[3 * j..3 * j + 3].copy_from_slice(&w);
    }

    pub fn check_against(&self, asset: &FaceModelAsset) -> Result<()> {
        if self.beta.len() != asset.num_shape() {
            return Err(Error::Shape(format!(
                "beta has {} entries, asset has {} identity components",
                self.beta.len(),
                asset.num_shape()
            )));
        }
        if self.psi.len() != asset.num_expression() {
            return Err(Error::Shape(format!(
                "psi has {} entries, asset has {} expression components",
                self.psi.len(),
                asset.num_expression()
            )));
        }
        let want = 3 * asset.num_joints() + 3;
        if self.theta.len() != want {
            return Err(Error::Shape(format!("theta has {} entries, expected {want}", self.theta.len())));
        }
        if self.beta.iter().chain(&self.psi).chain(&self.theta).any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite face parameter".into()));
        }
        Ok(())
    }
}

/// Posed vertex positions sharing the asset's triangle list.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Arc<Vec<[u32; 3]>>,
}

impl Mesh {
    pub fn same_topology(&self, other: &Mesh) -> bool {
        self.vertices.len() == other.vertices.len()
            && (Arc::ptr_eq(&self.triangles, &other.triangles) || self.triangles == other.triangles)
    }

    pub fn is_finite(&self) -> bool {
        self.vertices.iter().flatten().all(|c| c.is_finite())
    }
}

/// Identity and expression blendshapes applied to the template, before skinning.
pub fn shaped_vertices(asset: &FaceModelAsset, params: &FaceParams) -> Vec<Vec3> {
    let mut out = asset.template_vertices.clone();
    for (coef, comp) in params.beta.iter().zip(&asset.shape_basis).chain(params.psi.iter().zip(&asset.expression_basis)) {
        if *coef == 0.0 {
            continue;
        }
        for (v, d) in out.iter_mut().zip(comp) {
            *v = math::add(*v, math::scale(*d, *coef));
        }
    }
    out
}

/// Skinning transforms for joints `0..=k`, composed parent-then-child.
pub fn joint_transforms(asset: &FaceModelAsset, params: &FaceParams) -> Vec<RigidTransform> {
    let k = asset.num_joints();
    let mut world = Vec::with_capacity(k + 1);
    world.push(RigidTransform::about_pivot(
        math::axis_angle_to_matrix(params.joint_rotation(0)),
        [0.0; 3],
    ));
    for j in 1..=k {
        let local = RigidTransform::about_pivot(
            math::axis_angle_to_matrix(params.joint_rotation(j)),
            asset.joint_offsets[j - 1],
        );
        let parent = asset.kinematic_tree[j - 1] as usize;
        world.push(world[parent].compose(&local));
    }
    world
}

/// Evaluates the model: blendshapes, then linear blend skinning.
///
/// Posed vertices are accumulated as `v + Σ_j w_j (G_j v - v)`, so zero pose
/// reproduces the shaped vertices bitwise regardless of weight rounding.
pub fn evaluate_model(asset: &FaceModelAsset, params: &FaceParams) -> Result<Mesh> {
    params.check_against(asset)?;
    let shaped = shaped_vertices(asset, params);
    let transforms = joint_transforms(asset, params);
    let vertices = shaped
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let row = asset.weights_row(i);
            let mut offset = [0.0; 3];
            for (w, g) in row.iter().zip(&transforms) {
                if *w == 0.0 {
                    continue;
                }
                let d = math::sub(g.apply(v), v);
                offset = math::add(offset, math::scale(d, *w));
            }
            math::add(v, offset)
        })
        .collect();
    Ok(Mesh {
        vertices,
        triangles: Arc::clone(&asset.triangles),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asset() -> FaceModelAsset {
        make_synthetic_asset(3, 300, 3, 5).unwrap()
    }

    #[test]
    fn zero_params_reproduce_template_exactly() {
        let a = asset();
        let m = evaluate_model(&a, &a.zero_params()).unwrap();
        assert_eq!(m.vertices, a.template_vertices);
    }

    #[test]
    fn unit_beta_adds_first_shape_component_exactly() {
        let a = asset();
        let mut p = a.zero_params();
        p.beta[0] = 1.0;
        let m = evaluate_model(&a, &p).unwrap();
        for (i, v) in m.vertices.iter().enumerate() {
            assert_eq!(*v, math::add(a.template_vertices[i], a.shape_basis[0][i]));
        }
    }

    #[test]
    fn global_rotation_is_rigid_about_origin() {
        let a = asset();
        let w = [0.2, -0.1, 0.05];
        let mut p = a.zero_params();
        p.set_joint_rotation(joints::GLOBAL, w);
        let m = evaluate_model(&a, &p).unwrap();
        let r = math::axis_angle_to_matrix(w);
        for (posed, tpl) in m.vertices.iter().zip(&a.template_vertices) {
            let expect = math::mat_vec(&r, *tpl);
            for c in 0..3 {
                assert!((posed[c] - expect[c]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rejects_wrong_theta_length() {
        let a = asset();
        let mut p = a.zero_params();
        p.theta.pop();
        assert!(matches!(evaluate_model(&a, &p), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_non_finite_params() {
        let a = asset();
        let mut p = a.zero_params();
        p.psi[0] = f64::NAN;
        assert!(matches!(evaluate_model(&a, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn region_parse_round_trips_names() {
        for r in Region::ALL {
            assert_eq!(Region::parse(r.name()), Some(r));
            assert_eq!(Region::from_u8(r as u8), Some(r));
        }
        assert_eq!(Region::from_u8(6), None);
    }
}
