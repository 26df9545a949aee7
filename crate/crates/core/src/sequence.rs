//! Paired facial / head mesh sequences by linear parameter interpolation.
//!
//! Frame `t` of an `n`-frame clip uses pose and expression scaled by `t / n`
//! (frame 0 is the neutral pose, frame `n` hits the target exactly). Pair
//! `t ∈ [1, n-1]` couples facial frame `t` with facial frame `t + 1` and with
//! head frame `t + 1`, which advances the pose but keeps frame `t`'s expression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::face_model::{evaluate_model, joints, FaceModelAsset, FaceParams, Mesh};
use crate::math::{self, Vec3};

/// Clip lengths used for bulk generation.
pub const STANDARD_LENGTHS: [usize; 4] = [5, 10, 15, 20];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub target: FaceParams,
    pub n: usize,
    pub seed: u64,
    /// Permits any `n >= 2` instead of only the standard lengths.
    #[serde(default)]
    pub allow_any_length: bool,
}

impl SequenceSpec {
    pub fn new(target: FaceParams, n: usize, seed: u64) -> Self {
        SequenceSpec { target, n, seed, allow_any_length: false }
    }

    pub fn validate(&self, asset: &FaceModelAsset) -> Result<()> {
        if self.allow_any_length {
            if self.n < 2 {
                return Err(Error::Domain(format!("sequence length {} < 2", self.n)));
            }
        } else if !STANDARD_LENGTHS.contains(&self.n) {
            return Err(Error::Domain(format!(
                "sequence length {} not in {STANDARD_LENGTHS:?} (enable allow_any_length to override)",
                self.n
            )));
        }
        self.target.check_against(asset)
    }

    /// Number of frame pairs in the clip.
    pub fn num_pairs(&self) -> usize {
        self.n - 1
    }
}

/// Facial source, facial target and head target meshes for pair `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshPairSample {
    pub t: usize,
    pub source: Mesh,
    pub facial_target: Mesh,
    pub head_target: Mesh,
}

/// `target * (t / n)`, with exact endpoints at `t = 0` and `t = n`.
fn interpolate(target: &[f64], t: usize, n: usize) -> Vec<f64> {
    if t == 0 {
        vec![0.0; target.len()]
    } else if t == n {
        target.to_vec()
    } else {
        let frac = t as f64 / n as f64;
        target.iter().map(|x| x * frac).collect()
    }
}

fn params_at(spec: &SequenceSpec, pose_step: usize, expr_step: usize) -> FaceParams {
    FaceParams {
        beta: spec.target.beta.clone(),
        theta: interpolate(&spec.target.theta, pose_step, spec.n),
        psi: interpolate(&spec.target.psi, expr_step, spec.n),
    }
}

pub fn facial_params(spec: &SequenceSpec, t: usize) -> Result<FaceParams> {
    if t > spec.n {
        return Err(Error::Domain(format!("frame {t} outside [0, {}]", spec.n)));
    }
    Ok(params_at(spec, t, t))
}

pub fn head_params(spec: &SequenceSpec, t_plus_1: usize) -> Result<FaceParams> {
    if t_plus_1 < 1 || t_plus_1 > spec.n {
        return Err(Error::Domain(format!("head frame {t_plus_1} outside [1, {}]", spec.n)));
    }
    Ok(params_at(spec, t_plus_1, t_plus_1 - 1))
}

pub fn facial_mesh(asset: &FaceModelAsset, spec: &SequenceSpec, t: usize) -> Result<Mesh> {
    evaluate_model(asset, &facial_params(spec, t)?)
}

pub fn head_mesh(asset: &FaceModelAsset, spec: &SequenceSpec, t_plus_1: usize) -> Result<Mesh> {
    evaluate_model(asset, &head_params(spec, t_plus_1)?)
}

/// Pair `t` of the clip (`1 <= t <= n - 1`).
pub fn sample_pair(asset: &FaceModelAsset, spec: &SequenceSpec, t: usize) -> Result<MeshPairSample> {
    if t < 1 || t >= spec.n {
        return Err(Error::Domain(format!("pair index {t} outside [1, {}]", spec.n - 1)));
    }
    Ok(MeshPairSample {
        t,
        source: facial_mesh(asset, spec, t)?,
        facial_target: facial_mesh(asset, spec, t + 1)?,
        head_target: head_mesh(asset, spec, t + 1)?,
    })
}

/// All `n - 1` pairs in order of `t`.
pub fn generate_sequence(asset: &FaceModelAsset, spec: &SequenceSpec) -> Result<Vec<MeshPairSample>> {
    spec.validate(asset)?;
    // Facial frames are shared between consecutive pairs; evaluate each once.
    let facial: Vec<Mesh> = (1..=spec.n).map(|t| facial_mesh(asset, spec, t)).collect::<Result<_>>()?;
    (1..spec.n)
        .map(|t| {
            Ok(MeshPairSample {
                t,
                source: facial[t - 1].clone(),
                facial_target: facial[t].clone(),
                head_target: head_mesh(asset, spec, t + 1)?,
            })
        })
        .collect()
}

/// Per-component bounds for random target parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleBounds {
    /// Max angle of the global rotation (radians).
    pub global_rotation: f64,
    pub neck_rotation: f64,
    /// Jaw opening range `[0, jaw]` about the x axis.
    pub jaw: f64,
    pub eye_rotation: f64,
    pub beta: f64,
    pub psi: f64,
}

impl Default for SampleBounds {
    fn default() -> Self {
        SampleBounds {
            global_rotation: 0.3,
            neck_rotation: 0.15,
            jaw: 0.4,
            eye_rotation: 0.0,
            beta: 2.0,
            psi: 1.5,
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Vec3 {
    if max_angle <= 0.0 {
        return [0.0; 3];
    }
    // uniform direction on the sphere
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    let angle = rng.gen_range(0.0..max_angle);
    math::scale([r * phi.cos(), r * phi.sin(), z], angle)
}

fn symmetric(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    if bound <= 0.0 {
        0.0
    } else {
        rng.gen_range(-bound..=bound)
    }
}

/// Draws target parameters uniformly within `bounds`, deterministically from `seed`.
pub fn sample_target(asset: &FaceModelAsset, bounds: &SampleBounds, seed: u64) -> FaceParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = asset.zero_params();
    for b in p.beta.iter_mut() {
        *b = symmetric(&mut rng, bounds.beta);
    }
    p.set_joint_rotation(joints::GLOBAL, random_rotation(&mut rng, bounds.global_rotation));
    let k = asset.num_joints();
    if k >= joints::NECK {
        p.set_joint_rotation(joints::NECK, random_rotation(&mut rng, bounds.neck_rotation));
    }
    if k >= joints::JAW {
        let open = if bounds.jaw > 0.0 { rng.gen_range(0.0..bounds.jaw) } else { 0.0 };
        p.set_joint_rotation(joints::JAW, [open, 0.0, 0.0]);
    }
    for j in joints::LEFT_EYE..=k {
        p.set_joint_rotation(j, random_rotation(&mut rng, bounds.eye_rotation));
    }
    for x in p.psi.iter_mut() {
        *x = symmetric(&mut rng, bounds.psi);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face_model::make_synthetic_asset;

    fn setup() -> (FaceModelAsset, FaceParams) {
        let asset = make_synthetic_asset(2, 200, 3, 6).unwrap();
        let target = sample_target(&asset, &SampleBounds::default(), 99);
        (asset, target)
    }

    #[test]
    fn endpoints_are_anchored() {
        let (asset, target) = setup();
        let spec = SequenceSpec::new(target.clone(), 10, 0);
        let first = facial_params(&spec, 0).unwrap();
        assert_eq!(first.beta, target.beta);
        assert!(first.theta.iter().chain(&first.psi).all(|&x| x == 0.0));
        assert_eq!(facial_params(&spec, 10).unwrap(), target);
        assert_eq!(
            facial_mesh(&asset, &spec, 10).unwrap(),
            evaluate_model(&asset, &target).unwrap()
        );
    }

    #[test]
    fn midpoint_halves_targets() {
        let (_, target) = setup();
        let spec = SequenceSpec::new(target.clone(), 10, 0);
        let mid = facial_params(&spec, 5).unwrap();
        for (m, t) in mid.theta.iter().zip(&target.theta) {
            assert_eq!(*m, t / 2.0);
        }
        for (m, t) in mid.psi.iter().zip(&target.psi) {
            assert_eq!(*m, t / 2.0);
        }
    }

    #[test]
    fn head_params_freeze_expression() {
        let (_, target) = setup();
        let spec = SequenceSpec::new(target.clone(), 5, 0);
        let h = head_params(&spec, 3).unwrap();
        for (a, b) in h.theta.iter().zip(&target.theta) {
            assert!((a - 3.0 * b / 5.0).abs() <= 1e-15);
        }
        for (a, b) in h.psi.iter().zip(&target.psi) {
            assert!((a - 2.0 * b / 5.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn head_equals_facial_without_expression() {
        let (asset, mut target) = setup();
        target.psi.iter_mut().for_each(|x| *x = 0.0);
        let spec = SequenceSpec::new(target, 15, 0);
        for t in 1..15 {
            assert_eq!(head_mesh(&asset, &spec, t + 1).unwrap(), facial_mesh(&asset, &spec, t + 1).unwrap());
        }
    }

    #[test]
    fn head_equals_previous_facial_without_pose() {
        let (asset, mut target) = setup();
        target.theta.iter_mut().for_each(|x| *x = 0.0);
        let spec = SequenceSpec::new(target, 20, 0);
        for t in 1..20 {
            assert_eq!(head_mesh(&asset, &spec, t + 1).unwrap(), facial_mesh(&asset, &spec, t).unwrap());
        }
    }

    #[test]
    fn sequence_has_n_minus_one_pairs() {
        let (asset, target) = setup();
        let spec = SequenceSpec::new(target, 5, 0);
        let seq = generate_sequence(&asset, &spec).unwrap();
        assert_eq!(seq.len(), 4);
        for s in &seq {
            assert_eq!(s, &sample_pair(&asset, &spec, s.t).unwrap());
        }
        assert_eq!(generate_sequence(&asset, &spec).unwrap(), seq);
    }

    #[test]
    fn zero_targets_stay_on_template() {
        let (asset, _) = setup();
        let spec = SequenceSpec::new(asset.zero_params(), 5, 0);
        for s in generate_sequence(&asset, &spec).unwrap() {
            for m in [&s.source, &s.facial_target, &s.head_target] {
                assert_eq!(m.vertices, asset.template_vertices);
            }
        }
    }

    #[test]
    fn length_validation() {
        let (asset, target) = setup();
        let mut spec = SequenceSpec::new(target, 7, 0);
        assert!(matches!(generate_sequence(&asset, &spec), Err(Error::Domain(_))));
        spec.allow_any_length = true;
        assert_eq!(generate_sequence(&asset, &spec).unwrap().len(), 6);
        spec.n = 1;
        assert!(spec.validate(&asset).is_err());
    }

    #[test]
    fn out_of_range_frames_are_rejected() {
        let (asset, target) = setup();
        let spec = SequenceSpec::new(target, 5, 0);
        assert!(facial_mesh(&asset, &spec, 6).is_err());
        assert!(head_mesh(&asset, &spec, 0).is_err());
        assert!(head_mesh(&asset, &spec, 6).is_err());
        assert!(sample_pair(&asset, &spec, 0).is_err());
        assert!(sample_pair(&asset, &spec, 5).is_err());
    }

    #[test]
    fn sampled_targets_respect_bounds() {
        let (asset, _) = setup();
        let bounds = SampleBounds::default();
        for seed in 0..50 {
            let p = sample_target(&asset, &bounds, seed);
            assert!(math::norm(p.joint_rotation(joints::GLOBAL)) <= bounds.global_rotation);
            let jaw = p.joint_rotation(joints::JAW)[0];
            assert!((0.0..=bounds.jaw).contains(&jaw));
            assert!(p.psi.iter().all(|x| x.abs() <= bounds.psi));
            assert_eq!(p, sample_target(&asset, &bounds, seed));
        }
    }
}
