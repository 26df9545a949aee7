//! Procedural desk-scale head model.
//!
//! The template is a perturbed ellipsoid (y up, face toward +z) triangulated
//! from latitude rings, so any vertex count `>= 12` is met exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{FaceModelAsset, Region};
use crate::error::{Error, Result};
use crate::math::{self, Vec3};

/// Semi-axes of the head ellipsoid in length units (x, y, z).
pub(crate) const HEAD_AXES: Vec3 = [0.075, 0.11, 0.095];

const SHAPE_AMPLITUDE: f64 = 0.004;
const EXPRESSION_AMPLITUDE: f64 = 0.006;

/// Localized expression prototype: Gaussian bumps on the face front.
struct ExpressionPrototype {
    /// (ξ, η) centers in normalized face coordinates with a per-center direction.
    bumps: &'static [([f64; 2], Vec3)],
    sigma: f64,
}

const PROTOTYPES: [ExpressionPrototype; 8] = [
    // jaw drop / lower lip down
    ExpressionPrototype { bumps: &[([0.0, -0.47], [0.0, -1.0, 0.0])], sigma: 0.18 },
    // smile: mouth corners out and up
    ExpressionPrototype {
        bumps: &[([0.3, -0.38], [0.5, 0.75, 0.2]), ([-0.3, -0.38], [-0.5, 0.75, 0.2])],
        sigma: 0.12,
    },
    // brow raise
    ExpressionPrototype {
        bumps: &[([0.3, 0.45], [0.0, 1.0, 0.0]), ([-0.3, 0.45], [0.0, 1.0, 0.0])],
        sigma: 0.15,
    },
    // eyelid close
    ExpressionPrototype {
        bumps: &[([0.34, 0.24], [0.0, -1.0, 0.1]), ([-0.34, 0.24], [0.0, -1.0, 0.1])],
        sigma: 0.07,
    },
    // lip pucker
    ExpressionPrototype { bumps: &[([0.0, -0.38], [0.0, 0.0, 1.0])], sigma: 0.13 },
    // inner brow lower
    ExpressionPrototype {
        bumps: &[([0.12, 0.4], [-0.5, -0.6, 0.0]), ([-0.12, 0.4], [0.5, -0.6, 0.0])],
        sigma: 0.1,
    },
    // cheek puff
    ExpressionPrototype {
        bumps: &[([0.55, -0.2], [0.7, 0.0, 0.7]), ([-0.55, -0.2], [-0.7, 0.0, 0.7])],
        sigma: 0.15,
    },
    // upper lip raise
    ExpressionPrototype { bumps: &[([0.0, -0.29], [0.0, 1.0, 0.0])], sigma: 0.1 },
];

const LANDMARKS: [[f64; 2]; 15] = [
    [0.3, 0.45],
    [-0.3, 0.45],
    [0.15, 0.22],
    [0.55, 0.22],
    [-0.15, 0.22],
    [-0.55, 0.22],
    [0.0, -0.1],
    [0.3, -0.38],
    [-0.3, -0.38],
    [0.0, -0.3],
    [0.0, -0.47],
    [0.0, -0.7],
    [0.6, -0.3],
    [-0.6, -0.3],
    [0.0, 0.6],
];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn smoothstep(lo: f64, hi: f64, x: f64) -> f64 {
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Ring sizes (excluding the two poles) summing exactly to `total`.
fn ring_counts(total: usize) -> Vec<usize> {
    let rings = (((total as f64) / 2.0).sqrt().round() as usize).clamp(1, total / 3);
    let lat: Vec<f64> = (0..rings).map(|r| (PI * (r + 1) as f64 / (rings + 1) as f64).sin()).collect();
    let spare = total - 3 * rings;
    let lat_sum: f64 = lat.iter().sum();
    let quotas: Vec<f64> = lat.iter().map(|w| spare as f64 * w / lat_sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| 3 + q.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..rings).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &r in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[r] += 1;
        left -= 1;
    }
    counts
}

/// Unit directions of all vertices and the ring-zipper triangulation.
fn sphere_topology(n_v: usize) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let counts = ring_counts(n_v - 2);
    let rings = counts.len();
    let mut dirs = vec![[0.0, 1.0, 0.0]];
    let mut ring_start = Vec::with_capacity(rings);
    let mut ring_phase = Vec::with_capacity(rings);
    for (r, &count) in counts.iter().enumerate() {
        let phi = PI * (r + 1) as f64 / (rings + 1) as f64;
        let phase = if r % 2 == 1 { 0.5 } else { 0.0 };
        ring_start.push(dirs.len());
        ring_phase.push(phase);
        for i in 0..count {
            let alpha = 2.0 * PI * (i as f64 + phase) / count as f64;
            dirs.push([phi.sin() * alpha.cos(), phi.cos(), phi.sin() * alpha.sin()]);
        }
    }
    dirs.push([0.0, -1.0, 0.0]);
    let bottom = (dirs.len() - 1) as u32;

    let mut tris = Vec::with_capacity(2 * n_v);
    let first = counts[0];
    for i in 0..first {
        tris.push([0, (ring_start[0] + i) as u32, (ring_start[0] + (i + 1) % first) as u32]);
    }
    for r in 0..rings - 1 {
        let (na, nb) = (counts[r], counts[r + 1]);
        let (sa, sb) = (ring_start[r], ring_start[r + 1]);
        let angle_a = |i: usize| (i as f64 + ring_phase[r]) / na as f64;
        let angle_b = |j: usize| (j as f64 + ring_phase[r + 1]) / nb as f64;
        let (mut i, mut j) = (0, 0);
        while i < na || j < nb {
            let a = (sa + i % na) as u32;
            let b = (sb + j % nb) as u32;
            if i < na && (j == nb || angle_a(i + 1) <= angle_b(j + 1)) {
                tris.push([a, b, (sa + (i + 1) % na) as u32]);
                i += 1;
            } else {
                tris.push([a, b, (sb + (j + 1) % nb) as u32]);
                j += 1;
            }
        }
    }
    let last = counts[rings - 1];
    let sl = ring_start[rings - 1];
    for i in 0..last {
        tris.push([bottom, (sl + (i + 1) % last) as u32, (sl + i) as u32]);
    }
    (dirs, tris)
}

fn classify(d: Vec3) -> Region {
    let (xi, eta, zeta) = (d[0], d[1], d[2]);
    let ax = xi.abs();
    if zeta > 0.5 && ax < 0.35 && (-0.55..=-0.28).contains(&eta) {
        Region::Lips
    } else if zeta > 0.6 && ax < 0.15 && eta > -0.28 && eta < 0.08 {
        Region::Nose
    } else if zeta > 0.5 && (0.15..=0.6).contains(&ax) && (0.08..=0.35).contains(&eta) {
        Region::Eyes
    } else if zeta > 0.3 && eta > 0.4 {
        Region::Forehead
    } else if zeta > 0.2 && (0.2..=0.9).contains(&ax) && (-0.55..0.08).contains(&eta) {
        Region::Cheeks
    } else {
        Region::Other
    }
}

/// Low-order polynomial features of a unit direction.
fn poly_features(d: Vec3) -> [f64; 10] {
    let [x, y, z] = d;
    [1.0, x, y, z, x * x, y * y, z * z, x * y, y * z, x * z]
}

/// Builds a deterministic head-like asset from `seed`.
pub fn make_synthetic_asset(seed: u64, n_v: usize, n_beta: usize, n_psi: usize) -> Result<FaceModelAsset> {
    if n_v < 12 {
        return Err(Error::Domain(format!("n_v must be >= 12, got {n_v}")));
    }
    if n_beta < 1 || n_psi < 1 {
        return Err(Error::Domain("at least one identity and one expression component required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dirs, mut triangles) = sphere_topology(n_v);

    // Seeded low-frequency radial perturbation keeps identities distinct per seed.
    let bump: Vec<f64> = (0..10).map(|_| 0.015 * rng.sample::<f64, _>(StandardNormal)).collect();
    let [ax, ay, az] = HEAD_AXES;
    let template: Vec<Vec3> = dirs
        .iter()
        .map(|&d| {
            let feats = poly_features(d);
            let mut radial = 1.0 + feats.iter().zip(&bump).map(|(f, c)| f * c).sum::<f64>();
            // nose and chin
            let front = smoothstep(0.2, 0.8, d[2]);
            radial += 0.16 * front * (-(d[0] * d[0]) / 0.012 - (d[1] + 0.1).powi(2) / 0.03).exp();
            radial += 0.05 * front * (-(d[0] * d[0]) / 0.05 - (d[1] + 0.72).powi(2) / 0.02).exp();
            [d[0] * ax * radial, d[1] * ay * radial, d[2] * az * radial]
        })
        .collect();

    for tri in triangles.iter_mut() {
        let [p0, p1, p2] = tri.map(|i| template[i as usize]);
        let n = math::cross(math::sub(p1, p0), math::sub(p2, p0));
        let centroid = math::scale(math::add(math::add(p0, p1), p2), 1.0 / 3.0);
        if math::dot(n, centroid) < 0.0 {
            tri.swap(1, 2);
        }
    }

    let normals: Vec<Vec3> = template.iter().map(|&p| math::normalize(p)).collect();

    let shape_basis = (0..n_beta)
        .map(|_| {
            let coefs: Vec<f64> = (0..10).map(|_| rng.sample::<f64, _>(StandardNormal) / 10f64.sqrt()).collect();
            dirs.iter()
                .zip(&normals)
                .map(|(&d, &n)| {
                    let f: f64 = poly_features(d).iter().zip(&coefs).map(|(a, b)| a * b).sum();
                    math::scale(n, SHAPE_AMPLITUDE * f)
                })
                .collect()
        })
        .collect();

    let expression_basis = (0..n_psi)
        .map(|b| {
            let proto = &PROTOTYPES[b % PROTOTYPES.len()];
            let gain: f64 = rng.gen_range(0.8..1.2);
            let sides: Vec<f64> = proto.bumps.iter().map(|_| rng.gen_range(0.85..1.15)).collect();
            dirs.iter()
                .map(|&d| {
                    let front = smoothstep(0.0, 0.5, d[2]);
                    if front == 0.0 {
                        return [0.0; 3];
                    }
                    let mut off = [0.0; 3];
                    for ((center, dir), side) in proto.bumps.iter().zip(&sides) {
                        let r2 = (d[0] - center[0]).powi(2) + (d[1] - center[1]).powi(2);
                        let g = (-r2 / (2.0 * proto.sigma * proto.sigma)).exp();
                        off = math::add(off, math::scale(math::normalize(*dir), g * side));
                    }
                    math::scale(off, EXPRESSION_AMPLITUDE * gain * front)
                })
                .collect()
        })
        .collect();

    let joint_offsets = vec![
        [0.0, -0.85 * ay, -0.1 * az],
        [0.0, -0.1 * ay, -0.3 * az],
        [0.38 * ax, 0.2 * ay, 0.55 * az],
        [-0.38 * ax, 0.2 * ay, 0.55 * az],
    ];
    let kinematic_tree = vec![0, 1, 1, 1];

    let eye_sigma2 = (0.25 * ax).powi(2);
    let mut skin_weights = Vec::with_capacity(n_v * 5);
    for (d, p) in dirs.iter().zip(&template) {
        let neck = 2.0 * sigmoid((-d[1] - 0.6) / 0.08);
        let jaw = 4.0 * sigmoid((-d[1] - 0.38) / 0.05) * sigmoid((d[2] + 0.1) / 0.15) * (1.0 - sigmoid((-d[1] - 0.8) / 0.05));
        let eye = |c: Vec3| {
            let r = math::sub(*p, c);
            3.0 * (-math::dot(r, r) / eye_sigma2).exp()
        };
        let mut row = [1.0, neck, jaw, eye(joint_offsets[2]), eye(joint_offsets[3])];
        for w in row.iter_mut() {
            if *w < 1e-9 {
                *w = 0.0;
            }
        }
        let sum: f64 = row.iter().sum();
        skin_weights.extend(row.iter().map(|w| w / sum));
    }

    let region_labels = dirs.iter().map(|&d| classify(d)).collect();

    let landmark_indices = LANDMARKS
        .iter()
        .map(|&[lx, ly]| {
            let target = [lx, ly, (1.0 - lx * lx - ly * ly).max(0.0).sqrt()];
            let (best, _) = dirs
                .iter()
                .enumerate()
                .map(|(i, &d)| (i, math::norm(math::sub(d, target))))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            best as u32
        })
        .collect();

    let asset = FaceModelAsset {
        template_vertices: template,
        triangles: Arc::new(triangles),
        shape_basis,
        expression_basis,
        joint_offsets,
        kinematic_tree,
        skin_weights,
        region_labels,
        landmark_indices,
    };
    asset.validate()?;
    Ok(asset)
}
