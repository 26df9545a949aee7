mod common;

use faceflow::face_model::{evaluate_model, joints, FaceParams};
use faceflow::math::{axis_angle_to_matrix, mat_vec};

fn params(beta: &[f64], psi: &[f64], global: [f64; 3]) -> FaceParams {
    let a = common::asset();
    let mut p = a.zero_params();
    p.beta[..beta.len()].copy_from_slice(beta);
    p.psi[..psi.len()].copy_from_slice(psi);
    p.set_joint_rotation(0, global);
    p
}

fn max_diff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter().zip(b).flat_map(|(p, q)| (0..3).map(move |i| (p[i] - q[i]).abs())).fold(0.0, f64::max)
}

#[test]
fn zero_parameters_give_template_exactly() {
    let a = common::asset();
    let m = evaluate_model(a, &a.zero_params()).unwrap();
    assert_eq!(m.vertices, a.template_vertices);
}

#[test]
fn blendshapes_are_linear_without_pose() {
    let a = common::asset();
    let t = &a.template_vertices;
    let p1 = params(&[0.7, -1.2], &[0.4, 0.0, -0.9], [0.0; 3]);
    let p2 = params(&[-0.3, 0.5, 1.1], &[0.2, 1.3], [0.0; 3]);
    let mut sum = a.zero_params();
    for i in 0..sum.beta.len() {
        sum.beta[i] = p1.beta[i] + p2.beta[i];
    }
    for i in 0..sum.psi.len() {
        sum.psi[i] = p1.psi[i] + p2.psi[i];
    }
    let m1 = evaluate_model(a, &p1).unwrap().vertices;
    let m2 = evaluate_model(a, &p2).unwrap().vertices;
    let ms = evaluate_model(a, &sum).unwrap().vertices;
    let expect: Vec<[f64; 3]> = (0..t.len())
        .map(|v| [0, 1, 2].map(|i| m1[v][i] - t[v][i] + m2[v][i] - t[v][i] + t[v][i]))
        .collect();
    assert!(max_diff(&ms, &expect) < 1e-12);
}

#[test]
fn global_rotation_rotates_whole_mesh() {
    let a = common::asset();
    let w = [0.12, -0.2, 0.07];
    let rest = evaluate_model(a, &params(&[0.5], &[0.8, -0.4], [0.0; 3])).unwrap().vertices;
    let rotated = evaluate_model(a, &params(&[0.5], &[0.8, -0.4], w)).unwrap().vertices;
    let r = axis_angle_to_matrix(w);
    let expect: Vec<[f64; 3]> = rest.iter().map(|&v| mat_vec(&r, v)).collect();
    assert!(max_diff(&rotated, &expect) < 1e-12);
}

#[test]
fn jaw_moves_only_skinned_vertices() {
    let a = common::asset();
    let mut p = a.zero_params();
    p.set_joint_rotation(joints::JAW, [0.3, 0.0, 0.0]);
    let m = evaluate_model(a, &p).unwrap().vertices;
    for (v, (got, rest)) in m.iter().zip(&a.template_vertices).enumerate() {
        if a.weights_row(v)[joints::JAW] == 0.0 {
            assert_eq!(got, rest, "vertex {v} has no jaw weight but moved");
        }
    }
    assert!(max_diff(&m, &a.template_vertices) > 1e-3);
}

#[test]
fn mismatched_parameter_lengths_are_rejected() {
    let a = common::asset();
    let mut p = a.zero_params();
    p.psi.push(0.0);
    assert!(evaluate_model(a, &p).is_err());
}
