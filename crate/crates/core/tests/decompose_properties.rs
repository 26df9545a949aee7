mod common;

use faceflow::decompose::{decompose_flow, fit_head_motion, IrlsConfig, MotionKind, MotionModel};
use faceflow::flow::{FlowField, Mask};
use faceflow::sequence::SampleBounds;

fn affine_field(c: [f64; 6], w: usize, h: usize) -> FlowField {
    let m = MotionModel::new(MotionKind::Affine, c.to_vec()).unwrap();
    FlowField::from_fn(w, h, |x, y| m.at_pixel(x, y).map(|v| v as f32))
}

#[test]
fn exact_affine_is_recovered() {
    let truth = [0.75, -1.25, 0.0125, 0.003, -0.004, 0.0075];
    let flow = affine_field(truth, 96, 80);
    let mask = Mask::full(96, 80);
    for cfg in [IrlsConfig::huber(), IrlsConfig::tukey()] {
        let (m, _) = fit_head_motion(&flow, &mask, MotionKind::Affine, &cfg).unwrap();
        for (a, b) in m.coefficients.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let (_, expr) = decompose_flow(&flow, &mask, &m, false).unwrap();
        assert!(expr.max_abs() < 1e-5);
    }
}

#[test]
fn adding_a_translation_shifts_only_the_offsets() {
    let f = common::pair_flows(&common::target(&SampleBounds::default(), 50), 5, 2, 128);
    let mask = common::face_mask(&f);
    let shifted = FlowField::from_fn(128, 128, |x, y| {
        let d = f.facial.get(x, y);
        [d[0] + 2.0, d[1] - 1.0]
    });
    let mut shifted = shifted;
    shifted.valid = f.facial.valid.clone();
    let cfg = IrlsConfig { scale: Some(0.5), ..IrlsConfig::huber() };
    let (a, _) = fit_head_motion(&f.facial, &mask, MotionKind::Affine, &cfg).unwrap();
    let (b, _) = fit_head_motion(&shifted, &mask, MotionKind::Affine, &cfg).unwrap();
    assert!((b.coefficients[0] - a.coefficients[0] - 2.0).abs() < 1e-4);
    assert!((b.coefficients[1] - a.coefficients[1] + 1.0).abs() < 1e-4);
    for i in 2..6 {
        assert!((a.coefficients[i] - b.coefficients[i]).abs() < 1e-6);
    }
}

#[test]
fn richer_models_never_fit_worse() {
    let cfg = IrlsConfig { scale: Some(0.5), max_iterations: 200, tolerance: 1e-12, ..IrlsConfig::huber() };
    for seed in 0..3 {
        let f = common::pair_flows(&common::target(&SampleBounds::default(), 60 + seed), 5, 1, 128);
        let mask = common::face_mask(&f);
        let obj = |k| fit_head_motion(&f.facial, &mask, k, &cfg).unwrap().1.objective;
        let (t, s, a) = (obj(MotionKind::Translation), obj(MotionKind::Similarity), obj(MotionKind::Affine));
        assert!(s <= t * (1.0 + 1e-9) && a <= s * (1.0 + 1e-9), "{t} {s} {a}");
    }
}

#[test]
fn objective_is_monotone_on_generated_flow() {
    for seed in 0..4 {
        let f = common::pair_flows(&common::target(&SampleBounds::default(), 70 + seed), 10, 4, 128);
        let mask = common::face_mask(&f);
        for cfg in [IrlsConfig::huber(), IrlsConfig::tukey()] {
            let (_, d) = fit_head_motion(&f.facial, &mask, MotionKind::Affine, &cfg).unwrap();
            assert!(d.objective_history.windows(2).all(|w| w[1] <= w[0]), "{:?}", d.objective_history);
            assert_eq!(Some(&d.objective), d.objective_history.last());
        }
    }
}

#[test]
fn decomposition_is_additive_on_mask() {
    let f = common::pair_flows(&common::target(&SampleBounds::default(), 80), 5, 3, 128);
    let mask = common::face_mask(&f);
    let (m, _) = fit_head_motion(&f.facial, &mask, MotionKind::Affine, &IrlsConfig::tukey()).unwrap();
    let (head, expr) = decompose_flow(&f.facial, &mask, &m, false).unwrap();
    for i in 0..mask.bits.len() {
        if mask.bits[i] && f.facial.valid[i] {
            for c in 0..2 {
                assert_eq!(head.data[i][c] + expr.data[i][c], f.facial.data[i][c]);
            }
        }
    }
}

#[test]
fn too_few_pixels_is_rank_error() {
    let flow = FlowField::zeros(8, 8);
    let mut bits = vec![false; 64];
    bits[10] = true;
    bits[11] = true;
    let mask = Mask::new(8, 8, bits).unwrap();
    let err = fit_head_motion(&flow, &mask, MotionKind::Affine, &IrlsConfig::huber()).unwrap_err();
    assert_eq!(err.kind(), "rank");
}
