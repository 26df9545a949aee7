use proptest::prelude::*;

use faceflow::flow::FlowField;
use faceflow::io::flo::{decode_flo, read_flo, write_flo};
use faceflow::io::pfm::{decode_pfm, encode_pfm};
use faceflow::pipeline::{generate_dataset, GenConfig};
use faceflow::raster::DepthMap;

proptest! {
    #[test]
    fn flo_round_trips(w in 1usize..16, h in 1usize..16, vals in prop::collection::vec((-1e6f32..1e6, -1e6f32..1e6, any::<bool>()), 256)) {
        let mut f = FlowField::from_fn(w, h, |x, y| { let v = vals[y * w + x]; [v.0, v.1] });
        for i in 0..w * h {
            if vals[i].2 { f.set_invalid(i); }
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.flo");
        write_flo(&f, &p).unwrap();
        prop_assert_eq!(read_flo(&p).unwrap(), f);
    }

    #[test]
    fn pfm_round_trips(w in 1usize..16, h in 1usize..16, vals in prop::collection::vec(0.0f32..1e4, 256)) {
        let d = DepthMap { width: w, height: h, data: vals[..w * h].to_vec() };
        prop_assert_eq!(decode_pfm(&encode_pfm(&d).unwrap()).unwrap(), d);
    }

    #[test]
    fn truncated_flo_is_rejected(cut in 1usize..20) {
        let f = FlowField::zeros(3, 2);
        let bytes = faceflow::io::flo::encode_flo(&f).unwrap();
        prop_assert!(decode_flo(&bytes[..bytes.len() - cut.min(bytes.len())]).is_err());
    }
}

#[test]
fn manifest_validation_catches_flow_size_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GenConfig { output: dir.path().join("ds"), lengths: vec![5], width: 32, height: 32, ..Default::default() };
    let out = generate_dataset(&cfg, 1).unwrap();
    out.manifest.validate(&cfg.output).unwrap();
    let rel = &out.manifest.sequences[0].flow_head[1];
    write_flo(&FlowField::zeros(31, 32), cfg.output.join(rel)).unwrap();
    let err = out.manifest.validate(&cfg.output).unwrap_err();
    assert_eq!(err.kind(), "format");
    assert!(err.to_string().contains("flow_h_2"), "{err}");
}

#[test]
fn manifest_validation_catches_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GenConfig { output: dir.path().join("ds"), lengths: vec![5], width: 32, height: 32, ..Default::default() };
    let out = generate_dataset(&cfg, 1).unwrap();
    std::fs::remove_file(cfg.output.join(&out.manifest.sequences[0].depths[0])).unwrap();
    assert!(out.manifest.validate(&cfg.output).is_err());
}
