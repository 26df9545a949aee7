use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use faceflow::flow::FlowField;
use faceflow::io::flo::{read_flo, write_flo};
use faceflow::io::manifest::DatasetManifest;

fn faceflow(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_faceflow"));
    c.args(args).env_remove("FACEFLOW_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    faceflow(args).output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn gen_small(root: &Path) -> DatasetManifest {
    let out = root.to_str().unwrap();
    let o = run(&["gen", "-o", out, "--width", "32", "--height", "32", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    DatasetManifest::read(root.join("manifest.json")).unwrap()
}

#[test]
fn gen_writes_all_standard_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("ds");
    let o = run(&["gen", "-o", root.to_str().unwrap(), "--width", "32", "--height", "32"]);
    assert_eq!(o.status.code(), Some(0));
    let summary = stdout_json(&o);
    assert_eq!(summary["sequences"], 4);
    assert_eq!(summary["pairs"], 4 + 9 + 14 + 19);
    let m = DatasetManifest::read(root.join("manifest.json")).unwrap();
    m.validate(&root).unwrap();
    let mut lengths: Vec<usize> = m.sequences.iter().map(|r| r.n).collect();
    lengths.sort();
    assert_eq!(lengths, [5, 10, 15, 20]);
}

#[test]
fn gen_into_unwritable_root_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, b"x").unwrap();
    let o = run(&["gen", "-o", blocker.join("ds").to_str().unwrap(), "--width", "16", "--height", "16"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "io");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn gen_rejects_invalid_options() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    for args in [
        vec!["gen", "-o", out.to_str().unwrap(), "--lengths", "7"],
        vec!["gen", "-o", out.to_str().unwrap(), "--split-ratios", "1:2"],
        vec!["gen", "-o", out.to_str().unwrap(), "--width", "0"],
        vec!["gen", "--no-such-flag"],
    ] {
        assert_eq!(run(&args).status.code(), Some(1), "{args:?}");
    }
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn workers_env_is_overridden_by_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let args = ["gen", "-o", out.to_str().unwrap(), "--lengths", "5", "--width", "16", "--height", "16"];
    let o = faceflow(&args).env("FACEFLOW_WORKERS", "0").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let mut with_flag = args.to_vec();
    with_flag.extend(["--workers", "1"]);
    let o = faceflow(&with_flag).env("FACEFLOW_WORKERS", "0").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn print_config_applies_overrides_over_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    std::fs::write(&cfg, r#"{"width": 64, "height": 48, "seed": 9}"#).unwrap();
    let o = run(&["gen", "--config", cfg.to_str().unwrap(), "--seed", "11", "--print-config"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!((v["width"].as_u64(), v["height"].as_u64(), v["seed"].as_u64()), (Some(64), Some(48), Some(11)));
    std::fs::write(&cfg, r#"{"widht": 64}"#).unwrap();
    assert_eq!(run(&["gen", "--config", cfg.to_str().unwrap(), "--print-config"]).status.code(), Some(1));
}

#[test]
fn eval_dataset_scores_ground_truth_and_shifted_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("ds");
    let m = gen_small(&root);
    let ds = root.to_str().unwrap();

    let o = run(&["eval", "dataset", "--dataset", ds, "--predictions", ds]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout_json(&o);
    assert_eq!(r["aggregate"]["epe"], 0.0);
    assert_eq!(r["groups"].as_object().unwrap().len(), 4);

    let pred = dir.path().join("pred");
    for rel in m.sequences.iter().flat_map(|s| &s.flow_facial) {
        let mut f = read_flo(root.join(rel)).unwrap();
        for (d, &v) in f.data.iter_mut().zip(&f.valid) {
            if v {
                d[0] += 1.0;
            }
        }
        std::fs::create_dir_all(pred.join(rel).parent().unwrap()).unwrap();
        write_flo(&f, pred.join(rel)).unwrap();
    }
    let o = run(&["eval", "dataset", "--dataset", ds, "--predictions", pred.to_str().unwrap(), "--mask", "all"]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout_json(&o);
    for (key, g) in r["groups"].as_object().unwrap() {
        assert!((g["epe"].as_f64().unwrap() - 1.0).abs() < 1e-4, "{key}: {g}");
    }

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = run(&["eval", "dataset", "--dataset", ds, "--predictions", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout_json(&o)["missing"].as_array().unwrap().len(), 46);
}

#[test]
fn eval_pair_and_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.flo");
    let b = dir.path().join("b.flo");
    write_flo(&FlowField::from_fn(4, 3, |_, _| [0.0, 0.0]), &a).unwrap();
    write_flo(&FlowField::from_fn(4, 3, |_, _| [3.0, 4.0]), &b).unwrap();
    let o = run(&["eval", "pair", "--pred", a.to_str().unwrap(), "--gt", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout_json(&o);
    assert_eq!(r["aggregate"], 5.0);
    assert_eq!(r["count"], 12);
    let o = run(&["eval", "pair", "--pred", a.to_str().unwrap(), "--gt", dir.path().join("none.flo").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "io");
}

#[test]
fn eval_landmarks_and_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let flow = dir.path().join("f.flo");
    write_flo(&FlowField::from_fn(8, 8, |_, _| [1.0, 2.0]), &flow).unwrap();
    let csv = dir.path().join("c.csv");
    std::fs::write(&csv, "id,x1,y1,x2,y2,region\na,2,2,3,4,lips\nb,4,4,8,10,eyes\n").unwrap();
    let o = run(&["eval", "landmarks", "--flow", flow.to_str().unwrap(), "--correspondences", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout_json(&o);
    assert_eq!(r["aggregate"], 2.5);
    assert_eq!(r["regions"]["lips"]["epe"], 0.0);
    assert_eq!(r["regions"]["eyes"]["epe"], 5.0);

    let emb = dir.path().join("e.csv");
    std::fs::write(&emb, "1,0\n0,1\n-1,0\n0,-1\n").unwrap();
    let o = run(&["eval", "embeddings", "--input", emb.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "zero mean has no coefficient of variation");
    std::fs::write(&emb, "1,1\n3,3\n").unwrap();
    let r = stdout_json(&run(&["eval", "embeddings", "--input", emb.to_str().unwrap()]));
    assert!((r["mean_pairwise_cosine"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn viz_colors() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("z.flo");
    write_flo(&FlowField::zeros(5, 4), &zero).unwrap();
    let png = dir.path().join("z.png");
    assert_eq!(run(&["viz", "--flow", zero.to_str().unwrap(), "-o", png.to_str().unwrap()]).status.code(), Some(0));
    let img = image::open(&png).unwrap().to_rgb8();
    assert!(img.pixels().all(|p| p.0 == [255, 255, 255]));

    let big = dir.path().join("b.flo");
    let unit = dir.path().join("u.flo");
    write_flo(&FlowField::from_fn(3, 3, |_, _| [2.0, 0.0]), &big).unwrap();
    write_flo(&FlowField::from_fn(3, 3, |_, _| [1.0, 0.0]), &unit).unwrap();
    let (pb, pu) = (dir.path().join("b.png"), dir.path().join("u.png"));
    run(&["viz", "--flow", big.to_str().unwrap(), "-o", pb.to_str().unwrap(), "--max-magnitude", "1"]);
    run(&["viz", "--flow", unit.to_str().unwrap(), "-o", pu.to_str().unwrap(), "--max-magnitude", "1"]);
    assert_eq!(image::open(&pb).unwrap().to_rgb8(), image::open(&pu).unwrap().to_rgb8());
    assert_eq!(run(&["viz", "--flow", big.to_str().unwrap(), "-o", pb.to_str().unwrap(), "--max-magnitude", "0"]).status.code(), Some(1));
}

#[test]
fn decompose_writes_components() {
    let dir = tempfile::tempdir().unwrap();
    let flow = dir.path().join("f.flo");
    write_flo(&FlowField::from_fn(20, 16, |x, y| [0.5 + 0.01 * x as f32, -0.25 + 0.02 * y as f32]), &flow).unwrap();
    let (h, e) = (dir.path().join("h.flo"), dir.path().join("e.flo"));
    let o = run(&[
        "decompose", "--flow", flow.to_str().unwrap(), "--head-out", h.to_str().unwrap(), "--expression-out", e.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    let c: Vec<f64> = r["model"]["coefficients"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((c[2] - 0.01).abs() < 1e-5 && (c[5] - 0.02).abs() < 1e-5, "{c:?}");
    assert!(read_flo(&e).unwrap().max_abs() < 1e-4);
    assert_eq!(read_flo(&h).unwrap().width, 20);
    let o = run(&["decompose", "--flow", flow.to_str().unwrap(), "--head-out", "h", "--expression-out", "e", "--model", "quadratic"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn split_reassigns_and_dry_run_keeps_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("ds");
    gen_small(&root);
    let before = std::fs::read(root.join("manifest.json")).unwrap();
    let o = run(&["split", "--dataset", root.to_str().unwrap(), "--ratios", "1:1:2", "--dry-run"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["counts"]["val"], 2);
    assert_eq!(std::fs::read(root.join("manifest.json")).unwrap(), before);
    assert_eq!(run(&["split", "--dataset", root.to_str().unwrap(), "--ratios", "1:1:2"]).status.code(), Some(0));
    let m = DatasetManifest::read(root.join("manifest.json")).unwrap();
    assert_eq!((m.counts.train, m.counts.test, m.counts.val), (1, 1, 2));
    m.validate(&root).unwrap();
}

#[test]
fn asset_synth_and_info_agree() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.ffna");
    let s = run(&["asset", "synth", "-o", p.to_str().unwrap(), "--vertices", "300", "--seed", "4"]);
    assert_eq!(s.status.code(), Some(0));
    let i = run(&["asset", "info", p.to_str().unwrap()]);
    let (s, i) = (stdout_json(&s), stdout_json(&i));
    assert_eq!(s["fingerprint"], i["fingerprint"]);
    assert_eq!(i["joints"], 4);
    std::fs::write(&p, b"F").unwrap();
    let o = run(&["asset", "info", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"], "format");
}
