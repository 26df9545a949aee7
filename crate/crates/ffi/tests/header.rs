//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "faceflow.h"

int main(void) {
    FfAsset *asset = NULL;
    if (ff_asset_synthesize(1, 200, 2, 3, &asset) != FF_STATUS_OK) return 10;
    size_t dims[5];
    if (ff_asset_dimensions(asset, dims) != FF_STATUS_OK || dims[0] != 200) return 11;
    ff_asset_free(asset);

    FfFlow *a = NULL, *b = NULL;
    if (ff_flow_new(4, 4, &a) != FF_STATUS_OK || ff_flow_new(4, 4, &b) != FF_STATUS_OK) return 12;
    float v[32];
    for (int i = 0; i < 16; i++) { v[2 * i] = 3.0f; v[2 * i + 1] = 4.0f; }
    if (ff_flow_set_data(a, v, 32) != FF_STATUS_OK) return 13;
    double epe = 0.0; size_t n = 0;
    if (ff_masked_epe(a, b, NULL, 0, &epe, &n) != FF_STATUS_OK || epe != 5.0 || n != 16) return 14;
    if (ff_asset_synthesize(1, 3, 1, 1, &asset) != FF_STATUS_DOMAIN) return 15;
    if (strlen(ff_last_error()) == 0) return 16;
    ff_flow_free(a);
    ff_flow_free(b);
    printf("ok\n");
    return 0;
}
"#;

fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/<test binary> -> target/<profile>/libfaceflow_ffi.a
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libfaceflow_ffi.a");
    lib.is_file().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let Some(lib) = static_lib() else {
        eprintln!("static library not built; skipping");
        return;
    };
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "compile failed:\n{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
