//! Compiles and runs a small C client against the generated header and the
//! static library.

use std::path::PathBuf;
use std::process::Command;

const CLIENT: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "charpoly.h"

int main(void) {
    double zr[2] = {1.0, 0.0}, zi[2] = {0.0, 0.0};
    CharpolyPrediction p;
    if (charpoly_predict(0.0, 0.0, 0.0, 0.0, 0.0, zr, zi, 2, 64, &p) != CHARPOLY_STATUS_OK) return 1;
    if (fabs(p.kernel_det_ratio - (1.0 - exp(-1.0))) > 1e-12) return 2;
    if (p.regime != CHARPOLY_REGIME_COMPLEX_EXACT) return 3;

    if (charpoly_predict(1.0, 0.0, 0.0, 0.5, 0.0, zr, zi, 2, 64, &p) != CHARPOLY_STATUS_CONDITIONS_VIOLATED) return 4;
    if (strstr(charpoly_last_error(), "positive det") == NULL) return 5;

    CharpolyConfig *cfg = NULL;
    const char *json = "{\"kappa20\":[0.2,0.0],\"z0\":[0.1,0.1],\"zetas\":[[1.0,0.0],[0.0,0.0]],\"n_list\":[6],\"samples\":1000,\"batches\":8}";
    if (charpoly_config_from_json(json, &cfg) != CHARPOLY_STATUS_OK) return 6;
    CharpolyRecord *rec = NULL;
    if (charpoly_estimate(cfg, &rec) != CHARPOLY_STATUS_OK) return 7;
    CharpolyEntry e;
    if (charpoly_record_len(rec) != 1 || charpoly_record_entry(rec, 0, &e) != CHARPOLY_STATUS_OK) return 8;
    if (!isfinite(e.log_ratio) || e.std_error <= 0.0) return 9;
    char *text = NULL;
    if (charpoly_record_to_json(rec, &text) != CHARPOLY_STATUS_OK) return 10;
    charpoly_string_free(text);
    charpoly_record_free(rec);
    charpoly_config_free(cfg);
    printf("ok %s\n", charpoly_version());
    return 0;
}
"#;

fn find_cc() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
}

#[test]
fn c_client_links_and_runs() {
    let Some(cc) = find_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // The test binary sits in target/<profile>/deps next to the library.
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = [deps.join("libcharpoly_ffi.a"), deps.parent().unwrap().join("libcharpoly_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .expect("static library next to the test binary");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let exe = dir.path().join("client");
    std::fs::write(&src, CLIENT).unwrap();
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "compile failed:\n{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "client exited with {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
