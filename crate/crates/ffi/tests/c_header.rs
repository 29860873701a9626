use std::path::Path;
use std::process::Command;

const SOURCE: &str = r#"
#include "heatrack.h"

int main(void) {
    HtrkConfig *cfg = 0;
    HtrkModel *model = 0;
    HtrkTracker *tracker = 0;
    HtrkTrack tracks[8];
    size_t count = 0;
    double w = 0.0;
    int64_t cols[2];
    double costs[4] = {1.0, 2.0, 2.0, 1.0};
    if (htrk_config_new(&cfg) != HTRK_STATUS_OK) return 1;
    if (htrk_model_init(cfg, 1, &model) != HTRK_STATUS_OK) return 1;
    if (htrk_tracker_new(model, cfg, &tracker) != HTRK_STATUS_OK) return 1;
    htrk_tracker_get_tracks(tracker, tracks, 8, &count);
    htrk_sgr_confidence(0.5, 0.4, 0.2, 2.0, &w);
    htrk_solve_assignment(costs, 2, 2, cols);
    (void)htrk_last_error();
    (void)htrk_version();
    (void)htrk_tracker_frame_count(tracker);
    (void)htrk_model_classes(model);
    htrk_tracker_free(tracker);
    htrk_model_free(model);
    htrk_config_free(cfg);
    return 0;
}
"#;

fn include_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(include_dir().join("heatrack.h")).unwrap();
    for name in [
        "htrk_last_error",
        "htrk_version",
        "htrk_config_new",
        "htrk_config_parse",
        "htrk_config_load",
        "htrk_config_free",
        "htrk_model_load",
        "htrk_model_init",
        "htrk_model_free",
        "htrk_tracker_new",
        "htrk_tracker_push_frame",
        "htrk_tracker_get_tracks",
        "htrk_tracker_free",
        "htrk_sgr_confidence",
        "htrk_solve_assignment",
        "typedef struct HtrkTracker HtrkTracker",
        "HTRK_STATUS_BUFFER_TOO_SMALL = 6",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles a C program against the header when a C compiler is on PATH.
#[test]
fn header_compiles_as_c99() {
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&compiler).arg("--version").output().is_err() {
        eprintln!("no C compiler found; header syntax check not run");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(&src, SOURCE).unwrap();
    let out = Command::new(&compiler)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-fsyntax-only", "-I"])
        .arg(include_dir())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
