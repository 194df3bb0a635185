mod common;

use common::{code, run, stdout, write_source_dataset};
use serde_json::Value;

fn p(path: &std::path::Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn print_config_shows_defaults() {
    let out = run(&["print-config"]);
    assert_eq!(code(&out), 0);
    let cfg: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(cfg["frames"], 3);
    assert_eq!(cfg["rotation_deg"], 15.0);
    assert_eq!(cfg["vmosp_instances"], 2);
    assert_eq!(cfg["cost_k"], 3);
    assert_eq!(cfg["morph"]["scale_max"], 0.1);
    assert!(cfg["pool"].is_null());
}

#[test]
fn flags_override_config_file_in_any_order() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cfg.json");
    std::fs::write(&file, r#"{"frames": 10, "master_seed": 5, "num_videos": 4, "workers": 2}"#).unwrap();
    let a = run(&["print-config", "--config", p(&file), "--frames", "3"]);
    let b = run(&["print-config", "--frames", "3", "--config", p(&file)]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    let cfg: Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(cfg["frames"], 3);
    assert_eq!(cfg["master_seed"], 5);
    assert_eq!(cfg["num_videos"], 4);
    assert_eq!(cfg["workers"], 2);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cfg.json");
    std::fs::write(&file, r#"{"frames": 3, "no_such_key": 1}"#).unwrap();
    assert_eq!(code(&run(&["print-config", "--config", p(&file)])), 2);
    assert_eq!(code(&run(&["print-config", "--cost-probability", "1.5"])), 2);
    assert_eq!(code(&run(&["print-config", "--cost-k", "40"])), 2);
    assert_eq!(code(&run(&["print-config", "--workers", "0"])), 2);
    assert_eq!(code(&run(&["print-config", "--frames", "abc"])), 2);
    assert_eq!(code(&run(&["no-such-command"])), 2);
    assert_eq!(code(&run(&["generate", "--num-videos", "1"])), 2, "missing input");
    assert_eq!(code(&run(&["mstm-check", "--dims", "4,8,8"])), 2);
    assert_eq!(code(&run(&["mstm-check", "--dims", "4,8,8,6"])), 2, "heads do not divide D");
}

#[test]
fn pool_override_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool.json");
    std::fs::write(
        &pool,
        r#"[{"kind": "brightness", "magnitude": [-10, 10]}, {"kind": "hflip", "magnitude": [0, 0]}]"#,
    )
    .unwrap();
    let out = run(&["print-config", "--pool", p(&pool), "--cost-k", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cfg: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(cfg["pool"].as_array().unwrap().len(), 2);
    // cost_k must fit the overridden pool
    assert_eq!(code(&run(&["print-config", "--pool", p(&pool)])), 2);
}

#[test]
fn generate_validate_preview_round() {
    let src = tempfile::tempdir().unwrap();
    let manifest = write_source_dataset(src.path(), 2, 48, 36);
    let work = tempfile::tempdir().unwrap();
    let ds = work.path().join("ds");
    let out = run(&[
        "generate",
        "--input",
        p(&manifest),
        "--output",
        p(&ds),
        "--num-videos",
        "5",
        "--seed",
        "9",
        "--workers",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("videos written: 5"), "{}", stdout(&out));

    let out = run(&["validate", p(&ds)]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["videos"], 5);
    assert!(report["violations"].as_array().unwrap().is_empty());

    let png = work.path().join("strip.png");
    let out = run(&["preview", p(&ds), "--video-id", "3", "--output", p(&png)]);
    assert_eq!(code(&out), 0);
    let img = image::open(&png).unwrap();
    assert_eq!((img.width(), img.height()), (48 * 3, 36));
    assert_eq!(code(&run(&["preview", p(&ds), "--video-id", "77", "--output", p(&png)])), 1);
}

#[test]
fn zero_videos_writes_empty_manifest() {
    let src = tempfile::tempdir().unwrap();
    let manifest = write_source_dataset(src.path(), 1, 16, 16);
    let ds = src.path().join("out");
    let out = run(&["generate", "--input", p(&manifest), "--output", p(&ds), "--num-videos", "0"]);
    assert_eq!(code(&out), 0);
    let m: Value = serde_json::from_slice(&std::fs::read(ds.join("manifest.json")).unwrap()).unwrap();
    assert!(m["videos"].as_array().unwrap().is_empty());
    assert!(m["tracks"].as_array().unwrap().is_empty());
}

#[test]
fn config_file_drives_generation() {
    let src = tempfile::tempdir().unwrap();
    let manifest = write_source_dataset(src.path(), 1, 24, 20);
    let ds = src.path().join("out");
    let file = src.path().join("run.json");
    let cfg = serde_json::json!({
        "input": manifest, "output": ds, "num_videos": 2, "frames": 4, "workers": 1,
    });
    std::fs::write(&file, cfg.to_string()).unwrap();
    assert_eq!(code(&run(&["generate", "--config", p(&file)])), 0);
    let m: Value = serde_json::from_slice(&std::fs::read(ds.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["videos"].as_array().unwrap().len(), 2);
    assert_eq!(m["videos"][0]["length"], 4);
}

#[test]
fn validate_exit_codes() {
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["validate", p(empty.path())])), 2);

    let src = tempfile::tempdir().unwrap();
    let manifest = write_source_dataset(src.path(), 1, 20, 20);
    let ds = src.path().join("out");
    assert_eq!(
        code(&run(&["generate", "--input", p(&manifest), "--output", p(&ds), "--num-videos", "2"])),
        0
    );
    std::fs::remove_file(ds.join("videos/1/0.png")).unwrap();
    let out = run(&["validate", p(&ds)]);
    assert_eq!(code(&out), 1);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["violations"][0]["kind"], "missing_frame");
    assert_eq!(report["violations"][0]["video_id"], 1);
}

#[test]
fn generate_refuses_foreign_directory() {
    let src = tempfile::tempdir().unwrap();
    let manifest = write_source_dataset(src.path(), 1, 20, 20);
    // the source directory holds images and no dataset manifest
    let out = run(&["generate", "--input", p(&manifest), "--output", p(src.path()), "--num-videos", "1"]);
    assert_eq!(code(&out), 2);
    assert!(src.path().join("img1.png").is_file());
}

#[test]
fn missing_input_manifest_is_operational_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        run(&["generate", "--input", p(&dir.path().join("nope.json")), "--output", p(&dir.path().join("o"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn mstm_check_default_and_faults() {
    let out = run(&["mstm-check"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    assert!(!text.contains("FAIL") && !text.contains("SKIP"));

    let dir = tempfile::tempdir().unwrap();
    let golden = dir.path().join("golden.bin");
    assert_eq!(code(&run(&["mstm-check", "--write-golden", p(&golden)])), 0);
    let mut bytes = std::fs::read(&golden).unwrap();
    // flip an exponent bit of value 100
    bytes[807] ^= 0x10;
    std::fs::write(&golden, &bytes).unwrap();
    let out = run(&["mstm-check", "--golden", p(&golden)]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    let fails: Vec<_> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(fails.len(), 1, "{text}");
    assert!(fails[0].starts_with("FAIL golden"));

    // truncated fixture is also caught by the golden check
    std::fs::write(&golden, &bytes[..13]).unwrap();
    assert_eq!(code(&run(&["mstm-check", "--golden", p(&golden)])), 1);
}

#[test]
fn mstm_check_with_sidecar_weights() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.bin");
    let out = run(&[
        "mstm-check",
        "--dims",
        "2,4,4,8",
        "--heads",
        "2",
        "--weight-seed",
        "3",
        "--dump-weights",
        p(&w),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let out = run(&["mstm-check", "--dims", "2,4,4,8", "--heads", "2", "--weights", p(&w)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    // weights for a different channel count are refused
    assert_eq!(code(&run(&["mstm-check", "--dims", "2,4,4,16", "--weights", p(&w)])), 1);
}

#[test]
fn category_filter_limits_tracks() {
    let src = tempfile::tempdir().unwrap();
    let manifest = write_source_dataset(src.path(), 2, 32, 24);
    let ds = src.path().join("out");
    let out = run(&[
        "generate",
        "--input",
        p(&manifest),
        "--output",
        p(&ds),
        "--num-videos",
        "6",
        "--categories",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m: Value = serde_json::from_slice(&std::fs::read(ds.join("manifest.json")).unwrap()).unwrap();
    let tracks = m["tracks"].as_array().unwrap();
    assert!(!tracks.is_empty());
    assert!(tracks.iter().all(|t| t["category_id"] == 2), "{tracks:?}");

    let file = src.path().join("cfg.json");
    std::fs::write(&file, r#"{"categories": [1], "frames": 2}"#).unwrap();
    let cfg: Value = serde_json::from_str(&stdout(&run(&["print-config", "--config", p(&file)]))).unwrap();
    assert_eq!(cfg["categories"], serde_json::json!([1]));
}
