#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use serde_json::json;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pseudovis"));
    cmd.env_remove("PSEUDOVIS_LOG");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Writes `images` textured PNGs of `w × h` with two polygon instances each,
/// plus their COCO manifest; returns the manifest path.
pub fn write_source_dataset(dir: &Path, images: u64, w: u32, h: u32) -> PathBuf {
    let mut image_recs = Vec::new();
    let mut anns = Vec::new();
    for id in 1..=images {
        let name = format!("img{id}.png");
        let salt = id as u32 * 31;
        RgbImage::from_fn(w, h, |x, y| {
            Rgb([
                ((x / 3 + y + salt) % 256) as u8,
                ((x + y / 2 + 2 * salt) % 256) as u8,
                ((x ^ y) % 256) as u8,
            ])
        })
        .save(dir.join(&name))
        .unwrap();
        image_recs.push(json!({"id": id, "file_name": name, "width": w, "height": h}));
        let (fw, fh) = (w as f64, h as f64);
        anns.push(json!({
            "id": id * 10, "image_id": id, "category_id": 1,
            "segmentation": [[0.1 * fw, 0.2 * fh, 0.45 * fw, 0.15 * fh, 0.4 * fw, 0.7 * fh, 0.15 * fw, 0.6 * fh]],
        }));
        anns.push(json!({
            "id": id * 10 + 1, "image_id": id, "category_id": 2,
            "segmentation": [[0.55 * fw, 0.3 * fh, 0.9 * fw, 0.35 * fh, 0.7 * fw, 0.85 * fh]],
        }));
    }
    let manifest = json!({
        "images": image_recs,
        "annotations": anns,
        "categories": [{"id": 1, "name": "blob"}, {"id": 2, "name": "wedge"}],
    });
    let path = dir.join("annotations.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest).unwrap()).unwrap();
    path
}

/// Every file under `root` as (relative path, bytes), sorted.
pub fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
