#![allow(dead_code)]

use std::path::Path;

use image::{Rgb, RgbImage};
use pseudovis_core::ingest::{AnnotatedImage, InstanceAnnotation};
use pseudovis_core::mask::BinaryMask;
use rand::Rng;
use serde_json::json;

/// A deterministic, non-constant test raster.
pub fn textured(w: u32, h: u32, salt: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        Rgb([
            ((x * 37 + y * 11 + salt) % 256) as u8,
            ((x * 5 + y * 29 + salt * 3) % 256) as u8,
            ((x * y + salt * 7) % 256) as u8,
        ])
    })
}

pub fn random_rgb<R: Rng>(rng: &mut R, w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |_, _| Rgb([rng.gen(), rng.gen(), rng.gen()]))
}

pub fn random_mask<R: Rng>(rng: &mut R, w: u32, h: u32, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(density))
}

/// A filled axis-aligned ellipse with random center and radii, never empty.
pub fn random_blob<R: Rng>(rng: &mut R, w: u32, h: u32) -> BinaryMask {
    let cx = rng.gen_range(0.0..w as f64);
    let cy = rng.gen_range(0.0..h as f64);
    let rx = rng.gen_range(1.0..(w as f64 / 3.0).max(1.5));
    let ry = rng.gen_range(1.0..(h as f64 / 3.0).max(1.5));
    let m = BinaryMask::from_fn(w, h, |x, y| {
        let dx = (x as f64 - cx) / rx;
        let dy = (y as f64 - cy) / ry;
        dx * dx + dy * dy <= 1.0
    });
    if m.is_empty() {
        let mut m = m;
        m.set((cx as u32).min(w - 1), (cy as u32).min(h - 1), true);
        m
    } else {
        m
    }
}

/// An annotated image with `n` random (possibly overlapping) blob instances.
pub fn random_annotated<R: Rng>(rng: &mut R, w: u32, h: u32, n: usize) -> AnnotatedImage {
    AnnotatedImage {
        image_id: rng.gen_range(1..1000),
        file_name: "random.png".into(),
        pixels: random_rgb(rng, w, h),
        instances: (0..n)
            .map(|i| InstanceAnnotation {
                instance_id: 100 + i as u64,
                category_id: 1 + (i as u64 % 3),
                mask: random_blob(rng, w, h),
            })
            .collect(),
    }
}

/// Writes a small COCO-style source dataset under `dir` and returns the
/// manifest path: `images` textured PNGs of `w × h`, each with two
/// rectangle polygons.
pub fn write_source_dataset(dir: &Path, images: u64, w: u32, h: u32) -> std::path::PathBuf {
    let mut image_recs = Vec::new();
    let mut anns = Vec::new();
    for id in 1..=images {
        let name = format!("img{id}.png");
        textured(w, h, id as u32).save(dir.join(&name)).unwrap();
        image_recs.push(json!({"id": id, "file_name": name, "width": w, "height": h}));
        let (fw, fh) = (w as f64, h as f64);
        let rects = [(0.1 * fw, 0.2 * fh, 0.4 * fw, 0.6 * fh), (0.5 * fw, 0.3 * fh, 0.85 * fw, 0.8 * fh)];
        for (k, (x0, y0, x1, y1)) in rects.into_iter().enumerate() {
            anns.push(json!({
                "id": id * 10 + k as u64,
                "image_id": id,
                "category_id": k + 1,
                "segmentation": [[x0, y0, x1, y0, x1, y1, x0, y1]],
            }));
        }
    }
    let manifest = json!({
        "images": image_recs,
        "annotations": anns,
        "categories": [{"id": 1, "name": "thing"}, {"id": 2, "name": "stuff"}],
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
