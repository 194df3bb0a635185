//! Loading COCO-style annotated image datasets.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{decode_mask, BinaryMask, MaskEncoding};

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAnnotation {
    pub instance_id: u64,
    pub category_id: u64,
    pub mask: BinaryMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub image_id: u64,
    pub file_name: String,
    pub pixels: RgbImage,
    /// Sorted by `instance_id`.
    pub instances: Vec<InstanceAnnotation>,
}

impl AnnotatedImage {
    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn instance(&self, instance_id: u64) -> Option<&InstanceAnnotation> {
        self.instances.iter().find(|i| i.instance_id == instance_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDataset {
    /// Sorted by `image_id`.
    pub images: Vec<AnnotatedImage>,
    pub categories: Vec<Category>,
    /// Annotations whose `image_id` is not among the images.
    pub dropped_annotations: usize,
    /// Annotations whose decoded mask had no foreground pixel.
    pub rejected_empty: usize,
    /// Crowd regions and annotations outside the category filter.
    pub skipped: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Directory that `file_name` entries are resolved against. Defaults to
    /// the manifest's directory.
    pub image_root: Option<PathBuf>,
    /// Keep only these category IDs when set.
    pub category_filter: Option<BTreeSet<u64>>,
}

#[derive(Deserialize)]
struct ImageRecord {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct AnnotationRecord {
    id: u64,
    image_id: u64,
    category_id: u64,
    segmentation: MaskEncoding,
    #[serde(default)]
    iscrowd: u8,
}

fn records<T: DeserializeOwned>(root: &serde_json::Value, key: &str) -> Result<Vec<T>> {
    let arr = root
        .get(key)
        .ok_or_else(|| Error::parse("manifest", format!("missing required key `{key}`")))?
        .as_array()
        .ok_or_else(|| Error::parse(key, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value(v.clone()).map_err(|e| {
                let id = v.get("id").map(|id| format!(" (id {id})")).unwrap_or_default();
                Error::parse(format!("{key}[{i}]{id}"), e)
            })
        })
        .collect()
}

fn read_rgb(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes)
        .map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(img.to_rgb8())
}

/// Parses a COCO annotation manifest and decodes every instance mask.
///
/// Images and annotations are ordered by ID so that identical inputs yield
/// identical datasets.
pub fn load_dataset(manifest: &Path, opts: &LoadOptions) -> Result<AnnotatedDataset> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let root: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::parse("manifest", e))?;
    if !root.is_object() {
        return Err(Error::parse("manifest", "top level must be an object"));
    }
    let image_recs: Vec<ImageRecord> = records(&root, "images")?;
    let mut ann_recs: Vec<AnnotationRecord> = records(&root, "annotations")?;
    let mut categories: Vec<Category> = records(&root, "categories")?;
    categories.sort_by_key(|c| c.id);

    let image_root = opts
        .image_root
        .clone()
        .unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default());

    let mut images: BTreeMap<u64, AnnotatedImage> = BTreeMap::new();
    for (i, rec) in image_recs.into_iter().enumerate() {
        let path = image_root.join(&rec.file_name);
        let pixels = read_rgb(&path)?;
        if pixels.dimensions() != (rec.width, rec.height) {
            return Err(Error::parse(
                format!("images[{i}] (id {})", rec.id),
                format!(
                    "declared {}x{} but {} is {}x{}",
                    rec.width,
                    rec.height,
                    path.display(),
                    pixels.width(),
                    pixels.height()
                ),
            ));
        }
        let img =
            AnnotatedImage { image_id: rec.id, file_name: rec.file_name, pixels, instances: Vec::new() };
        if images.insert(rec.id, img).is_some() {
            return Err(Error::parse(format!("images[{i}]"), format!("duplicate image id {}", rec.id)));
        }
    }

    ann_recs.sort_by_key(|a| a.id);
    if let Some(w) = ann_recs.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::parse("annotations", format!("duplicate annotation id {}", w[0].id)));
    }

    let (mut dropped, mut empty, mut skipped) = (0, 0, 0);
    for ann in ann_recs {
        let Some(img) = images.get_mut(&ann.image_id) else {
            log::warn!("annotation {} references missing image {}", ann.id, ann.image_id);
            dropped += 1;
            continue;
        };
        let filtered = opts.category_filter.as_ref().is_some_and(|f| !f.contains(&ann.category_id));
        if ann.iscrowd != 0 || filtered {
            skipped += 1;
            continue;
        }
        let mask = decode_mask(&ann.segmentation, img.width(), img.height())
            .map_err(|e| Error::parse(format!("annotation id {}", ann.id), e))?;
        if mask.is_empty() {
            log::warn!("annotation {} has an empty mask; rejected", ann.id);
            empty += 1;
            continue;
        }
        img.instances.push(InstanceAnnotation { instance_id: ann.id, category_id: ann.category_id, mask });
    }

    Ok(AnnotatedDataset {
        images: images.into_values().collect(),
        categories,
        dropped_annotations: dropped,
        rejected_empty: empty,
        skipped,
    })
}
