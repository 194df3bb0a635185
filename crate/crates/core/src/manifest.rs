//! On-disk dataset layout.
//!
//! ```text
//! <out>/manifest.json
//! <out>/videos/<video_id>/<frame_idx>.png
//! ```
//!
//! Track masks are embedded in the manifest as uncompressed column-major
//! run-length records, `null` for frames where the track is not visible.
//! Track IDs are unique within their video.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Category;
use crate::mask::{decode_rle, encode_mask, Rle};
use crate::video::{PseudoVideo, Track};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: u64,
    pub source_image_id: u64,
    pub width: u32,
    pub height: u32,
    pub length: usize,
    /// Frame paths relative to the dataset directory.
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub track_id: u64,
    pub video_id: u64,
    pub category_id: u64,
    pub segmentations: Vec<Option<Rle>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub tool_version: String,
    pub master_seed: u64,
    /// SHA-256 of the canonical generation config.
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub videos: Vec<VideoRecord>,
    pub tracks: Vec<TrackRecord>,
    pub categories: Vec<Category>,
    pub fingerprint: Fingerprint,
}

pub fn frame_path(video_id: u64, frame: usize) -> String {
    format!("videos/{video_id}/{frame}.png")
}

/// Manifest records for one video. Tracks are emitted in track ID order.
pub fn records_for(video_id: u64, video: &PseudoVideo) -> (VideoRecord, Vec<TrackRecord>) {
    let (width, height) = video.dims();
    let record = VideoRecord {
        video_id,
        source_image_id: video.source_image_id,
        width,
        height,
        length: video.len(),
        frames: (0..video.len()).map(|t| frame_path(video_id, t)).collect(),
    };
    let tracks = video
        .tracks
        .iter()
        .map(|(&track_id, tr)| TrackRecord {
            track_id,
            video_id,
            category_id: tr.category_id,
            segmentations: tr.masks.iter().map(|m| m.as_ref().map(encode_mask)).collect(),
        })
        .collect();
    (record, tracks)
}

/// Writes frames of one video under `out_dir`.
pub fn write_frames(out_dir: &Path, video_id: u64, video: &PseudoVideo) -> Result<()> {
    let dir = out_dir.join("videos").join(video_id.to_string());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (t, frame) in video.frames.iter().enumerate() {
        let path = out_dir.join(frame_path(video_id, t));
        frame
            .save_with_format(&path, image::ImageFormat::Png)
            .map_err(|e| Error::Image { path: path.clone(), message: e.to_string() })?;
    }
    Ok(())
}

pub fn write_manifest(out_dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    let path = out_dir.join(MANIFEST_FILE);
    let mut bytes = serde_json::to_vec_pretty(manifest).map_err(|e| Error::parse("manifest", e))?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dataset_dir: &Path) -> Result<DatasetManifest> {
    let path = dataset_dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

/// Reconstructs one video (frames and decoded masks) from an emitted dataset.
pub fn load_video(dataset_dir: &Path, manifest: &DatasetManifest, video_id: u64) -> Result<PseudoVideo> {
    let rec = manifest
        .videos
        .iter()
        .find(|v| v.video_id == video_id)
        .ok_or_else(|| Error::Lookup(format!("no video {video_id} in manifest")))?;
    let frames = rec
        .frames
        .iter()
        .map(|f| {
            let path = dataset_dir.join(f);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            image::load_from_memory(&bytes)
                .map(|img| img.to_rgb8())
                .map_err(|e| Error::Image { path, message: e.to_string() })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tracks = BTreeMap::new();
    for tr in manifest.tracks.iter().filter(|t| t.video_id == video_id) {
        let masks = tr
            .segmentations
            .iter()
            .map(|s| s.as_ref().map(decode_rle).transpose())
            .collect::<Result<Vec<_>>>()?;
        tracks.insert(tr.track_id, Track { category_id: tr.category_id, masks });
    }
    Ok(PseudoVideo { source_image_id: rec.source_image_id, frames, tracks })
}
