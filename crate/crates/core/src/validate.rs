//! Re-checking an emitted dataset against the pseudo-video invariants.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::manifest::{read_manifest, DatasetManifest};
use crate::mask::{decode_rle, BinaryMask};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateVideo { video_id: u64 },
    MissingFrame { video_id: u64, frame: usize, path: String },
    FrameDimensions { video_id: u64, frame: usize, path: String },
    FrameCount { video_id: u64, expected: usize, found: usize },
    UnknownVideo { video_id: u64, track_id: u64 },
    DuplicateTrack { video_id: u64, track_id: u64 },
    LengthMismatch { video_id: u64, track_id: u64, expected: usize, found: usize },
    Decode { video_id: u64, track_id: u64, frame: usize, message: String },
    InvisibleTrack { video_id: u64, track_id: u64 },
    Overlap { video_id: u64, frame: usize, track_a: u64, track_b: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub videos: usize,
    pub tracks: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Reads `dataset_dir/manifest.json` and checks it. Only a missing or
/// unparseable manifest is an error; everything else is reported.
pub fn validate_dataset(dataset_dir: &Path) -> Result<ValidationReport> {
    let manifest = read_manifest(dataset_dir)?;
    Ok(validate_manifest(dataset_dir, &manifest))
}

pub fn validate_manifest(dataset_dir: &Path, manifest: &DatasetManifest) -> ValidationReport {
    let mut violations = Vec::new();
    let mut videos = BTreeMap::new();
    for v in &manifest.videos {
        if videos.insert(v.video_id, v).is_some() {
            violations.push(Violation::DuplicateVideo { video_id: v.video_id });
            continue;
        }
        if v.frames.len() != v.length {
            violations.push(Violation::FrameCount {
                video_id: v.video_id,
                expected: v.length,
                found: v.frames.len(),
            });
        }
        for (t, f) in v.frames.iter().enumerate() {
            let path = dataset_dir.join(f);
            match image::image_dimensions(&path) {
                Err(_) if !path.is_file() => violations.push(Violation::MissingFrame {
                    video_id: v.video_id,
                    frame: t,
                    path: f.clone(),
                }),
                Ok(dims) if dims == (v.width, v.height) => {}
                _ => violations.push(Violation::FrameDimensions {
                    video_id: v.video_id,
                    frame: t,
                    path: f.clone(),
                }),
            }
        }
    }

    // decoded visible masks per (video, frame), by track
    let mut per_frame: BTreeMap<(u64, usize), Vec<(u64, BinaryMask)>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for tr in &manifest.tracks {
        let (vid, tid) = (tr.video_id, tr.track_id);
        let Some(video) = videos.get(&vid) else {
            violations.push(Violation::UnknownVideo { video_id: vid, track_id: tid });
            continue;
        };
        if !seen.insert((vid, tid)) {
            violations.push(Violation::DuplicateTrack { video_id: vid, track_id: tid });
            continue;
        }
        if tr.segmentations.len() != video.length {
            violations.push(Violation::LengthMismatch {
                video_id: vid,
                track_id: tid,
                expected: video.length,
                found: tr.segmentations.len(),
            });
        }
        let mut visible = 0;
        let mut decode_failed = false;
        for (t, seg) in tr.segmentations.iter().enumerate() {
            let Some(rle) = seg else { continue };
            let decoded = if rle.size != [video.height, video.width] {
                Err(format!(
                    "size {:?} does not match video {}x{} (h x w)",
                    rle.size, video.height, video.width
                ))
            } else {
                decode_rle(rle).map_err(|e| e.to_string())
            };
            match decoded {
                Ok(m) if m.is_empty() => {}
                Ok(m) => {
                    visible += 1;
                    per_frame.entry((vid, t)).or_default().push((tid, m));
                }
                Err(message) => {
                    decode_failed = true;
                    violations.push(Violation::Decode { video_id: vid, track_id: tid, frame: t, message });
                }
            }
        }
        if visible == 0 && !decode_failed {
            violations.push(Violation::InvisibleTrack { video_id: vid, track_id: tid });
        }
    }

    for ((vid, t), masks) in &per_frame {
        for (i, (a, ma)) in masks.iter().enumerate() {
            for (b, mb) in &masks[i + 1..] {
                if ma.intersects(mb) {
                    violations.push(Violation::Overlap {
                        video_id: *vid,
                        frame: *t,
                        track_a: (*a).min(*b),
                        track_b: (*a).max(*b),
                    });
                }
            }
        }
    }

    violations.sort();
    ValidationReport { videos: manifest.videos.len(), tracks: manifest.tracks.len(), violations }
}
