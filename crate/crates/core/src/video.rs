//! The pseudo-video data model: frames plus per-frame masks keyed by
//! persistent track IDs.

use std::collections::BTreeMap;

use image::RgbImage;

use crate::mask::BinaryMask;

pub type TrackId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub category_id: u64,
    /// One entry per frame; `None` when the instance is not visible.
    pub masks: Vec<Option<BinaryMask>>,
}

impl Track {
    pub fn visible_frames(&self) -> usize {
        self.masks.iter().filter(|m| m.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoVideo {
    pub source_image_id: u64,
    pub frames: Vec<RgbImage>,
    pub tracks: BTreeMap<TrackId, Track>,
}

impl PseudoVideo {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(width, height)` of the frames.
    pub fn dims(&self) -> (u32, u32) {
        self.frames.first().map(|f| f.dimensions()).unwrap_or((0, 0))
    }

    /// Visible masks of frame `t`, by track.
    pub fn frame_masks(&self, t: usize) -> BTreeMap<TrackId, BinaryMask> {
        self.tracks.iter().filter_map(|(&id, tr)| tr.masks[t].clone().map(|m| (id, m))).collect()
    }

    /// Replaces empty masks by `None` and drops tracks with no visible frame.
    pub fn prune_invisible(&mut self) {
        for track in self.tracks.values_mut() {
            for m in track.masks.iter_mut() {
                if m.as_ref().is_some_and(|m| m.is_empty()) {
                    *m = None;
                }
            }
        }
        self.tracks.retain(|_, t| t.visible_frames() > 0);
    }

    /// Checks the structural invariants: equal frame dimensions, one mask slot
    /// per frame, pairwise-disjoint visible masks and at least one visible
    /// frame per track. Returns a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let (w, h) = self.dims();
        if let Some(t) = self.frames.iter().position(|f| f.dimensions() != (w, h)) {
            return Err(format!("frame {t} has mismatched dimensions"));
        }
        for (&id, track) in &self.tracks {
            if track.masks.len() != self.len() {
                return Err(format!(
                    "track {id} has {} mask slots for {} frames",
                    track.masks.len(),
                    self.len()
                ));
            }
            if track.visible_frames() == 0 {
                return Err(format!("track {id} is never visible"));
            }
            for (t, m) in track.masks.iter().enumerate() {
                if let Some(m) = m {
                    if m.dims() != (w, h) {
                        return Err(format!("track {id} frame {t}: mask dimensions differ"));
                    }
                    if m.is_empty() {
                        return Err(format!("track {id} frame {t}: empty mask marked visible"));
                    }
                }
            }
        }
        for t in 0..self.len() {
            let masks: Vec<_> = self.frame_masks(t).into_iter().collect();
            for (i, (a, ma)) in masks.iter().enumerate() {
                for (b, mb) in &masks[i + 1..] {
                    if ma.intersects(mb) {
                        return Err(format!("frame {t}: tracks {a} and {b} overlap"));
                    }
                }
            }
        }
        Ok(())
    }
}
