//! Video morph & splice.
//!
//! A still image is replicated into a naive clip (one random rotation per
//! frame). Instances of the same image are then cut out, moved along a
//! smooth per-frame affine trajectory and pasted back. Each pasted pixel
//! replaces the frame pixel, and every mask it covers loses that pixel.

use std::collections::BTreeMap;

use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::affine::{warp_mask, warp_rgb, warp_rgb_where, Affine};
use crate::error::{Error, Result};
use crate::ingest::AnnotatedImage;
use crate::mask::BinaryMask;
use crate::video::{PseudoVideo, Track, TrackId};

/// An instance cut out of its image: pixels are zero outside the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceLayer {
    pub pixels: RgbImage,
    pub mask: BinaryMask,
}

/// Bounds on the per-instance morph trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorphBounds {
    /// Scale lies in `[1 - scale_max, 1 + scale_max]`.
    pub scale_max: f64,
    /// Rotation lies in `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    /// Endpoint translation per axis, as a fraction of the canvas side.
    pub translate_frac: f64,
    pub flip_probability: f64,
    /// Draw every frame's parameters independently instead of
    /// interpolating towards one endpoint.
    pub independent_frames: bool,
}

impl Default for MorphBounds {
    fn default() -> Self {
        Self {
            scale_max: 0.1,
            rotation_deg: 15.0,
            translate_frac: 0.1,
            flip_probability: 0.5,
            independent_frames: false,
        }
    }
}

impl MorphBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.scale_max)
            && self.rotation_deg >= 0.0
            && self.rotation_deg.is_finite()
            && self.translate_frac >= 0.0
            && self.translate_frac.is_finite()
            && (0.0..=1.0).contains(&self.flip_probability);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid morph bounds {self:?}")))
        }
    }
}

/// One frame's morph, applied about an anchor point as
/// flip, then scale, then rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphParams {
    pub hflip: bool,
    pub scale: f64,
    pub rotate_deg: f64,
    pub translate: (f64, f64),
}

impl MorphParams {
    pub fn identity() -> Self {
        Self { hflip: false, scale: 1.0, rotate_deg: 0.0, translate: (0.0, 0.0) }
    }

    pub fn affine(&self, anchor: (f64, f64)) -> Affine {
        let (cx, cy) = anchor;
        let mut a = Affine::IDENTITY;
        if self.hflip {
            a = a.then(&Affine::hflip_about(cx));
        }
        a.then(&Affine::scale_about(self.scale, self.scale, cx, cy))
            .then(&Affine::rotate_about(self.rotate_deg, cx, cy))
            .then(&Affine::translate(self.translate.0, self.translate.1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphSchedule {
    pub per_frame: Vec<MorphParams>,
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    bound * (2.0 * rng.gen::<f64>() - 1.0)
}

fn draw_params<R: Rng + ?Sized>(
    rng: &mut R,
    bounds: &MorphBounds,
    hflip: bool,
    canvas: (u32, u32),
) -> MorphParams {
    let scale = 1.0 + symmetric(rng, bounds.scale_max);
    let rotate_deg = symmetric(rng, bounds.rotation_deg);
    let dx = symmetric(rng, bounds.translate_frac * canvas.0 as f64);
    let dy = symmetric(rng, bounds.translate_frac * canvas.1 as f64);
    MorphParams { hflip, scale, rotate_deg, translate: (dx, dy) }
}

/// Samples a `frames`-long morph schedule.
///
/// Draw order: the flip decision, then scale, rotation, x and y translation
/// of the endpoint. Frame `t` interpolates linearly from the identity at
/// `t = 0` to the endpoint at `t = frames - 1`; a single-frame schedule is the
/// endpoint itself. In independent mode the four parameter draws repeat for
/// every frame and the flip is still drawn once.
pub fn sample_morph_schedule<R: Rng + ?Sized>(
    rng: &mut R,
    frames: usize,
    bounds: &MorphBounds,
    canvas: (u32, u32),
) -> MorphSchedule {
    let hflip = rng.gen::<f64>() < bounds.flip_probability;
    if bounds.independent_frames {
        let per_frame = (0..frames).map(|_| draw_params(rng, bounds, hflip, canvas)).collect();
        return MorphSchedule { per_frame };
    }
    let end = draw_params(rng, bounds, hflip, canvas);
    let per_frame = (0..frames)
        .map(|t| {
            let alpha = if frames > 1 { t as f64 / (frames - 1) as f64 } else { 1.0 };
            MorphParams {
                hflip,
                scale: 1.0 + alpha * (end.scale - 1.0),
                rotate_deg: alpha * end.rotate_deg,
                translate: (alpha * end.translate.0, alpha * end.translate.1),
            }
        })
        .collect();
    MorphSchedule { per_frame }
}

/// Replicates `image` into `frames` frames, each rotated about the canvas
/// center by an angle drawn uniformly from `[-rot_range, rot_range]` (one
/// draw per frame). Masks are co-rotated with nearest-neighbour sampling;
/// track IDs are the source annotation IDs.
///
/// Overlapping source annotations are made disjoint first: a pixel claimed
/// by several instances goes to the one with the highest ID. An instance
/// left with no pixel is dropped.
pub fn make_naive_video<R: Rng + ?Sized>(
    image: &AnnotatedImage,
    frames: usize,
    rot_range: f64,
    rng: &mut R,
) -> Result<PseudoVideo> {
    if frames == 0 {
        return Err(Error::Config("clip length must be at least 1".into()));
    }
    let (w, h) = image.pixels.dimensions();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let sources = disjoint_source_masks(image);
    let mut tracks: BTreeMap<TrackId, Track> = image
        .instances
        .iter()
        .map(|inst| {
            (inst.instance_id, Track { category_id: inst.category_id, masks: Vec::with_capacity(frames) })
        })
        .collect();
    let mut out_frames = Vec::with_capacity(frames);
    for _ in 0..frames {
        let theta = symmetric(rng, rot_range);
        if theta == 0.0 {
            out_frames.push(image.pixels.clone());
            for (inst, m) in image.instances.iter().zip(&sources) {
                tracks.get_mut(&inst.instance_id).unwrap().masks.push(Some(m.clone()));
            }
            continue;
        }
        let rot = Affine::rotate_about(theta, cx, cy);
        out_frames.push(warp_rgb(&image.pixels, &rot, w, h)?);
        for (inst, m) in image.instances.iter().zip(&sources) {
            let m = warp_mask(m, &rot, w, h)?;
            tracks.get_mut(&inst.instance_id).unwrap().masks.push(Some(m));
        }
    }
    let mut video = PseudoVideo { source_image_id: image.image_id, frames: out_frames, tracks };
    video.prune_invisible();
    Ok(video)
}

/// Instance masks in `image.instances` order, each minus the masks of all
/// instances with a higher ID.
fn disjoint_source_masks(image: &AnnotatedImage) -> Vec<BinaryMask> {
    let mut order: Vec<usize> = (0..image.instances.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(image.instances[i].instance_id));
    let mut taken = BinaryMask::new(image.width(), image.height());
    let mut out = vec![taken.clone(); image.instances.len()];
    for i in order {
        let m = &image.instances[i].mask;
        out[i] = m.subtract(&taken);
        taken = taken.union(m);
    }
    out
}

/// `I ⊙ m` for one annotated instance.
pub fn extract_instance(image: &AnnotatedImage, instance_id: u64) -> Result<InstanceLayer> {
    let inst = image
        .instance(instance_id)
        .ok_or_else(|| Error::Lookup(format!("image {} has no instance {instance_id}", image.image_id)))?;
    let mut pixels = image.pixels.clone();
    for (x, y, p) in pixels.enumerate_pixels_mut() {
        if !inst.mask.get(x, y) {
            p.0 = [0, 0, 0];
        }
    }
    Ok(InstanceLayer { pixels, mask: inst.mask.clone() })
}

/// Warps a layer onto a `canvas = (width, height)` canvas: the mask with
/// nearest-neighbour sampling, the pixels bilinearly and then re-masked.
pub fn warp_layer(layer: &InstanceLayer, affine: &Affine, canvas: (u32, u32)) -> Result<InstanceLayer> {
    let (w, h) = canvas;
    let mask = warp_mask(&layer.mask, affine, w, h)?;
    let pixels = warp_rgb_where(&layer.pixels, affine, w, h, |x, y| mask.get(x, y))?;
    Ok(InstanceLayer { pixels, mask })
}

/// Output of pasting one warped layer into one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Splice {
    pub frame: RgbImage,
    /// Every pre-existing track, `None` where the paste hid it completely.
    pub masks: BTreeMap<TrackId, Option<BinaryMask>>,
    /// The pasted instance's mask, `None` when it landed fully off-canvas.
    pub spliced: Option<BinaryMask>,
}

/// Pastes `warped` into `frame`: the output pixel is the layer pixel where
/// the layer mask is set and the frame pixel elsewhere, and every existing
/// mask `m` becomes `m ∧ ¬mask`.
pub fn splice_frame(
    frame: &RgbImage,
    existing: &BTreeMap<TrackId, BinaryMask>,
    warped: &InstanceLayer,
) -> Result<Splice> {
    let dims = frame.dimensions();
    if warped.pixels.dimensions() != dims || warped.mask.dims() != dims {
        return Err(Error::Geometry(format!("layer is {:?}, frame is {dims:?}", warped.mask.dims())));
    }
    if let Some((id, _)) = existing.iter().find(|(_, m)| m.dims() != dims) {
        return Err(Error::Geometry(format!("mask of track {id} does not match frame {dims:?}")));
    }
    let mut out = frame.clone();
    for (x, y, p) in out.enumerate_pixels_mut() {
        if warped.mask.get(x, y) {
            *p = *warped.pixels.get_pixel(x, y);
        }
    }
    let masks = existing
        .iter()
        .map(|(&id, m)| {
            let updated = m.subtract(&warped.mask);
            (id, (!updated.is_empty()).then_some(updated))
        })
        .collect();
    Ok(Splice { frame: out, masks, spliced: (!warped.mask.is_empty()).then(|| warped.mask.clone()) })
}

/// Configuration of a full morph & splice pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmospConfig {
    /// Rotation range of the naive clip, in degrees.
    pub rotation_deg: f64,
    pub morph: MorphBounds,
}

impl Default for VmospConfig {
    fn default() -> Self {
        Self { rotation_deg: 15.0, morph: MorphBounds::default() }
    }
}

/// Splices up to `n_instances` instances of `image` into `video`.
///
/// Instances are chosen uniformly without replacement from the image. Each
/// gets a fresh track ID above every existing ID and keeps its source
/// category. Later splices are layered on top of earlier ones.
///
/// Draw order: the instance selection, then one morph schedule per selected
/// instance in selection order.
pub fn vmosp_splice<R: Rng + ?Sized>(
    video: &PseudoVideo,
    image: &AnnotatedImage,
    n_instances: usize,
    rng: &mut R,
    morph: &MorphBounds,
) -> Result<PseudoVideo> {
    if image.instances.is_empty() {
        return Err(Error::Input(format!("image {} has no instances to splice", image.image_id)));
    }
    if n_instances == 0 {
        return Err(Error::Input("n_instances must be at least 1".into()));
    }
    let canvas = image.pixels.dimensions();
    if video.dims() != canvas {
        return Err(Error::Geometry(format!("video is {:?} but image is {canvas:?}", video.dims())));
    }
    let count = n_instances.min(image.instances.len());
    let picks = rand::seq::index::sample(rng, image.instances.len(), count).into_vec();
    let schedules: Vec<MorphSchedule> =
        picks.iter().map(|_| sample_morph_schedule(rng, video.len(), morph, canvas)).collect();

    let mut out = video.clone();
    let first_id =
        image.instances.iter().map(|i| i.instance_id).chain(video.tracks.keys().copied()).max().unwrap_or(0)
            + 1;
    for ((pick, schedule), new_id) in picks.into_iter().zip(schedules).zip(first_id..) {
        let source = &image.instances[pick];
        let layer = extract_instance(image, source.instance_id)?;
        let anchor = source.mask.centroid().expect("ingest rejects empty masks");
        let mut spliced_masks = Vec::with_capacity(out.len());
        for (t, params) in schedule.per_frame.iter().enumerate() {
            let warped = warp_layer(&layer, &params.affine(anchor), canvas)?;
            let splice = splice_frame(&out.frames[t], &out.frame_masks(t), &warped)?;
            out.frames[t] = splice.frame;
            for (id, m) in splice.masks {
                out.tracks.get_mut(&id).unwrap().masks[t] = m;
            }
            spliced_masks.push(splice.spliced);
        }
        out.tracks.insert(new_id, Track { category_id: source.category_id, masks: spliced_masks });
    }
    out.prune_invisible();
    Ok(out)
}

/// Naive clip followed by a splice pass.
pub fn vmosp_augment<R: Rng + ?Sized>(
    image: &AnnotatedImage,
    frames: usize,
    n_instances: usize,
    rng: &mut R,
    cfg: &VmospConfig,
) -> Result<PseudoVideo> {
    if image.instances.is_empty() {
        return Err(Error::Input(format!("image {} has no instances", image.image_id)));
    }
    let naive = make_naive_video(image, frames, cfg.rotation_deg, rng)?;
    vmosp_splice(&naive, image, n_instances, rng, &cfg.morph)
}
