//! Consistent stochastic augmentation: one blend of up to `k` ops, sampled
//! once per clip and applied with identical parameters to every frame.
//!
//! A magnitude of zero is the identity for every parametric op. `equalize`
//! and `hflip` ignore their magnitude.

use image::{Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::affine::{warp_mask, warp_rgb, Affine};
use crate::error::{Error, Result};
use crate::video::PseudoVideo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugKind {
    /// Additive offset on every channel.
    Brightness,
    /// Factor `1 + m` about the mean luminance.
    Contrast,
    /// Factor `1 + m` about each pixel's luminance.
    Saturation,
    /// Hue rotation by `m` degrees.
    Hue,
    /// Factor `1 + m` against a 3×3 smoothed copy.
    Sharpness,
    /// Clears the `round(m)` low bits.
    Posterize,
    /// Inverts values `>= 256 - m`.
    Solarize,
    Equalize,
    /// Shift by `m × width`.
    TranslateX,
    /// Shift by `m × height`.
    TranslateY,
    ShearX,
    ShearY,
    /// Isotropic scale `1 + m` about the canvas center.
    Scale,
    /// Rotation by `m` degrees about the canvas center.
    Rotate,
    #[serde(rename = "hflip")]
    HFlip,
}

impl AugKind {
    pub const ALL: [AugKind; 15] = [
        AugKind::Brightness,
        AugKind::Contrast,
        AugKind::Saturation,
        AugKind::Hue,
        AugKind::Sharpness,
        AugKind::Posterize,
        AugKind::Solarize,
        AugKind::Equalize,
        AugKind::TranslateX,
        AugKind::TranslateY,
        AugKind::ShearX,
        AugKind::ShearY,
        AugKind::Scale,
        AugKind::Rotate,
        AugKind::HFlip,
    ];

    pub fn is_spatial(self) -> bool {
        matches!(
            self,
            AugKind::TranslateX
                | AugKind::TranslateY
                | AugKind::ShearX
                | AugKind::ShearY
                | AugKind::Scale
                | AugKind::Rotate
                | AugKind::HFlip
        )
    }
}

/// An op kind with the closed interval its magnitude is sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugOpSpec {
    pub kind: AugKind,
    pub magnitude: [f64; 2],
}

/// The built-in 15-op pool; `rotation_deg` bounds the rotate op.
pub fn default_pool(rotation_deg: f64) -> Vec<AugOpSpec> {
    use AugKind::*;
    let spec = |kind, lo, hi| AugOpSpec { kind, magnitude: [lo, hi] };
    vec![
        spec(Brightness, -40.0, 40.0),
        spec(Contrast, -0.4, 0.4),
        spec(Saturation, -0.5, 0.5),
        spec(Hue, -18.0, 18.0),
        spec(Sharpness, -0.5, 0.9),
        spec(Posterize, 0.0, 4.0),
        spec(Solarize, 0.0, 128.0),
        spec(Equalize, 0.0, 0.0),
        spec(TranslateX, -0.1, 0.1),
        spec(TranslateY, -0.1, 0.1),
        spec(ShearX, -0.15, 0.15),
        spec(ShearY, -0.15, 0.15),
        spec(Scale, -0.1, 0.1),
        spec(Rotate, -rotation_deg, rotation_deg),
        spec(HFlip, 0.0, 0.0),
    ]
}

/// Checks interval sanity and the rotation bound.
pub fn validate_pool(pool: &[AugOpSpec], rotation_deg: f64) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::Config("augmentation pool is empty".into()));
    }
    for (i, op) in pool.iter().enumerate() {
        let [lo, hi] = op.magnitude;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!(
                "pool[{i}] ({:?}): magnitude range [{lo}, {hi}] is empty or not finite",
                op.kind
            )));
        }
        if op.kind == AugKind::Rotate && (lo < -rotation_deg || hi > rotation_deg) {
            return Err(Error::Config(format!(
                "pool[{i}]: rotate range [{lo}, {hi}] exceeds rotation bound ±{rotation_deg}"
            )));
        }
        if op.kind == AugKind::Posterize && (lo < 0.0 || hi > 7.0) {
            return Err(Error::Config(format!("pool[{i}]: posterize bits must lie in [0, 7]")));
        }
        if op.kind == AugKind::Solarize && (lo < 0.0 || hi > 256.0) {
            return Err(Error::Config(format!("pool[{i}]: solarize range must lie in [0, 256]")));
        }
        // scale factor is 1 + magnitude and must stay positive
        if op.kind == AugKind::Scale && lo <= -1.0 {
            return Err(Error::Config(format!("pool[{i}]: scale magnitude must be > -1")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugOp {
    pub kind: AugKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBlend {
    pub ops: Vec<AugOp>,
}

impl CostBlend {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// The blend's spatial ops folded, in order, into one affine for a
    /// `width × height` canvas.
    pub fn composed_affine(&self, width: u32, height: u32) -> Affine {
        self.ops
            .iter()
            .filter_map(|op| spatial_affine(op, width, height))
            .fold(Affine::IDENTITY, |acc, a| acc.then(&a))
    }
}

/// Samples a blend. Draw order: the blend length uniformly from `0..=k`,
/// then the op identities without replacement, then one uniform draw per
/// chosen op for its magnitude.
pub fn sample_cost_blend<R: Rng + ?Sized>(rng: &mut R, pool: &[AugOpSpec], k: usize) -> Result<CostBlend> {
    if pool.is_empty() {
        return Err(Error::Config("augmentation pool is empty".into()));
    }
    if k > pool.len() {
        return Err(Error::Config(format!("cost_k = {k} exceeds pool size {}", pool.len())));
    }
    let len = rng.gen_range(0..=k);
    let picks = rand::seq::index::sample(rng, pool.len(), len).into_vec();
    let ops = picks
        .into_iter()
        .map(|i| {
            let [lo, hi] = pool[i].magnitude;
            let u: f64 = rng.gen();
            AugOp { kind: pool[i].kind, magnitude: lo + (hi - lo) * u }
        })
        .collect();
    Ok(CostBlend { ops })
}

/// Affine of a spatial op on a `width × height` canvas; `None` for photometric ops.
pub fn spatial_affine(op: &AugOp, width: u32, height: u32) -> Option<Affine> {
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let m = op.magnitude;
    Some(match op.kind {
        AugKind::TranslateX => Affine::translate(m * width as f64, 0.0),
        AugKind::TranslateY => Affine::translate(0.0, m * height as f64),
        AugKind::ShearX => Affine::shear_x_about(m, cx, cy),
        AugKind::ShearY => Affine::shear_y_about(m, cx, cy),
        AugKind::Scale => Affine::scale_about(1.0 + m, 1.0 + m, cx, cy),
        AugKind::Rotate => Affine::rotate_about(m, cx, cy),
        AugKind::HFlip => Affine::hflip_about(cx),
        _ => return None,
    })
}

/// Result of applying one op to a frame. Spatial ops report the affine they
/// used so masks can be co-warped.
#[derive(Debug, Clone, PartialEq)]
pub struct OpOutput {
    pub frame: RgbImage,
    pub affine: Option<Affine>,
}

pub fn apply_op(frame: &RgbImage, op: &AugOp) -> OpOutput {
    match spatial_affine(op, frame.width(), frame.height()) {
        Some(affine) => OpOutput {
            // spatial affines are never singular for in-range magnitudes
            frame: warp_rgb(frame, &affine, frame.width(), frame.height())
                .unwrap_or_else(|_| RgbImage::new(frame.width(), frame.height())),
            affine: Some(affine),
        },
        None => OpOutput { frame: apply_photometric(frame, op), affine: None },
    }
}

/// Applies the blend to every frame: photometric ops first, in blend order,
/// then all spatial ops as one composed warp (bilinear for frames, nearest
/// neighbour for masks). Masks emptied by the warp become not-visible and
/// tracks left with no visible frame are dropped.
pub fn apply_cost_blend(video: &PseudoVideo, blend: &CostBlend) -> Result<PseudoVideo> {
    let mut out = video.clone();
    if blend.is_empty() {
        return Ok(out);
    }
    let (w, h) = video.dims();
    let affine = blend.composed_affine(w, h);
    let photometric: Vec<&AugOp> = blend.ops.iter().filter(|op| !op.kind.is_spatial()).collect();
    for frame in out.frames.iter_mut() {
        for op in &photometric {
            *frame = apply_photometric(frame, op);
        }
        if !affine.is_identity() {
            *frame = warp_rgb(frame, &affine, w, h)?;
        }
    }
    if !affine.is_identity() {
        for track in out.tracks.values_mut() {
            for m in track.masks.iter_mut().flatten() {
                *m = warp_mask(m, &affine, w, h)?;
            }
        }
        out.prune_invisible();
    }
    Ok(out)
}

#[inline]
fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[inline]
fn luminance(p: &Rgb<u8>) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

fn apply_photometric(frame: &RgbImage, op: &AugOp) -> RgbImage {
    let m = op.magnitude;
    let mut out = frame.clone();
    match op.kind {
        AugKind::Brightness => {
            if m == 0.0 {
                return out;
            }
            for p in out.pixels_mut() {
                p.0 = p.0.map(|v| clamp_u8(v as f64 + m));
            }
        }
        AugKind::Contrast => {
            if m == 0.0 {
                return out;
            }
            let n = (frame.width() as f64 * frame.height() as f64).max(1.0);
            let mean = frame.pixels().map(luminance).sum::<f64>() / n;
            let f = 1.0 + m;
            for p in out.pixels_mut() {
                p.0 = p.0.map(|v| clamp_u8(mean + f * (v as f64 - mean)));
            }
        }
        AugKind::Saturation => {
            if m == 0.0 {
                return out;
            }
            let f = 1.0 + m;
            for p in out.pixels_mut() {
                let g = luminance(p);
                p.0 = p.0.map(|v| clamp_u8(g + f * (v as f64 - g)));
            }
        }
        AugKind::Hue => {
            if m == 0.0 {
                return out;
            }
            for p in out.pixels_mut() {
                *p = rotate_hue(p, m);
            }
        }
        AugKind::Sharpness => {
            if m == 0.0 {
                return out;
            }
            sharpen(frame, &mut out, 1.0 + m);
        }
        AugKind::Posterize => {
            let bits = m.round().clamp(0.0, 7.0) as u32;
            let keep = !((1u8 << bits) - 1);
            for p in out.pixels_mut() {
                p.0 = p.0.map(|v| v & keep);
            }
        }
        AugKind::Solarize => {
            let threshold = 256.0 - m;
            for p in out.pixels_mut() {
                p.0 = p.0.map(|v| if v as f64 >= threshold { 255 - v } else { v });
            }
        }
        AugKind::Equalize => equalize(&mut out),
        _ => {}
    }
    out
}

fn rotate_hue(p: &Rgb<u8>, deg: f64) -> Rgb<u8> {
    let [r, g, b] = p.0.map(|v| v as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    if delta == 0.0 {
        return *p;
    }
    let hue = if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let hue = (hue + deg).rem_euclid(360.0);
    let sector = hue / 60.0;
    let x = delta * (1.0 - (sector.rem_euclid(2.0) - 1.0).abs());
    let (r1, g1, b1) = match sector as u32 {
        0 => (delta, x, 0.0),
        1 => (x, delta, 0.0),
        2 => (0.0, delta, x),
        3 => (0.0, x, delta),
        4 => (x, 0.0, delta),
        _ => (delta, 0.0, x),
    };
    Rgb([r1, g1, b1].map(|v| clamp_u8((v + min) * 255.0)))
}

/// Blends against a 3×3 smoothed copy (center weight 5, neighbours 1);
/// border pixels are left untouched.
fn sharpen(src: &RgbImage, out: &mut RgbImage, factor: f64) {
    let (w, h) = src.dimensions();
    if w < 3 || h < 3 {
        return;
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let mut acc = [0.0f64; 3];
            for dy in 0..3 {
                for dx in 0..3 {
                    let wgt = if dx == 1 && dy == 1 { 5.0 } else { 1.0 };
                    let p = src.get_pixel(x + dx - 1, y + dy - 1);
                    for ch in 0..3 {
                        acc[ch] += wgt * p[ch] as f64;
                    }
                }
            }
            let orig = src.get_pixel(x, y);
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let blur = (acc[ch] / 13.0).round();
                px[ch] = clamp_u8(blur + factor * (orig[ch] as f64 - blur));
            }
            out.put_pixel(x, y, Rgb(px));
        }
    }
}

/// Per-channel histogram equalization.
fn equalize(img: &mut RgbImage) {
    for ch in 0..3 {
        let mut hist = [0u64; 256];
        for p in img.pixels() {
            hist[p[ch] as usize] += 1;
        }
        let total: u64 = hist.iter().sum();
        let last = hist.iter().rev().find(|&&c| c > 0).copied().unwrap_or(0);
        let step = (total - last) / 255;
        if step == 0 {
            continue;
        }
        let mut lut = [0u8; 256];
        let mut n = step / 2;
        for (i, slot) in lut.iter_mut().enumerate() {
            *slot = (n / step).min(255) as u8;
            n += hist[i];
        }
        for p in img.pixels_mut() {
            p[ch] = lut[p[ch] as usize];
        }
    }
}
