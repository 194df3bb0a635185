//! 2-D affine transforms and the two resamplers used throughout: nearest
//! neighbour for masks (keeps them binary) and bilinear for color rasters.
//!
//! Coordinates are pixel centers: pixel `(col, row)` sits at `(col, row)`,
//! with `y` pointing down.

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// `(x, y) -> (a·x + b·y + tx, c·x + d·y + ty)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for Affine {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Affine {
    pub const IDENTITY: Affine = Affine { a: 1.0, b: 0.0, c: 0.0, d: 1.0, tx: 0.0, ty: 0.0 };

    pub fn translate(dx: f64, dy: f64) -> Self {
        Affine { tx: dx, ty: dy, ..Self::IDENTITY }
    }

    /// Linear part `[[a, b], [c, d]]` applied about the anchor `(cx, cy)`.
    pub fn linear_about(a: f64, b: f64, c: f64, d: f64, cx: f64, cy: f64) -> Self {
        Affine { a, b, c, d, tx: cx - a * cx - b * cy, ty: cy - c * cx - d * cy }
    }

    /// Rotation by `deg` degrees about `(cx, cy)`. With `y` down, positive
    /// angles turn clockwise on screen.
    pub fn rotate_about(deg: f64, cx: f64, cy: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self::linear_about(c, -s, s, c, cx, cy)
    }

    pub fn scale_about(sx: f64, sy: f64, cx: f64, cy: f64) -> Self {
        Self::linear_about(sx, 0.0, 0.0, sy, cx, cy)
    }

    /// Horizontal mirror about the vertical line `x = cx`.
    pub fn hflip_about(cx: f64) -> Self {
        Self::linear_about(-1.0, 0.0, 0.0, 1.0, cx, 0.0)
    }

    /// `x += k·(y − cy)`
    pub fn shear_x_about(k: f64, cx: f64, cy: f64) -> Self {
        Self::linear_about(1.0, k, 0.0, 1.0, cx, cy)
    }

    /// `y += k·(x − cx)`
    pub fn shear_y_about(k: f64, cx: f64, cy: f64) -> Self {
        Self::linear_about(1.0, 0.0, k, 1.0, cx, cy)
    }

    /// The transform that applies `self` first and then `next`.
    pub fn then(&self, next: &Affine) -> Affine {
        Affine {
            a: next.a * self.a + next.b * self.c,
            b: next.a * self.b + next.b * self.d,
            c: next.c * self.a + next.d * self.c,
            d: next.c * self.b + next.d * self.d,
            tx: next.a * self.tx + next.b * self.ty + next.tx,
            ty: next.c * self.tx + next.d * self.ty + next.ty,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn inverse(&self) -> Result<Affine> {
        let det = self.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::Geometry(format!("singular affine (determinant {det})")));
        }
        let (a, b, c, d) = (self.d / det, -self.b / det, -self.c / det, self.a / det);
        Ok(Affine { a, b, c, d, tx: -(a * self.tx + b * self.ty), ty: -(c * self.tx + d * self.ty) })
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.a * x + self.b * y + self.tx, self.c * x + self.d * y + self.ty)
    }
}

#[inline]
fn nearest(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Nearest-neighbour warp of a mask onto a `width × height` canvas.
/// Content mapped outside the canvas is clipped.
pub fn warp_mask(mask: &BinaryMask, affine: &Affine, width: u32, height: u32) -> Result<BinaryMask> {
    let inv = affine.inverse()?;
    let mut out = BinaryMask::new(width, height);
    let Some((bx0, by0, bx1, by1)) = mask.bbox() else {
        return Ok(out);
    };
    // Only target pixels inside the forward image of the (half-pixel padded)
    // source bounding box can round back onto a source foreground pixel.
    let corners = [
        affine.apply(bx0 as f64 - 0.5, by0 as f64 - 0.5),
        affine.apply(bx1 as f64 + 0.5, by0 as f64 - 0.5),
        affine.apply(bx0 as f64 - 0.5, by1 as f64 + 0.5),
        affine.apply(bx1 as f64 + 0.5, by1 as f64 + 0.5),
    ];
    let (mut x_lo, mut y_lo, mut x_hi, mut y_hi) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for (x, y) in corners {
        x_lo = x_lo.min(x);
        y_lo = y_lo.min(y);
        x_hi = x_hi.max(x);
        y_hi = y_hi.max(y);
    }
    let x0 = (x_lo.floor() as i64 - 1).max(0);
    let y0 = (y_lo.floor() as i64 - 1).max(0);
    let x1 = (x_hi.ceil() as i64 + 1).min(width as i64 - 1);
    let y1 = (y_hi.ceil() as i64 + 1).min(height as i64 - 1);
    let (sw, sh) = (mask.width() as i64, mask.height() as i64);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (sx, sy) = inv.apply(x as f64, y as f64);
            let (sx, sy) = (nearest(sx), nearest(sy));
            if sx >= 0 && sy >= 0 && sx < sw && sy < sh && mask.get(sx as u32, sy as u32) {
                out.set(x as u32, y as u32, true);
            }
        }
    }
    Ok(out)
}

/// Bilinear sample at a fractional source position; neighbours outside the
/// raster read as black.
#[inline]
fn sample_bilinear(img: &RgbImage, sx: f64, sy: f64) -> Rgb<u8> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let mut acc = [0.0f64; 3];
    for (dx, dy, wgt) in
        [(0, 0, (1.0 - fx) * (1.0 - fy)), (1, 0, fx * (1.0 - fy)), (0, 1, (1.0 - fx) * fy), (1, 1, fx * fy)]
    {
        if wgt == 0.0 {
            continue;
        }
        let (x, y) = (x0 + dx, y0 + dy);
        if x < 0 || y < 0 || x >= w || y >= h {
            continue;
        }
        let p = img.get_pixel(x as u32, y as u32);
        for ch in 0..3 {
            acc[ch] += wgt * p[ch] as f64;
        }
    }
    Rgb(acc.map(|v| v.round().clamp(0.0, 255.0) as u8))
}

/// Bilinear warp of a color raster onto a `width × height` canvas. Target
/// pixels whose source falls off the raster are black.
pub fn warp_rgb(img: &RgbImage, affine: &Affine, width: u32, height: u32) -> Result<RgbImage> {
    warp_rgb_where(img, affine, width, height, |_, _| true)
}

/// Like [`warp_rgb`] but only evaluates target pixels selected by `keep`;
/// all others are zero.
pub fn warp_rgb_where(
    img: &RgbImage,
    affine: &Affine,
    width: u32,
    height: u32,
    keep: impl Fn(u32, u32) -> bool,
) -> Result<RgbImage> {
    let inv = affine.inverse()?;
    let mut out = RgbImage::new(width, height);
    for (x, y, px) in out.enumerate_pixels_mut() {
        if keep(x, y) {
            let (sx, sy) = inv.apply(x as f64, y as f64);
            *px = sample_bilinear(img, sx, sy);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_matches_sequential_application() {
        let a = Affine::rotate_about(30.0, 3.0, 2.0);
        let b = Affine::translate(1.5, -2.0).then(&Affine::scale_about(1.2, 0.8, 0.0, 0.0));
        let ab = a.then(&b);
        let (x, y) = (4.0, -1.0);
        let (x1, y1) = a.apply(x, y);
        let (x2, y2) = b.apply(x1, y1);
        let (x3, y3) = ab.apply(x, y);
        assert!((x2 - x3).abs() < 1e-12 && (y2 - y3).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trips() {
        let a = Affine::rotate_about(17.0, 5.0, 5.0).then(&Affine::shear_x_about(0.2, 1.0, 1.0));
        let inv = a.inverse().unwrap();
        let (x, y) = inv.apply(a.apply(2.5, 7.0).0, a.apply(2.5, 7.0).1);
        assert!((x - 2.5).abs() < 1e-12 && (y - 7.0).abs() < 1e-12);
    }

    #[test]
    fn singular_affine_is_rejected() {
        let s = Affine::scale_about(0.0, 1.0, 0.0, 0.0);
        assert!(matches!(s.inverse(), Err(Error::Geometry(_))));
        let m = BinaryMask::from_fn(3, 3, |_, _| true);
        assert!(warp_mask(&m, &s, 3, 3).is_err());
    }

    #[test]
    fn identity_warps_are_exact() {
        let m = BinaryMask::from_fn(7, 5, |x, y| (x * y) % 3 == 1);
        assert_eq!(warp_mask(&m, &Affine::IDENTITY, 7, 5).unwrap(), m);
        let img = RgbImage::from_fn(7, 5, |x, y| Rgb([x as u8 * 30, y as u8 * 40, 7]));
        assert_eq!(warp_rgb(&img, &Affine::IDENTITY, 7, 5).unwrap(), img);
    }

    #[test]
    fn hflip_two_pixel_row() {
        let img = RgbImage::from_fn(2, 1, |x, _| Rgb([x as u8 * 100 + 1, 2, 3]));
        let out = warp_rgb(&img, &Affine::hflip_about(0.5), 2, 1).unwrap();
        assert_eq!(out.get_pixel(0, 0), img.get_pixel(1, 0));
        assert_eq!(out.get_pixel(1, 0), img.get_pixel(0, 0));
    }

    #[test]
    fn translated_pixel_moves_right() {
        let mut m = BinaryMask::new(5, 5);
        m.set(2, 3, true);
        let out = warp_mask(&m, &Affine::translate(1.0, 0.0), 5, 5).unwrap();
        assert_eq!(out.area(), 1);
        assert!(out.get(3, 3));
    }

    #[test]
    fn content_off_canvas_is_clipped() {
        let m = BinaryMask::from_fn(4, 4, |x, _| x == 3);
        let out = warp_mask(&m, &Affine::translate(2.0, 0.0), 4, 4).unwrap();
        assert!(out.is_empty());
    }
}
