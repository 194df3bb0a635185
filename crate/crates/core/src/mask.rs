//! Binary instance masks and the COCO-compatible mask codec.
//!
//! Masks are stored row-major in memory. Run-length records follow the COCO
//! convention: column-major pixel order, alternating runs starting with a
//! (possibly empty) background run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `width × height` grid of 0/1 values.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Self { width, height, data }
    }

    /// Builds a mask from row-major values; any non-zero value is foreground.
    pub fn from_row_major(width: u32, height: u32, values: &[u8]) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::Codec(format!(
                "expected {} values for a {width}x{height} mask, got {}",
                width as usize * height as usize,
                values.len()
            )));
        }
        Ok(Self { width, height, data: values.iter().map(|&v| (v != 0) as u8).collect() })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Row-major 0/1 values.
    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = value as u8;
    }

    pub fn area(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// True when both masks share at least one foreground pixel.
    pub fn intersects(&self, other: &BinaryMask) -> bool {
        debug_assert_eq!(self.dims(), other.dims());
        self.data.iter().zip(&other.data).any(|(&a, &b)| a & b != 0)
    }

    /// `self ∧ ¬other`, the occlusion update of a mask by a pasted mask.
    pub fn subtract(&self, other: &BinaryMask) -> BinaryMask {
        debug_assert_eq!(self.dims(), other.dims());
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a & (1 - b)).collect(),
        }
    }

    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        debug_assert_eq!(self.dims(), other.dims());
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a | b).collect(),
        }
    }

    /// Mean (x, y) of foreground pixel coordinates, or `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0u64);
        for (i, &v) in self.data.iter().enumerate() {
            if v != 0 {
                sx += (i % self.width as usize) as f64;
                sy += (i / self.width as usize) as f64;
                n += 1;
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the foreground.
    pub fn bbox(&self) -> Option<(u32, u32, u32, u32)> {
        let w = self.width as usize;
        let mut bb: Option<(u32, u32, u32, u32)> = None;
        for (i, &v) in self.data.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let (x, y) = ((i % w) as u32, (i / w) as u32);
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bb
    }
}

/// Uncompressed COCO run-length record. `size` is `[height, width]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    pub size: [u32; 2],
    pub counts: Vec<u32>,
}

impl Rle {
    pub fn height(&self) -> u32 {
        self.size[0]
    }

    pub fn width(&self) -> u32 {
        self.size[1]
    }

    /// Sum of the foreground (odd-indexed) runs.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }
}

/// Run-length counts as found in COCO JSON: either a plain list or the
/// compact LEB128-style string emitted by `pycocotools`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    List(Vec<u32>),
    Compressed(String),
}

/// A segmentation record as it appears in a COCO annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskEncoding {
    Polygons(Vec<Vec<f64>>),
    RunLength { size: [u32; 2], counts: RleCounts },
}

/// Decodes a segmentation record into a `width × height` mask.
pub fn decode_mask(encoding: &MaskEncoding, width: u32, height: u32) -> Result<BinaryMask> {
    match encoding {
        MaskEncoding::Polygons(polys) => rasterize_polygons(polys, width, height),
        MaskEncoding::RunLength { size, counts } => {
            if size[0] != height || size[1] != width {
                return Err(Error::Codec(format!(
                    "run-length size [{}, {}] does not match image {}x{} (h x w)",
                    size[0], size[1], height, width
                )));
            }
            let counts = match counts {
                RleCounts::List(c) => c.clone(),
                RleCounts::Compressed(s) => counts_from_string(s)?,
            };
            decode_rle(&Rle { size: *size, counts })
        }
    }
}

/// Expands column-major run-length counts. The counts must cover the mask exactly.
pub fn decode_rle(rle: &Rle) -> Result<BinaryMask> {
    let (h, w) = (rle.height() as usize, rle.width() as usize);
    let total: u64 = rle.counts.iter().map(|&c| c as u64).sum();
    if total != (h * w) as u64 {
        return Err(Error::Codec(format!(
            "run-length counts sum to {total}, expected {} for {w}x{h}",
            h * w
        )));
    }
    let mut mask = BinaryMask::new(w as u32, h as u32);
    let mut idx = 0usize;
    for (run, &c) in rle.counts.iter().enumerate() {
        let c = c as usize;
        if run % 2 == 1 {
            for k in idx..idx + c {
                // column-major index k -> (x = k / h, y = k % h)
                mask.data[(k % h) * w + k / h] = 1;
            }
        }
        idx += c;
    }
    Ok(mask)
}

pub fn encode_mask(mask: &BinaryMask) -> Rle {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut counts = Vec::new();
    let mut current = 0u8;
    let mut run = 0u32;
    for x in 0..w {
        for y in 0..h {
            let v = mask.data[y * w + x];
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    Rle { size: [mask.height, mask.width], counts }
}

/// Parses the `pycocotools` compact counts string.
pub fn counts_from_string(s: &str) -> Result<Vec<u32>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0usize;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0u32;
        loop {
            if p >= bytes.len() {
                return Err(Error::Codec("truncated compressed counts".into()));
            }
            let c = bytes[p] as i64 - 48;
            if !(0..64).contains(&c) || k > 12 {
                return Err(Error::Codec(format!("invalid compressed counts byte at {p}")));
            }
            x |= (c & 0x1f) << (5 * k);
            let more = c & 0x20 != 0;
            p += 1;
            k += 1;
            if !more {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2];
        }
        counts.push(x);
    }
    counts
        .into_iter()
        .map(|c| u32::try_from(c).map_err(|_| Error::Codec(format!("negative run length {c}"))))
        .collect()
}

/// Inverse of [`counts_from_string`].
pub fn counts_to_string(counts: &[u32]) -> String {
    let mut out = String::new();
    for (i, &c) in counts.iter().enumerate() {
        let mut x = c as i64;
        if i > 2 {
            x -= counts[i - 2] as i64;
        }
        loop {
            let mut c = x & 0x1f;
            x >>= 5;
            let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                c |= 0x20;
            }
            out.push((c + 48) as u8 as char);
            if !more {
                break;
            }
        }
    }
    out
}

/// Even-odd scanline fill of one or more polygons, sampling pixel centers.
///
/// Polygon coordinates are flat `[x0, y0, x1, y1, ...]` lists in pixel units,
/// where pixel `(c, r)` covers `[c, c+1) × [r, r+1)`. Multiple polygons are
/// unioned.
pub fn rasterize_polygons(polys: &[Vec<f64>], width: u32, height: u32) -> Result<BinaryMask> {
    if polys.is_empty() {
        return Err(Error::Codec("segmentation has no polygons".into()));
    }
    let mut mask = BinaryMask::new(width, height);
    let mut xs: Vec<f64> = Vec::new();
    for (pi, poly) in polys.iter().enumerate() {
        check_polygon(poly).map_err(|m| Error::Codec(format!("polygon {pi}: {m}")))?;
        let n = poly.len() / 2;
        for r in 0..height {
            let yc = r as f64 + 0.5;
            xs.clear();
            for i in 0..n {
                let (x0, y0) = (poly[2 * i], poly[2 * i + 1]);
                let j = (i + 1) % n;
                let (x1, y1) = (poly[2 * j], poly[2 * j + 1]);
                if (y0 <= yc) != (y1 <= yc) {
                    xs.push(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
                }
            }
            xs.sort_by(|a, b| a.total_cmp(b));
            for pair in xs.chunks_exact(2) {
                // columns whose center c + 0.5 lies in [pair[0], pair[1])
                let c0 = (pair[0] - 0.5).ceil().max(0.0);
                let c1 = (pair[1] - 0.5).ceil().min(width as f64);
                let (c0, c1) = (c0 as i64, c1 as i64);
                for c in c0..c1 {
                    mask.set(c as u32, r, true);
                }
            }
        }
    }
    Ok(mask)
}

fn check_polygon(poly: &[f64]) -> std::result::Result<(), String> {
    if !poly.len().is_multiple_of(2) {
        return Err(format!("odd coordinate count {}", poly.len()));
    }
    if poly.len() < 6 {
        return Err(format!("{} vertices, need at least 3", poly.len() / 2));
    }
    if poly.iter().any(|v| !v.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    let n = poly.len() / 2;
    let twice_area: f64 = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            poly[2 * i] * poly[2 * j + 1] - poly[2 * j] * poly[2 * i + 1]
        })
        .sum();
    if twice_area == 0.0 {
        return Err("zero area".into());
    }
    Ok(())
}
