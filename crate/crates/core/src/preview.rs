//! Contact-sheet previews: frames left to right with tinted track masks.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::video::{PseudoVideo, TrackId};

pub const PALETTE: [[u8; 3]; 16] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [255, 250, 200],
    [128, 0, 0],
    [170, 255, 195],
];

/// Palette color for a track: a 64-bit mix of the ID, reduced modulo 16.
pub fn track_color(track_id: TrackId) -> [u8; 3] {
    let mut z = track_id.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    PALETTE[(z % PALETTE.len() as u64) as usize]
}

/// Renders the strip in memory. Mask pixels are blended 50/50 with their
/// track's color.
pub fn render_strip(video: &PseudoVideo) -> RgbImage {
    let (w, h) = video.dims();
    let mut strip = RgbImage::new(w * video.len() as u32, h);
    for (t, frame) in video.frames.iter().enumerate() {
        let x0 = t as u32 * w;
        for (x, y, p) in frame.enumerate_pixels() {
            strip.put_pixel(x0 + x, y, *p);
        }
        for (&id, track) in &video.tracks {
            let Some(mask) = &track.masks[t] else { continue };
            let color = track_color(id);
            for y in 0..h {
                for x in 0..w {
                    if mask.get(x, y) {
                        let p = strip.get_pixel_mut(x0 + x, y);
                        let mut c = [0u8; 3];
                        for ch in 0..3 {
                            c[ch] = ((p[ch] as u16 + color[ch] as u16) / 2) as u8;
                        }
                        *p = Rgb(c);
                    }
                }
            }
        }
    }
    strip
}

pub fn render_preview(video: &PseudoVideo, out_path: &Path) -> Result<()> {
    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    render_strip(video)
        .save_with_format(out_path, image::ImageFormat::Png)
        .map_err(|e| Error::Image { path: out_path.to_path_buf(), message: e.to_string() })
}
