use proptest::prelude::*;
use pseudovis_core::mask::{
    counts_from_string, counts_to_string, decode_mask, decode_rle, encode_mask, rasterize_polygons,
    BinaryMask, MaskEncoding, Rle, RleCounts,
};
use pseudovis_core::Error;

fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
    (1u32..=24, 1u32..=24).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<bool>(), (w * h) as usize)
            .prop_map(move |bits| BinaryMask::from_fn(w, h, |x, y| bits[(y * w + x) as usize]))
    })
}

/// Column-major run expansion written out directly.
fn expand_runs(counts: &[u32], w: u32, h: u32) -> Vec<Vec<bool>> {
    let mut grid = vec![vec![false; w as usize]; h as usize];
    let mut idx = 0u32;
    for (i, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            let (col, row) = (idx / h, idx % h);
            grid[row as usize][col as usize] = i % 2 == 1;
            idx += 1;
        }
    }
    grid
}

fn list(rle: &Rle) -> Vec<u32> {
    rle.counts.clone()
}

proptest! {
    #[test]
    fn encode_decode_round_trip(m in mask_strategy()) {
        let rle = encode_mask(&m);
        prop_assert_eq!(decode_rle(&rle).unwrap(), m);
    }

    #[test]
    fn runs_match_column_major_expansion(m in mask_strategy()) {
        let rle = encode_mask(&m);
        let counts = list(&rle);
        let grid = expand_runs(&counts, m.width(), m.height());
        for y in 0..m.height() {
            for x in 0..m.width() {
                prop_assert_eq!(grid[y as usize][x as usize], m.get(x, y));
            }
        }
        let fg: u64 = counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum();
        prop_assert_eq!(fg, m.area());
        prop_assert_eq!(counts.iter().map(|&c| c as u64).sum::<u64>(), (m.width() * m.height()) as u64);
    }

    #[test]
    fn compressed_counts_round_trip(counts in proptest::collection::vec(0u32..100_000, 0..40)) {
        prop_assert_eq!(counts_from_string(&counts_to_string(&counts)).unwrap(), counts);
    }
}

#[test]
fn small_worked_examples() {
    let full =
        decode_mask(&MaskEncoding::RunLength { size: [2, 2], counts: RleCounts::List(vec![0, 4]) }, 2, 2)
            .unwrap();
    assert_eq!(full.area(), 4);
    let empty =
        decode_mask(&MaskEncoding::RunLength { size: [2, 2], counts: RleCounts::List(vec![4]) }, 2, 2)
            .unwrap();
    assert!(empty.is_empty());
    let m = decode_rle(&Rle { size: [2, 2], counts: vec![1, 2, 1] }).unwrap();
    // (row 1, col 0) and (row 0, col 1)
    assert!(m.get(0, 1) && m.get(1, 0) && !m.get(0, 0) && !m.get(1, 1));

    assert_eq!(list(&encode_mask(&BinaryMask::new(3, 3))), vec![9]);
    assert_eq!(list(&encode_mask(&BinaryMask::from_fn(3, 3, |_, _| true))), vec![0, 9]);
}

#[test]
fn count_sum_mismatch_is_codec_error() {
    let bad = Rle { size: [2, 2], counts: vec![1, 2] };
    assert!(matches!(decode_rle(&bad), Err(Error::Codec(_))));
}

#[test]
fn degenerate_polygons_are_codec_errors() {
    for poly in [vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0, 1.0, 2.0], vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0]]
    {
        assert!(matches!(rasterize_polygons(&[poly], 4, 4), Err(Error::Codec(_))));
    }
}

/// Even-odd crossing test at a single point; `None` when the point lies on
/// (or within rounding of) an edge.
fn inside(poly: &[f64], px: f64, py: f64) -> Option<bool> {
    let n = poly.len() / 2;
    let mut c = false;
    for i in 0..n {
        let j = (i + n - 1) % n;
        let (xi, yi, xj, yj) = (poly[2 * i], poly[2 * i + 1], poly[2 * j], poly[2 * j + 1]);
        if (yi > py) != (yj > py) {
            let cross = (xj - xi) * (py - yi) / (yj - yi) + xi;
            if (cross - px).abs() < 1e-9 {
                return None;
            }
            if px < cross {
                c = !c;
            }
        }
    }
    Some(c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Scanline fill agrees with a per-pixel point-in-polygon test at pixel
    /// centres. Vertices sit on a quarter-pixel lattice offset from the
    /// centres; centres lying exactly on a slanted edge are skipped.
    #[test]
    fn polygon_fill_matches_point_in_polygon(
        verts in proptest::collection::vec((0u32..40, 0u32..40), 3..8)
    ) {
        let poly: Vec<f64> = verts.iter().flat_map(|&(x, y)| [x as f64 * 0.25 + 0.1, y as f64 * 0.25 + 0.1]).collect();
        match rasterize_polygons(std::slice::from_ref(&poly), 10, 10) {
            Ok(m) => {
                for y in 0..10 {
                    for x in 0..10 {
                        if let Some(expected) = inside(&poly, x as f64 + 0.5, y as f64 + 0.5) {
                            prop_assert_eq!(m.get(x, y), expected, "pixel ({}, {})", x, y);
                        }
                    }
                }
            }
            Err(Error::Codec(_)) => {
                // only zero-area input may be rejected
                let area: f64 = (0..verts.len()).map(|i| {
                    let j = (i + 1) % verts.len();
                    poly[2 * i] * poly[2 * j + 1] - poly[2 * j] * poly[2 * i + 1]
                }).sum();
                prop_assert!(area.abs() < 1e-9);
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}

#[test]
fn left_half_polygon_covers_eight_pixels() {
    let m = rasterize_polygons(&[vec![0.0, 0.0, 2.0, 0.0, 2.0, 4.0, 0.0, 4.0]], 4, 4).unwrap();
    assert_eq!(m, BinaryMask::from_fn(4, 4, |x, _| x < 2));
}

#[test]
fn compressed_record_decodes_like_list() {
    let m = BinaryMask::from_fn(7, 5, |x, y| (x + 2 * y) % 3 == 0);
    let counts = encode_mask(&m).counts;
    let enc =
        MaskEncoding::RunLength { size: [5, 7], counts: RleCounts::Compressed(counts_to_string(&counts)) };
    assert_eq!(decode_mask(&enc, 7, 5).unwrap(), m);
}
