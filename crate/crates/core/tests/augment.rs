mod common;

use std::collections::BTreeMap;

use image::{Rgb, RgbImage};
use pseudovis_core::affine::warp_mask;
use pseudovis_core::augment::{
    apply_cost_blend, apply_op, default_pool, sample_cost_blend, spatial_affine, validate_pool, AugKind,
    AugOp, AugOpSpec, CostBlend,
};
use pseudovis_core::mask::BinaryMask;
use pseudovis_core::video::{PseudoVideo, Track};
use pseudovis_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn duplicated(frame: &RgbImage, masks: &[BinaryMask], frames: usize) -> PseudoVideo {
    PseudoVideo {
        source_image_id: 1,
        frames: vec![frame.clone(); frames],
        tracks: masks
            .iter()
            .enumerate()
            .map(|(i, m)| (i as u64 + 1, Track { category_id: 1, masks: vec![Some(m.clone()); frames] }))
            .collect::<BTreeMap<_, _>>(),
    }
}

#[test]
fn blend_is_identical_across_duplicated_frames() {
    let pool = default_pool(15.0);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for i in 0..100 {
        let blend = sample_cost_blend(&mut rng, &pool, 3).unwrap();
        assert!(blend.ops.len() <= 3);
        let frame = common::random_rgb(&mut rng, 24, 18);
        let a = common::random_blob(&mut rng, 24, 18);
        let b = common::random_blob(&mut rng, 24, 18).subtract(&a);
        let masks: Vec<_> = [a, b].into_iter().filter(|m| !m.is_empty()).collect();
        let out = apply_cost_blend(&duplicated(&frame, &masks, 3), &blend).unwrap();
        assert_eq!(out.frames[0], out.frames[1], "blend {i}: {blend:?}");
        assert_eq!(out.frames[1], out.frames[2], "blend {i}: {blend:?}");
        for track in out.tracks.values() {
            assert_eq!(track.masks[0], track.masks[1]);
            assert_eq!(track.masks[1], track.masks[2]);
        }
        out.check_invariants().unwrap();
    }
}

#[test]
fn blend_draws_respect_pool_and_k() {
    let pool = default_pool(15.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut lengths = [0usize; 4];
    for _ in 0..2000 {
        let blend = sample_cost_blend(&mut rng, &pool, 3).unwrap();
        lengths[blend.ops.len()] += 1;
        let mut kinds: Vec<_> = blend.ops.iter().map(|o| o.kind).collect();
        kinds.sort_by_key(|k| *k as u8);
        kinds.dedup();
        assert_eq!(kinds.len(), blend.ops.len(), "ops drawn without replacement");
        for op in &blend.ops {
            let spec = pool.iter().find(|s| s.kind == op.kind).unwrap();
            assert!(op.magnitude >= spec.magnitude[0] && op.magnitude <= spec.magnitude[1]);
        }
    }
    // every length in 0..=k occurs
    assert!(lengths.iter().all(|&n| n > 300), "{lengths:?}");
    assert!(matches!(sample_cost_blend(&mut rng, &pool[..2], 3), Err(Error::Config(_))));
}

#[test]
fn empty_blend_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let frame = common::random_rgb(&mut rng, 6, 6);
    let v = duplicated(&frame, &[common::random_blob(&mut rng, 6, 6)], 2);
    assert_eq!(apply_cost_blend(&v, &CostBlend::default()).unwrap(), v);
}

#[test]
fn zero_magnitude_ops_are_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let frame = common::random_rgb(&mut rng, 9, 7);
    for kind in AugKind::ALL {
        if matches!(kind, AugKind::Equalize | AugKind::HFlip | AugKind::Posterize | AugKind::Solarize) {
            continue;
        }
        let out = apply_op(&frame, &AugOp { kind, magnitude: 0.0 });
        assert_eq!(out.frame, frame, "{kind:?}");
    }
}

#[test]
fn hflip_swaps_two_pixels() {
    let mut frame = RgbImage::new(2, 1);
    frame.put_pixel(0, 0, Rgb([10, 20, 30]));
    frame.put_pixel(1, 0, Rgb([200, 100, 50]));
    let out = apply_op(&frame, &AugOp { kind: AugKind::HFlip, magnitude: 0.0 });
    assert_eq!(out.frame.get_pixel(0, 0), &Rgb([200, 100, 50]));
    assert_eq!(out.frame.get_pixel(1, 0), &Rgb([10, 20, 30]));
    assert!(out.affine.is_some());
}

#[test]
fn brightness_shifts_and_clamps() {
    let frame = RgbImage::from_fn(2, 1, |x, _| if x == 0 { Rgb([10, 100, 250]) } else { Rgb([0, 0, 0]) });
    let out = apply_op(&frame, &AugOp { kind: AugKind::Brightness, magnitude: 20.0 });
    assert_eq!(out.frame.get_pixel(0, 0), &Rgb([30, 120, 255]));
    assert_eq!(out.frame.get_pixel(1, 0), &Rgb([20, 20, 20]));
    assert!(out.affine.is_none());
}

#[test]
fn spatial_warp_keeps_disjoint_masks_disjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for kind in AugKind::ALL.into_iter().filter(|k| k.is_spatial()) {
        for mag in [-0.3, 0.07, 0.15] {
            let op = AugOp { kind, magnitude: if kind == AugKind::Rotate { mag * 50.0 } else { mag } };
            let a = common::random_mask(&mut rng, 16, 12, 0.5);
            let b = BinaryMask::from_fn(16, 12, |x, y| !a.get(x, y));
            let affine = spatial_affine(&op, 16, 12).unwrap();
            let wa = warp_mask(&a, &affine, 16, 12).unwrap();
            let wb = warp_mask(&b, &affine, 16, 12).unwrap();
            assert!(!wa.intersects(&wb), "{op:?}");
        }
    }
}

#[test]
fn pool_validation() {
    assert!(validate_pool(&default_pool(15.0), 15.0).is_ok());
    assert!(validate_pool(&[], 15.0).is_err());
    let over = [AugOpSpec { kind: AugKind::Rotate, magnitude: [-20.0, 20.0] }];
    assert!(validate_pool(&over, 15.0).is_err());
    let backwards = [AugOpSpec { kind: AugKind::Brightness, magnitude: [5.0, -5.0] }];
    assert!(validate_pool(&backwards, 15.0).is_err());
    let collapse = [AugOpSpec { kind: AugKind::Scale, magnitude: [-1.0, 0.0] }];
    assert!(validate_pool(&collapse, 15.0).is_err());
    let bits = [AugOpSpec { kind: AugKind::Posterize, magnitude: [0.0, 8.0] }];
    assert!(validate_pool(&bits, 15.0).is_err());
}

#[test]
fn pool_serializes_with_snake_case_kinds() {
    let spec = AugOpSpec { kind: AugKind::TranslateX, magnitude: [-0.1, 0.1] };
    let json = serde_json::to_string(&spec).unwrap();
    assert!(json.contains("\"translate_x\""), "{json}");
    let back: AugOpSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(back, spec);
    let flip: AugOpSpec = serde_json::from_str(r#"{"kind": "hflip", "magnitude": [0, 0]}"#).unwrap();
    assert_eq!(flip.kind, AugKind::HFlip);
}
