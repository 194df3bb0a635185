//! Independent attention oracles used to cross-check the windowed kernel.
//!
//! [`dense_attention`] attends over every position of a frame.
//! [`rolled_window_attention`] reproduces shifted windows the way Swin does
//! it: pad to a window multiple, cyclically roll by `-shift`, cut regular
//! windows and mask pairs from different wrap-around regions or padding.
//! Neither shares code with the production path beyond the weight types.

use super::tensor::{layer_norm, temporal_swap, FeatureMap};
use super::weights::{MstmWeights, Projection};
use super::{conv_gru_scan, MstmConfig};
use crate::error::Result;

fn matvec(x: &[f64], w: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|j| (0..d).map(|i| x[i] * w[i * d + j]).sum()).collect()
}

/// Attention of `queries[i]` over `keys`/`values`, restricted to indices with
/// `allowed(i, j)`; returns the concatenated heads (before the output projection).
fn attend_rows(
    queries: &[Vec<f64>],
    keys: &[Vec<f64>],
    values: &[Vec<f64>],
    heads: usize,
    allowed: impl Fn(usize, usize) -> bool,
    probe: &mut dyn FnMut(&[f64]),
) -> Vec<Vec<f64>> {
    let d = queries.first().map_or(0, Vec::len);
    let dh = d / heads;
    let mut out = vec![vec![0.0; d]; queries.len()];
    for (i, q) in queries.iter().enumerate() {
        for head in 0..heads {
            let lo = head * dh;
            let cols: Vec<usize> = (0..keys.len()).filter(|&j| allowed(i, j)).collect();
            let logits: Vec<f64> = cols
                .iter()
                .map(|&j| (lo..lo + dh).map(|c| q[c] * keys[j][c]).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            let m = logits.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            let p: Vec<f64> = e.iter().map(|v| v / z).collect();
            probe(&p);
            for (pj, &j) in p.iter().zip(&cols) {
                for c in lo..lo + dh {
                    out[i][c] += pj * values[j][c];
                }
            }
        }
    }
    out
}

/// Full per-frame attention with no windows.
pub fn dense_attention(q: &FeatureMap, kv: &FeatureMap, proj: &Projection, heads: usize) -> FeatureMap {
    dense_attention_probed(q, kv, proj, heads, &mut |_| {})
}

pub fn dense_attention_probed(
    q: &FeatureMap,
    kv: &FeatureMap,
    proj: &Projection,
    heads: usize,
    probe: &mut dyn FnMut(&[f64]),
) -> FeatureMap {
    let dims = q.dims();
    let n = dims.h * dims.w;
    let mut out = Vec::with_capacity(dims.len());
    for t in 0..dims.t {
        let pos = |f: &FeatureMap, i: usize| f.at(t, i / dims.w, i % dims.w).to_vec();
        let qs: Vec<_> = (0..n).map(|i| matvec(&pos(q, i), &proj.query)).collect();
        let ks: Vec<_> = (0..n).map(|i| matvec(&pos(kv, i), &proj.key)).collect();
        let vs: Vec<_> = (0..n).map(|i| matvec(&pos(kv, i), &proj.value)).collect();
        for row in attend_rows(&qs, &ks, &vs, heads, |_, _| true, probe) {
            out.extend(matvec(&row, &proj.output));
        }
    }
    FeatureMap::from_vec(dims, out).expect("dense attention keeps dims")
}

/// Shifted-window attention via pad, cyclic roll and region masking.
pub fn rolled_window_attention(
    q: &FeatureMap,
    kv: &FeatureMap,
    proj: &Projection,
    window: usize,
    shift: usize,
    heads: usize,
) -> FeatureMap {
    let dims = q.dims();
    let hp = dims.h.div_ceil(window) * window;
    let wp = dims.w.div_ceil(window) * window;
    // region label along one axis of the rolled grid
    let region = |v: usize, len: usize| -> usize {
        if shift == 0 || v < len - window {
            0
        } else if v < len - shift {
            1
        } else {
            2
        }
    };
    let mut out = FeatureMap::zeros(dims);
    for t in 0..dims.t {
        for wy in 0..hp / window {
            for wx in 0..wp / window {
                // rolled coordinates of the window's tokens -> original coordinates
                let mut tokens = Vec::new();
                for ry in wy * window..(wy + 1) * window {
                    for rx in wx * window..(wx + 1) * window {
                        let (oy, ox) = ((ry + shift) % hp, (rx + shift) % wp);
                        let valid = oy < dims.h && ox < dims.w;
                        tokens.push((oy, ox, valid, region(ry, hp) * 3 + region(rx, wp)));
                    }
                }
                let zero = vec![0.0; dims.d];
                let fetch = |f: &FeatureMap, w: &[f64]| -> Vec<Vec<f64>> {
                    tokens
                        .iter()
                        .map(
                            |&(oy, ox, valid, _)| {
                                if valid {
                                    matvec(f.at(t, oy, ox), w)
                                } else {
                                    zero.clone()
                                }
                            },
                        )
                        .collect()
                };
                let (qs, ks, vs) = (fetch(q, &proj.query), fetch(kv, &proj.key), fetch(kv, &proj.value));
                let allowed = |i: usize, j: usize| tokens[j].2 && tokens[i].3 == tokens[j].3;
                let rows = attend_rows(&qs, &ks, &vs, heads, allowed, &mut |_| {});
                for (row, &(oy, ox, valid, _)) in rows.iter().zip(&tokens) {
                    if valid {
                        out.at_mut(t, oy, ox).copy_from_slice(&matvec(row, &proj.output));
                    }
                }
            }
        }
    }
    out
}

/// The full forward pass with the attention kernel swapped for
/// [`rolled_window_attention`].
pub fn forward_with_rolled_attention(
    f: &FeatureMap,
    cfg: &MstmConfig,
    weights: &MstmWeights,
) -> Result<FeatureMap> {
    let swapped = temporal_swap(f)?;
    let mut z = f.clone();
    for (l, layer) in weights.swma.iter().enumerate() {
        let shift = if l % 2 == 0 { 0 } else { cfg.shift };
        let attn = |a: &FeatureMap, b: &FeatureMap, p: &Projection| {
            rolled_window_attention(a, b, p, cfg.window, shift, cfg.heads)
        };
        let s = layer_norm(&f.add(&attn(f, f, &layer.self_attn))?);
        let s2 = layer_norm(&swapped.add(&attn(&swapped, &swapped, &layer.self_attn))?);
        let c = layer_norm(&s.add(&attn(&s, &s2, &layer.cross_attn))?);
        z = c.add(&z)?;
    }
    f.add(&conv_gru_scan(&z, &weights.gru, cfg.gru_kernel)?)
}
