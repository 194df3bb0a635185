//! Shifted-window multi-head attention and the self/cross attention layer.
//!
//! Windows tile each frame on a grid offset by `shift`: window boundaries
//! sit at `shift + k·window` along both axes, so edge windows may be
//! partial. Positions beyond the frame are padding and never attend or get
//! attended to. Attention is frame-wise: queries of frame `t` only see keys
//! of frame `t`.

use super::tensor::{layer_norm, Dims, FeatureMap};
use super::weights::{Projection, SwmaWeights};
use super::MstmConfig;
use crate::error::{Error, Result};

/// Receives every softmax row (attention distribution of one query in one head).
pub type RowProbe<'a> = &'a mut dyn FnMut(&[f64]);

pub(crate) fn project(f: &FeatureMap, w: &[f64]) -> FeatureMap {
    let d = f.dims().d;
    let mut out = FeatureMap::zeros(f.dims());
    for (src, dst) in f.as_slice().chunks_exact(d).zip(out.as_mut_slice().chunks_exact_mut(d)) {
        for (i, &x) in src.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &w[i * d..(i + 1) * d];
            for (o, &wij) in dst.iter_mut().zip(row) {
                *o += x * wij;
            }
        }
    }
    out
}

/// Groups the positions of an `h × w` frame into shifted windows.
pub(crate) fn window_groups(h: usize, w: usize, window: usize, shift: usize) -> Vec<Vec<(usize, usize)>> {
    let offset = (window - shift) % window;
    let rows = (h + offset).div_ceil(window);
    let cols = (w + offset).div_ceil(window);
    let mut groups = vec![Vec::new(); rows * cols];
    for y in 0..h {
        for x in 0..w {
            let (wy, wx) = ((y + offset) / window, (x + offset) / window);
            groups[wy * cols + wx].push((y, x));
        }
    }
    groups.retain(|g| !g.is_empty());
    groups
}

fn check_attention_args(
    q: &FeatureMap,
    kv: &FeatureMap,
    window: usize,
    shift: usize,
    heads: usize,
) -> Result<()> {
    kv.expect_dims(q.dims())?;
    let d = q.dims().d;
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(Error::Config(format!("channels {d} not divisible by {heads} heads")));
    }
    if window == 0 || shift >= window {
        return Err(Error::Config(format!("need 0 <= shift < window, got shift {shift}, window {window}")));
    }
    Ok(())
}

/// Multi-head scaled dot-product attention within shifted windows.
/// Queries come from `q`, keys and values from `kv`.
pub fn windowed_attention(
    q: &FeatureMap,
    kv: &FeatureMap,
    proj: &Projection,
    window: usize,
    shift: usize,
    heads: usize,
) -> Result<FeatureMap> {
    windowed_attention_probed(q, kv, proj, window, shift, heads, &mut |_| {})
}

pub fn windowed_attention_probed(
    q: &FeatureMap,
    kv: &FeatureMap,
    proj: &Projection,
    window: usize,
    shift: usize,
    heads: usize,
    probe: RowProbe<'_>,
) -> Result<FeatureMap> {
    check_attention_args(q, kv, window, shift, heads)?;
    let Dims { t, h, w, d } = q.dims();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let queries = project(q, &proj.query);
    let keys = project(kv, &proj.key);
    let values = project(kv, &proj.value);
    let mut mixed = FeatureMap::zeros(q.dims());
    let groups = window_groups(h, w, window, shift);
    let mut scores = Vec::new();
    for frame in 0..t {
        for group in &groups {
            for &(qy, qx) in group {
                let qv = queries.at(frame, qy, qx);
                let mut acc = vec![0.0; d];
                for head in 0..heads {
                    let hs = head * dh..(head + 1) * dh;
                    scores.clear();
                    for &(ky, kx) in group {
                        let kvec = &keys.at(frame, ky, kx)[hs.clone()];
                        let dot: f64 = qv[hs.clone()].iter().zip(kvec).map(|(a, b)| a * b).sum();
                        scores.push(dot * scale);
                    }
                    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for s in scores.iter_mut() {
                        *s = (*s - max).exp();
                        total += *s;
                    }
                    for s in scores.iter_mut() {
                        *s /= total;
                    }
                    probe(&scores);
                    for (&p, &(ky, kx)) in scores.iter().zip(group) {
                        let vvec = &values.at(frame, ky, kx)[hs.clone()];
                        for (a, v) in acc[hs.clone()].iter_mut().zip(vvec) {
                            *a += p * v;
                        }
                    }
                }
                mixed.at_mut(frame, qy, qx).copy_from_slice(&acc);
            }
        }
    }
    Ok(project(&mixed, &proj.output))
}

/// Window shift used by layer `layer`: unshifted on even layers, `cfg.shift` on odd ones.
pub fn layer_shift(cfg: &MstmConfig, layer: usize) -> usize {
    if layer.is_multiple_of(2) {
        0
    } else {
        cfg.shift
    }
}

/// One temporal attention layer, returning `SWMA(f, f') + z_prev`.
///
/// ```text
/// s  = LN(f  + SelfAttn(f))
/// s' = LN(f' + SelfAttn(f'))
/// c  = LN(s  + CrossAttn(query = s, key/value = s'))
/// out = c + z_prev
/// ```
///
/// Both self-attention calls share the layer's self-attention weights.
pub fn swma_layer(
    f: &FeatureMap,
    f_swapped: &FeatureMap,
    z_prev: &FeatureMap,
    weights: &SwmaWeights,
    cfg: &MstmConfig,
    layer: usize,
) -> Result<FeatureMap> {
    swma_layer_probed(f, f_swapped, z_prev, weights, cfg, layer, &mut |_| {})
}

pub(crate) fn swma_layer_probed(
    f: &FeatureMap,
    f_swapped: &FeatureMap,
    z_prev: &FeatureMap,
    weights: &SwmaWeights,
    cfg: &MstmConfig,
    layer: usize,
    probe: RowProbe<'_>,
) -> Result<FeatureMap> {
    f_swapped.expect_dims(f.dims())?;
    z_prev.expect_dims(f.dims())?;
    let shift = layer_shift(cfg, layer);
    let (win, heads) = (cfg.window, cfg.heads);
    let sa = windowed_attention_probed(f, f, &weights.self_attn, win, shift, heads, &mut *probe)?;
    let s = layer_norm(&f.add(&sa)?);
    let sa =
        windowed_attention_probed(f_swapped, f_swapped, &weights.self_attn, win, shift, heads, &mut *probe)?;
    let s_swapped = layer_norm(&f_swapped.add(&sa)?);
    let ca = windowed_attention_probed(&s, &s_swapped, &weights.cross_attn, win, shift, heads, probe)?;
    let c = layer_norm(&s.add(&ca)?);
    c.add(z_prev)
}
