//! Convolutional GRU over frame sequences.
//!
//! ```text
//! u  = σ(conv([h, x]; W_u))
//! r  = σ(conv([h, x]; W_r))
//! c  = tanh(conv([r ⊙ h, x]; W_c))
//! h' = (1 − u) ⊙ h + u ⊙ c
//! ```
//!
//! Convolutions are zero-padded to keep the spatial size.

use super::tensor::{Dims, FeatureMap};
use super::weights::{ConvGate, GruWeights};
use crate::error::{Error, Result};

/// Gate activations of one cell step, kept for invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStep {
    pub state: FeatureMap,
    pub update: FeatureMap,
    pub candidate: FeatureMap,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Same-padded convolution of an `h × w × 2d` input to `h × w × d`.
fn conv_same(input: &[f64], h: usize, w: usize, d: usize, k: usize, gate: &ConvGate) -> Vec<f64> {
    let cin = 2 * d;
    let pad = (k / 2) as isize;
    let mut out = vec![0.0; h * w * d];
    for y in 0..h {
        for x in 0..w {
            let o = &mut out[(y * w + x) * d..(y * w + x + 1) * d];
            o.copy_from_slice(&gate.bias);
            for ky in 0..k {
                let sy = y as isize + ky as isize - pad;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let sx = x as isize + kx as isize - pad;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let src = &input[(sy as usize * w + sx as usize) * cin..][..cin];
                    let taps = &gate.kernel[(ky * k + kx) * cin * d..][..cin * d];
                    for (i, &v) in src.iter().enumerate() {
                        for (acc, &wt) in o.iter_mut().zip(&taps[i * d..(i + 1) * d]) {
                            *acc += v * wt;
                        }
                    }
                }
            }
        }
    }
    out
}

fn concat_channels(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * 2);
    for (pa, pb) in a.chunks_exact(d).zip(b.chunks_exact(d)) {
        out.extend_from_slice(pa);
        out.extend_from_slice(pb);
    }
    out
}

fn check_gate(gate: &ConvGate, d: usize, k: usize, name: &str) -> Result<()> {
    if gate.kernel.len() != k * k * 2 * d * d || gate.bias.len() != d {
        return Err(Error::Shape(format!("{name} gate does not match {d} channels, kernel {k}")));
    }
    Ok(())
}

/// One cell step on a single frame. `state` and `input` must be one-frame maps.
pub fn conv_gru_step(
    state: &FeatureMap,
    input: &FeatureMap,
    gru: &GruWeights,
    kernel: usize,
) -> Result<GruStep> {
    input.expect_dims(state.dims())?;
    let Dims { t, h, w, d } = state.dims();
    if t != 1 {
        return Err(Error::Shape(format!("ConvGRU cell works on one frame, got T = {t}")));
    }
    if kernel.is_multiple_of(2) {
        return Err(Error::Config(format!("ConvGRU kernel must be odd, got {kernel}")));
    }
    check_gate(&gru.update, d, kernel, "update")?;
    check_gate(&gru.reset, d, kernel, "reset")?;
    check_gate(&gru.candidate, d, kernel, "candidate")?;

    let hs = state.as_slice();
    let xs = input.as_slice();
    let hx = concat_channels(hs, xs, d);
    let update: Vec<f64> = conv_same(&hx, h, w, d, kernel, &gru.update).into_iter().map(sigmoid).collect();
    let reset: Vec<f64> = conv_same(&hx, h, w, d, kernel, &gru.reset).into_iter().map(sigmoid).collect();
    let gated: Vec<f64> = hs.iter().zip(&reset).map(|(h, r)| h * r).collect();
    let candidate: Vec<f64> = conv_same(&concat_channels(&gated, xs, d), h, w, d, kernel, &gru.candidate)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let next: Vec<f64> =
        hs.iter().zip(&update).zip(&candidate).map(|((&h, &u), &c)| (1.0 - u) * h + u * c).collect();
    let dims = state.dims();
    Ok(GruStep {
        state: FeatureMap::from_vec(dims, next)?,
        update: FeatureMap::from_vec(dims, update)?,
        candidate: FeatureMap::from_vec(dims, candidate)?,
    })
}

/// The new hidden state after one step.
pub fn conv_gru_cell(
    state: &FeatureMap,
    input: &FeatureMap,
    gru: &GruWeights,
    kernel: usize,
) -> Result<FeatureMap> {
    Ok(conv_gru_step(state, input, gru, kernel)?.state)
}

fn single_frame(f: &FeatureMap, t: usize) -> FeatureMap {
    let dims = f.dims();
    FeatureMap::from_vec(Dims { t: 1, ..dims }, f.frame(t).to_vec()).expect("frame of a valid map")
}

/// Scans a stack of ConvGRU layers over the frames of `seq`, each layer
/// starting from a zero state and feeding its per-frame outputs to the next.
pub fn conv_gru_scan(seq: &FeatureMap, layers: &[GruWeights], kernel: usize) -> Result<FeatureMap> {
    let dims = seq.dims();
    let mut current = seq.clone();
    for gru in layers {
        let mut state = FeatureMap::zeros(Dims { t: 1, ..dims });
        let mut out = FeatureMap::zeros(dims);
        for t in 0..dims.t {
            state = conv_gru_cell(&state, &single_frame(&current, t), gru, kernel)?;
            out.frame_mut(t).copy_from_slice(state.as_slice());
        }
        current = out;
    }
    Ok(current)
}
