use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(frames, height, width, channels)`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub d: usize,
}

impl Dims {
    pub const fn new(t: usize, h: usize, w: usize, d: usize) -> Self {
        Self { t, h, w, d }
    }

    pub fn len(&self) -> usize {
        self.t * self.h * self.w * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame_len(&self) -> usize {
        self.h * self.w * self.d
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{},{})", self.t, self.h, self.w, self.d)
    }
}

/// A `T × H × W × D` tensor, channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    dims: Dims,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(dims: Dims) -> Self {
        Self { dims, data: vec![0.0; dims.len()] }
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if dims.t == 0 || dims.h == 0 || dims.w == 0 || dims.d == 0 {
            return Err(Error::Shape(format!("all dims must be >= 1, got {dims}")));
        }
        if data.len() != dims.len() {
            return Err(Error::Shape(format!(
                "{} values for dims {dims} (expected {})",
                data.len(),
                dims.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("feature map holds non-finite values".into()));
        }
        Ok(Self { dims, data })
    }

    /// Uniform values in `[-1, 1)` from a ChaCha8 stream.
    pub fn random(dims: Dims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..dims.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, t: usize, y: usize, x: usize) -> usize {
        ((t * self.dims.h + y) * self.dims.w + x) * self.dims.d
    }

    /// Channel vector at one position.
    #[inline]
    pub fn at(&self, t: usize, y: usize, x: usize) -> &[f64] {
        let i = self.index(t, y, x);
        &self.data[i..i + self.dims.d]
    }

    #[inline]
    pub fn at_mut(&mut self, t: usize, y: usize, x: usize) -> &mut [f64] {
        let i = self.index(t, y, x);
        let d = self.dims.d;
        &mut self.data[i..i + d]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.dims.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.dims.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &FeatureMap) -> Result<FeatureMap> {
        self.expect_dims(other.dims)?;
        Ok(FeatureMap {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &FeatureMap) -> f64 {
        debug_assert_eq!(self.dims, other.dims);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub(crate) fn expect_dims(&self, dims: Dims) -> Result<()> {
        if self.dims != dims {
            return Err(Error::Shape(format!("dims {} vs {dims}", self.dims)));
        }
        Ok(())
    }
}

/// Splits the clip after its first `⌈T/2⌉` frames and puts the second part first.
pub fn temporal_swap(f: &FeatureMap) -> Result<FeatureMap> {
    let dims = f.dims();
    if dims.t < 2 {
        return Err(Error::Shape(format!("temporal swap needs T >= 2, got T = {}", dims.t)));
    }
    let split = dims.t.div_ceil(2) * dims.frame_len();
    let mut data = Vec::with_capacity(f.data.len());
    data.extend_from_slice(&f.data[split..]);
    data.extend_from_slice(&f.data[..split]);
    Ok(FeatureMap { dims, data })
}

/// Layer normalization over channels, no affine.
pub fn layer_norm(f: &FeatureMap) -> FeatureMap {
    const EPS: f64 = 1e-5;
    let d = f.dims.d;
    let mut out = f.clone();
    for v in out.data.chunks_exact_mut(d) {
        let mean = v.iter().sum::<f64>() / d as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + EPS).sqrt();
        for x in v.iter_mut() {
            *x = (*x - mean) * inv;
        }
    }
    out
}
