//! Kernel parameters and their binary sidecar.
//!
//! Sidecar layout: an 8-byte little-endian header length `n`, `n` bytes of
//! UTF-8 JSON header, then every tensor as little-endian `f64` values in
//! header order. The header lists `name` and `shape` for each tensor.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MstmConfig;
use crate::error::{Error, Result};

const FORMAT: &str = "pseudovis-mstm-weights";
const VERSION: u32 = 1;

/// Query/key/value/output projections, each `D × D` row-major
/// (`out[j] = Σ_i in[i] · W[i·D + j]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub query: Vec<f64>,
    pub key: Vec<f64>,
    pub value: Vec<f64>,
    pub output: Vec<f64>,
}

impl Projection {
    pub fn identity(d: usize) -> Self {
        let eye: Vec<f64> = (0..d * d).map(|i| if i / d == i % d { 1.0 } else { 0.0 }).collect();
        Self { query: eye.clone(), key: eye.clone(), value: eye.clone(), output: eye }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            query: vec![0.0; d * d],
            key: vec![0.0; d * d],
            value: vec![0.0; d * d],
            output: vec![0.0; d * d],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwmaWeights {
    pub self_attn: Projection,
    pub cross_attn: Projection,
}

/// A same-padded convolution from `2D` input channels to `D` outputs.
/// `kernel` is laid out `[ky][kx][in][out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGate {
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    pub update: ConvGate,
    pub reset: ConvGate,
    pub candidate: ConvGate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MstmWeights {
    pub channels: usize,
    pub gru_kernel: usize,
    pub swma: Vec<SwmaWeights>,
    pub gru: Vec<GruWeights>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    channels: usize,
    layers: usize,
    gru_layers: usize,
    gru_kernel: usize,
    tensors: Vec<TensorHeader>,
}

impl MstmWeights {
    /// All-zero parameters.
    pub fn zeros(cfg: &MstmConfig, channels: usize) -> Self {
        let d = channels;
        let gate = || ConvGate {
            kernel: vec![0.0; cfg.gru_kernel * cfg.gru_kernel * 2 * d * d],
            bias: vec![0.0; d],
        };
        Self {
            channels: d,
            gru_kernel: cfg.gru_kernel,
            swma: (0..cfg.layers)
                .map(|_| SwmaWeights { self_attn: Projection::zeros(d), cross_attn: Projection::zeros(d) })
                .collect(),
            gru: (0..cfg.gru_layers)
                .map(|_| GruWeights { update: gate(), reset: gate(), candidate: gate() })
                .collect(),
        }
    }

    /// Uniform `±1/√fan_in` initialization from a ChaCha8 stream, filled in
    /// sidecar tensor order.
    pub fn random(cfg: &MstmConfig, channels: usize, seed: u64) -> Self {
        let mut w = Self::zeros(cfg, channels);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let proj_bound = 1.0 / (channels as f64).sqrt();
        let conv_bound = 1.0 / ((cfg.gru_kernel * cfg.gru_kernel * 2 * channels) as f64).sqrt();
        for (name, _, values) in w.tensors_mut() {
            let bound = if name.starts_with("swma") { proj_bound } else { conv_bound };
            for v in values.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        w
    }

    fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let d = self.channels;
        let k = self.gru_kernel;
        let mut specs = Vec::new();
        for l in 0..self.swma.len() {
            for block in ["self", "cross"] {
                for p in ["query", "key", "value", "output"] {
                    specs.push((format!("swma.{l}.{block}.{p}"), vec![d, d]));
                }
            }
        }
        for n in 0..self.gru.len() {
            for gate in ["update", "reset", "candidate"] {
                specs.push((format!("gru.{n}.{gate}.kernel"), vec![k, k, 2 * d, d]));
                specs.push((format!("gru.{n}.{gate}.bias"), vec![d]));
            }
        }
        specs
    }

    fn buffers(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for l in &self.swma {
            for p in [&l.self_attn, &l.cross_attn] {
                out.extend([&p.query, &p.key, &p.value, &p.output]);
            }
        }
        for g in &self.gru {
            for gate in [&g.update, &g.reset, &g.candidate] {
                out.extend([&gate.kernel, &gate.bias]);
            }
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for l in &mut self.swma {
            let SwmaWeights { self_attn, cross_attn } = l;
            for p in [self_attn, cross_attn] {
                let Projection { query, key, value, output } = p;
                out.extend([query, key, value, output]);
            }
        }
        for g in &mut self.gru {
            let GruWeights { update, reset, candidate } = g;
            for gate in [update, reset, candidate] {
                let ConvGate { kernel, bias } = gate;
                out.extend([kernel, bias]);
            }
        }
        out
    }

    /// `(name, shape, values)` for every tensor, in sidecar order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &Vec<f64>)> {
        self.tensor_specs().into_iter().zip(self.buffers()).map(|((n, s), b)| (n, s, b)).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, Vec<usize>, &mut Vec<f64>)> {
        let specs = self.tensor_specs();
        specs.into_iter().zip(self.buffers_mut()).map(|((n, s), b)| (n, s, b)).collect()
    }

    /// Checks tensor counts and sizes against a config.
    pub fn check(&self, cfg: &MstmConfig, channels: usize) -> Result<()> {
        if self.channels != channels {
            return Err(Error::Format(format!(
                "channels: weights have {}, features have {channels}",
                self.channels
            )));
        }
        if self.swma.len() != cfg.layers {
            return Err(Error::Format(format!(
                "layers: weights have {}, config has {}",
                self.swma.len(),
                cfg.layers
            )));
        }
        if self.gru.len() != cfg.gru_layers {
            return Err(Error::Format(format!(
                "gru_layers: weights have {}, config has {}",
                self.gru.len(),
                cfg.gru_layers
            )));
        }
        if self.gru_kernel != cfg.gru_kernel {
            return Err(Error::Format(format!(
                "gru_kernel: weights have {}, config has {}",
                self.gru_kernel, cfg.gru_kernel
            )));
        }
        for (name, shape, values) in self.tensors() {
            if values.len() != shape.iter().product::<usize>() {
                return Err(Error::Format(format!("{name}: {} values for shape {shape:?}", values.len())));
            }
        }
        Ok(())
    }

    fn header(&self) -> Header {
        Header {
            format: FORMAT.into(),
            version: VERSION,
            channels: self.channels,
            layers: self.swma.len(),
            gru_layers: self.gru.len(),
            gru_kernel: self.gru_kernel,
            tensors: self
                .tensor_specs()
                .into_iter()
                .map(|(name, shape)| TensorHeader { name, shape })
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let payload: usize = self.buffers().iter().map(|b| b.len()).sum();
        let mut out = Vec::with_capacity(8 + header.len() + 8 * payload);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for buf in self.buffers() {
            for v in buf {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a sidecar and validates it against `cfg` and `channels`.
    pub fn from_bytes(bytes: &[u8], cfg: &MstmConfig, channels: usize) -> Result<Self> {
        let len_bytes: [u8; 8] = bytes
            .get(..8)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| Error::Format("truncated: missing header length".into()))?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let header_bytes = bytes
            .get(8..8usize.saturating_add(header_len))
            .ok_or_else(|| Error::Format("truncated: header shorter than declared".into()))?;
        let header: Header =
            serde_json::from_slice(header_bytes).map_err(|e| Error::Format(format!("header: {e}")))?;
        if header.format != FORMAT {
            return Err(Error::Format(format!("format: expected {FORMAT}, got {}", header.format)));
        }
        if header.version != VERSION {
            return Err(Error::Format(format!("version: expected {VERSION}, got {}", header.version)));
        }
        for (field, found, expected) in [
            ("channels", header.channels, channels),
            ("layers", header.layers, cfg.layers),
            ("gru_layers", header.gru_layers, cfg.gru_layers),
            ("gru_kernel", header.gru_kernel, cfg.gru_kernel),
        ] {
            if found != expected {
                return Err(Error::Format(format!("{field}: header has {found}, expected {expected}")));
            }
        }
        let mut weights = Self::zeros(cfg, channels);
        let expected = weights.header().tensors;
        if header.tensors.len() != expected.len() {
            return Err(Error::Format(format!(
                "tensors: header lists {}, expected {}",
                header.tensors.len(),
                expected.len()
            )));
        }
        for (got, want) in header.tensors.iter().zip(&expected) {
            if got != want {
                return Err(Error::Format(format!(
                    "tensor {}: header has {} {:?}, expected {} {:?}",
                    want.name, got.name, got.shape, want.name, want.shape
                )));
            }
        }
        let mut payload = &bytes[8 + header_len..];
        for (name, _, buf) in weights.tensors_mut() {
            let need = buf.len() * 8;
            if payload.len() < need {
                return Err(Error::Format(format!("truncated payload in tensor {name}")));
            }
            for (v, chunk) in buf.iter_mut().zip(payload[..need].chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().unwrap());
            }
            payload = &payload[need..];
        }
        if !payload.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after payload", payload.len())));
        }
        Ok(weights)
    }
}

pub fn dump_weights(weights: &MstmWeights, path: &Path) -> Result<()> {
    std::fs::write(path, weights.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: &Path, cfg: &MstmConfig, channels: usize) -> Result<MstmWeights> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    MstmWeights::from_bytes(&bytes, cfg, channels)
}
