//! Forward reference of the multi-scale temporal module, in `f64`.
//!
//! For one feature scale `f` of shape `T × H × W × D`:
//!
//! 1. `f'` = `f` with its two temporal halves swapped.
//! 2. `z⁰ = f`, and for each layer `l`: `zˡ = SWMA_l(f, f') + zˡ⁻¹`.
//! 3. `zᴸ` runs through a stack of ConvGRU layers scanned over the frames.
//! 4. The output is `f` plus the ConvGRU output.

mod attention;
pub mod check;
mod gru;
pub mod reference;
mod tensor;
mod weights;

pub use attention::{layer_shift, swma_layer, windowed_attention, windowed_attention_probed, RowProbe};
pub use gru::{conv_gru_cell, conv_gru_scan, conv_gru_step, GruStep};
pub use tensor::{layer_norm, temporal_swap, Dims, FeatureMap};
pub use weights::{dump_weights, load_weights, ConvGate, GruWeights, MstmWeights, Projection, SwmaWeights};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MstmConfig {
    /// Side of the square attention window.
    pub window: usize,
    /// Offset of the shifted window grid, used on odd layers.
    pub shift: usize,
    pub heads: usize,
    /// Number of attention layers.
    pub layers: usize,
    /// Number of stacked ConvGRU layers.
    pub gru_layers: usize,
    /// Side of the ConvGRU convolution kernel (odd).
    pub gru_kernel: usize,
}

impl Default for MstmConfig {
    fn default() -> Self {
        Self { window: 4, shift: 2, heads: 4, layers: 2, gru_layers: 2, gru_kernel: 3 }
    }
}

impl MstmConfig {
    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.heads == 0 || !channels.is_multiple_of(self.heads) {
            return Err(Error::Config(format!("channels {channels} not divisible by {} heads", self.heads)));
        }
        if self.window == 0 || self.shift >= self.window {
            return Err(Error::Config(format!(
                "need 0 <= shift < window, got shift {}, window {}",
                self.shift, self.window
            )));
        }
        if self.layers == 0 || self.gru_layers == 0 {
            return Err(Error::Config("layers and gru_layers must be at least 1".into()));
        }
        if self.gru_kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("gru_kernel must be odd, got {}", self.gru_kernel)));
        }
        Ok(())
    }
}

pub fn mstm_forward(f: &FeatureMap, cfg: &MstmConfig, weights: &MstmWeights) -> Result<FeatureMap> {
    mstm_forward_probed(f, cfg, weights, &mut |_| {})
}

/// [`mstm_forward`] reporting every attention softmax row to `probe`.
pub fn mstm_forward_probed(
    f: &FeatureMap,
    cfg: &MstmConfig,
    weights: &MstmWeights,
    probe: RowProbe<'_>,
) -> Result<FeatureMap> {
    let d = f.dims().d;
    cfg.validate(d)?;
    weights.check(cfg, d)?;
    let swapped = temporal_swap(f)?;
    let mut z = f.clone();
    for (l, layer) in weights.swma.iter().enumerate() {
        z = attention::swma_layer_probed(f, &swapped, &z, layer, cfg, l, &mut *probe)?;
    }
    let temporal = conv_gru_scan(&z, &weights.gru, cfg.gru_kernel)?;
    f.add(&temporal)
}
