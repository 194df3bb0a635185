//! Invariant suite for the MSTM kernel, shared by the CLI and the tests.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::reference::{dense_attention, forward_with_rolled_attention};
use super::{
    conv_gru_step, mstm_forward, mstm_forward_probed, temporal_swap, windowed_attention, Dims, FeatureMap,
    MstmConfig, MstmWeights,
};
use crate::error::{Error, Result};

/// Output of the default check run, raw little-endian `f64`.
pub const BUILTIN_GOLDEN: &[u8] = include_bytes!("../../fixtures/mstm_golden.bin");

pub const DEFAULT_DIMS: Dims = Dims::new(4, 8, 8, 16);
pub const DEFAULT_INPUT_SEED: u64 = 2024;
pub const DEFAULT_WEIGHT_SEED: u64 = 7;

const SOFTMAX_TOL: f64 = 1e-9;
const ORACLE_TOL: f64 = 1e-9;
const GOLDEN_TOL: f64 = 1e-12;
const GRU_CELLS: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub dims: Dims,
    pub config: MstmConfig,
    pub input_seed: u64,
    pub weight_seed: u64,
    /// Loaded parameters used instead of the seeded ones.
    pub weights: Option<MstmWeights>,
    /// Expected forward output. `None` uses the built-in fixture when the
    /// run matches the default setup and skips the comparison otherwise.
    pub golden: Option<Vec<f64>>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            dims: DEFAULT_DIMS,
            config: MstmConfig::default(),
            input_seed: DEFAULT_INPUT_SEED,
            weight_seed: DEFAULT_WEIGHT_SEED,
            weights: None,
            golden: None,
        }
    }
}

impl CheckOptions {
    fn uses_default_setup(&self) -> bool {
        let d = Self::default();
        self.dims == d.dims
            && self.config == d.config
            && self.input_seed == d.input_seed
            && self.weight_seed == d.weight_seed
            && self.weights.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub dims: Dims,
    pub config: MstmConfig,
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.status != CheckStatus::Fail)
    }
}

fn result(name: &'static str, ok: bool, detail: String) -> CheckResult {
    CheckResult { name, status: if ok { CheckStatus::Pass } else { CheckStatus::Fail }, detail }
}

pub fn encode_golden(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_golden(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Format(format!("golden file length {} is not a multiple of 8", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect())
}

pub fn read_golden(path: &Path) -> Result<Vec<f64>> {
    decode_golden(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Input and weights of a check run.
pub fn check_inputs(opts: &CheckOptions) -> (FeatureMap, MstmWeights) {
    (
        FeatureMap::random(opts.dims, opts.input_seed),
        opts.weights
            .clone()
            .unwrap_or_else(|| MstmWeights::random(&opts.config, opts.dims.d, opts.weight_seed)),
    )
}

/// Computes the forward output of a check run and writes it as a golden file.
pub fn write_golden(opts: &CheckOptions, path: &Path) -> Result<()> {
    let (f, w) = check_inputs(opts);
    let out = mstm_forward(&f, &opts.config, &w)?;
    std::fs::write(path, encode_golden(out.as_slice())).map_err(|e| Error::io(path, e))
}

/// Runs every check. Errors only for invalid options.
pub fn run_checks(opts: &CheckOptions) -> Result<CheckReport> {
    let cfg = opts.config;
    cfg.validate(opts.dims.d)?;
    if opts.dims.t < 2 || opts.dims.h == 0 || opts.dims.w == 0 {
        return Err(Error::Shape(format!("check dims {} need T >= 2 and a non-empty frame", opts.dims)));
    }
    let (f, w) = check_inputs(opts);
    w.check(&cfg, opts.dims.d)?;
    let mut results = Vec::new();

    let mut rows = 0usize;
    let mut worst = 0.0f64;
    let mut negative = false;
    let out = mstm_forward_probed(&f, &cfg, &w, &mut |p| {
        rows += 1;
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        negative |= p.iter().any(|&v| v < 0.0 || !v.is_finite());
    })?;
    results.push(result(
        "softmax_rows",
        rows > 0 && worst <= SOFTMAX_TOL && !negative,
        format!("{rows} rows, max |sum - 1| = {worst:.3e}"),
    ));
    results.push(result("finite_output", out.is_finite(), "all outputs finite".into()));
    results.push(result(
        "shape_preserved",
        out.dims() == f.dims(),
        format!("input {} -> output {}", f.dims(), out.dims()),
    ));

    let again = mstm_forward(&f, &cfg, &w)?;
    results.push(result(
        "deterministic",
        again.as_slice() == out.as_slice(),
        "two runs bit-identical".into(),
    ));

    results.push(check_swap(&f)?);
    results.push(check_frame_locality(&f, &w, &cfg)?);
    results.push(check_dense_oracle(opts.input_seed)?);
    results.push(check_rolled_oracle(&f, &w, &cfg, &out)?);
    results.push(check_gru_convexity(cfg.gru_kernel, opts.weight_seed)?);
    results.push(check_golden(opts, &out));

    Ok(CheckReport { dims: opts.dims, config: cfg, results })
}

fn check_swap(f: &FeatureMap) -> Result<CheckResult> {
    let t = f.dims().t;
    let a = t.div_ceil(2);
    let once = temporal_swap(f)?;
    let mut ok = (0..t).all(|i| once.frame(i) == f.frame((i + a) % t));
    let detail = if t.is_multiple_of(2) {
        ok &= temporal_swap(&once)? == *f;
        format!("T = {t}: frame map t -> (t + {a}) mod T, swap twice is identity")
    } else {
        // a and T are coprime for odd T, so T swaps come back to the start
        let mut g = once.clone();
        for _ in 1..t {
            g = temporal_swap(&g)?;
        }
        ok &= g == *f;
        format!("T = {t}: frame map t -> (t + {a}) mod T, {t} swaps are identity")
    };
    Ok(result("temporal_swap", ok, detail))
}

fn check_frame_locality(f: &FeatureMap, w: &MstmWeights, cfg: &MstmConfig) -> Result<CheckResult> {
    let proj = &w.swma[0].self_attn;
    let base = windowed_attention(f, f, proj, cfg.window, cfg.shift, cfg.heads)?;
    let mut bumped = f.clone();
    let last = f.dims().t - 1;
    for v in bumped.frame_mut(last) {
        *v += 0.5;
    }
    let moved = windowed_attention(&bumped, &bumped, proj, cfg.window, cfg.shift, cfg.heads)?;
    let ok = (0..last).all(|t| base.frame(t) == moved.frame(t)) && base.frame(last) != moved.frame(last);
    Ok(result("frame_locality", ok, format!("perturbing frame {last} leaves frames 0..{last} unchanged")))
}

fn check_dense_oracle(seed: u64) -> Result<CheckResult> {
    let dims = Dims::new(2, 4, 4, 4);
    let cfg = MstmConfig { window: 4, shift: 0, heads: 2, layers: 1, gru_layers: 1, gru_kernel: 3 };
    let q = FeatureMap::random(dims, seed ^ 0x51);
    let kv = FeatureMap::random(dims, seed ^ 0x52);
    let w = MstmWeights::random(&cfg, dims.d, seed ^ 0x53);
    let proj = &w.swma[0].cross_attn;
    let got = windowed_attention(&q, &kv, proj, cfg.window, 0, cfg.heads)?;
    let diff = got.max_abs_diff(&dense_attention(&q, &kv, proj, cfg.heads));
    Ok(result("dense_oracle", diff <= ORACLE_TOL, format!("window covering {dims}: max diff {diff:.3e}")))
}

fn check_rolled_oracle(
    f: &FeatureMap,
    w: &MstmWeights,
    cfg: &MstmConfig,
    out: &FeatureMap,
) -> Result<CheckResult> {
    let reference = forward_with_rolled_attention(f, cfg, w)?;
    let diff = out.max_abs_diff(&reference);
    Ok(result(
        "rolled_window_oracle",
        diff <= ORACLE_TOL,
        format!("forward vs pad/roll/mask reference: max diff {diff:.3e}"),
    ))
}

fn check_gru_convexity(kernel: usize, seed: u64) -> Result<CheckResult> {
    let dims = Dims::new(1, 2, 2, 2);
    let cfg = MstmConfig { heads: 1, gru_layers: 1, gru_kernel: kernel, ..MstmConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e75);
    let mut failures = 0;
    for _ in 0..GRU_CELLS {
        let w = MstmWeights::random(&cfg, dims.d, rng.gen());
        let h = FeatureMap::random(dims, rng.gen());
        let x = FeatureMap::random(dims, rng.gen());
        let step = conv_gru_step(&h, &x, &w.gru[0], kernel)?;
        let bounded = h
            .as_slice()
            .iter()
            .zip(step.candidate.as_slice())
            .zip(step.state.as_slice())
            .all(|((&h, &c), &n)| n >= h.min(c) - 1e-12 && n <= h.max(c) + 1e-12);
        let gates = step.update.as_slice().iter().all(|&u| u > 0.0 && u < 1.0);
        if !(bounded && gates) {
            failures += 1;
        }
    }
    Ok(result(
        "gru_convex_update",
        failures == 0,
        format!("{GRU_CELLS} random cells, {failures} outside [min(h, c), max(h, c)]"),
    ))
}

fn check_golden(opts: &CheckOptions, out: &FeatureMap) -> CheckResult {
    let expected = match &opts.golden {
        Some(g) => g.clone(),
        None if opts.uses_default_setup() => match decode_golden(BUILTIN_GOLDEN) {
            Ok(g) => g,
            Err(e) => return result("golden", false, e.to_string()),
        },
        None => {
            return CheckResult {
                name: "golden",
                status: CheckStatus::Skip,
                detail: "no golden output for non-default setup".into(),
            }
        }
    };
    if expected.len() != out.as_slice().len() {
        return result(
            "golden",
            false,
            format!("golden has {} values, output has {}", expected.len(), out.as_slice().len()),
        );
    }
    let diff = expected.iter().zip(out.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    result("golden", diff <= GOLDEN_TOL, format!("max diff {diff:.3e}"))
}
