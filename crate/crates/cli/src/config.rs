//! Run configuration: a JSON file sharing the generator's schema, plus the
//! paths and worker count of a CLI run. Command-line flags override the file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use pseudovis_core::augment::AugOpSpec;
use pseudovis_core::synth::GenConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    /// COCO-style annotation manifest of the source images.
    pub input: Option<PathBuf>,
    /// Directory image `file_name`s are resolved against; defaults to the
    /// manifest's directory.
    pub image_root: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    pub workers: Option<usize>,
    /// JSON file holding an augmentation pool (array of op specs).
    pub pool_file: Option<PathBuf>,
    /// Source category IDs to keep; all categories when unset.
    pub categories: Option<BTreeSet<u64>>,
    #[serde(flatten)]
    pub generation: GenConfig,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// COCO-style annotation manifest of the source images.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Directory image file names are resolved against [default: the manifest's directory].
    #[arg(long, value_name = "DIR")]
    pub image_root: Option<PathBuf>,
    /// Dataset output directory.
    #[arg(long, short, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
    /// JSON file holding an augmentation pool, replacing the built-in one.
    #[arg(long, value_name = "FILE")]
    pub pool: Option<PathBuf>,
    /// Comma-separated source category IDs to keep.
    #[arg(long, value_delimiter = ',', value_name = "IDS")]
    pub categories: Option<Vec<u64>>,
    /// Frames per pseudo-video.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Number of pseudo-videos to generate.
    #[arg(long)]
    pub num_videos: Option<usize>,
    /// Master seed; each video derives its own seed from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum number of ops in a consistent augmentation blend.
    #[arg(long)]
    pub cost_k: Option<usize>,
    /// Probability of applying a consistent augmentation blend.
    #[arg(long)]
    pub cost_probability: Option<f64>,
    /// Probability of a morph & splice pass.
    #[arg(long)]
    pub vmosp_probability: Option<f64>,
    /// Instances spliced per morph & splice pass.
    #[arg(long)]
    pub vmosp_instances: Option<usize>,
    /// Rotation range (±degrees) of the naive clip and the rotate op.
    #[arg(long, allow_negative_numbers = true)]
    pub rotation_deg: Option<f64>,
    /// Largest relative scale change of a spliced instance.
    #[arg(long)]
    pub morph_scale_max: Option<f64>,
    /// Largest rotation (degrees) of a spliced instance.
    #[arg(long)]
    pub morph_rotation_deg: Option<f64>,
    /// Largest translation of a spliced instance, as a fraction of the canvas.
    #[arg(long)]
    pub morph_translate_frac: Option<f64>,
    /// Probability that a spliced instance is mirrored.
    #[arg(long)]
    pub morph_flip_probability: Option<f64>,
    /// Draw each frame's morph independently instead of interpolating.
    #[arg(long)]
    pub independent_frames: bool,
}

pub fn read_config_file(path: &Path) -> Result<CliConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let err = |e: serde_json::Error| format!("config {}: {e}", path.display());
    // `flatten` swallows unknown keys, so split the CLI keys off by hand and
    // let `GenConfig` (which denies unknown fields) judge the rest.
    let mut map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text).map_err(err)?;
    let mut cli = serde_json::Map::new();
    for key in ["input", "image_root", "output", "workers", "pool_file", "categories"] {
        if let Some(v) = map.remove(key) {
            cli.insert(key.to_string(), v);
        }
    }
    let generation: GenConfig = serde_json::from_value(map.into()).map_err(err)?;
    let mut cfg: CliConfig = serde_json::from_value(cli.into()).map_err(err)?;
    cfg.generation = generation;
    Ok(cfg)
}

fn read_pool(path: &Path) -> Result<Vec<AugOpSpec>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("pool {}: {e}", path.display()))
}

impl ConfigArgs {
    /// Loads the config file (if any), then applies flags on top.
    pub fn resolve(&self) -> Result<CliConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => read_config_file(path)?,
            None => CliConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    cfg.$($field).+ = v.into();
                }
            };
        }
        set!(input => input);
        set!(image_root => image_root);
        set!(output => output);
        set!(workers => workers);
        set!(pool => pool_file);
        set!(frames => generation.frames);
        set!(num_videos => generation.num_videos);
        set!(seed => generation.master_seed);
        set!(cost_k => generation.cost_k);
        set!(cost_probability => generation.cost_probability);
        set!(vmosp_probability => generation.vmosp_probability);
        set!(vmosp_instances => generation.vmosp_instances);
        set!(rotation_deg => generation.rotation_deg);
        set!(morph_scale_max => generation.morph.scale_max);
        set!(morph_rotation_deg => generation.morph.rotation_deg);
        set!(morph_translate_frac => generation.morph.translate_frac);
        set!(morph_flip_probability => generation.morph.flip_probability);
        if let Some(ids) = &self.categories {
            cfg.categories = Some(ids.iter().copied().collect());
        }
        if self.independent_frames {
            cfg.generation.morph.independent_frames = true;
        }
        if let Some(path) = &cfg.pool_file {
            cfg.generation.pool = Some(read_pool(path)?);
        }
        if cfg.workers == Some(0) {
            return Err("workers must be at least 1".into());
        }
        cfg.generation.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}
