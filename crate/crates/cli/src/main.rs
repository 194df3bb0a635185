//! `pseudovis`: generate, check and inspect pseudo-video datasets.
//!
//! Exit codes: 0 on success, 1 on an operational failure (failed jobs,
//! dataset violations, failed invariants, I/O), 2 on a usage or config error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pseudovis_core::ingest::{load_dataset, LoadOptions};
use pseudovis_core::manifest::{load_video, read_manifest};
use pseudovis_core::mstm::check::{read_golden, run_checks, write_golden, CheckOptions, CheckStatus};
use pseudovis_core::mstm::{dump_weights, load_weights, Dims, MstmConfig, MstmWeights};
use pseudovis_core::par::default_workers;
use pseudovis_core::preview::render_preview;
use pseudovis_core::synth::run_generation;
use pseudovis_core::validate::validate_dataset;
use pseudovis_core::Error;

use config::ConfigArgs;

#[derive(Debug, Parser)]
#[command(
    name = "pseudovis",
    version,
    about = "Pseudo-video instance segmentation datasets from still images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a pseudo-video dataset from an annotated image set.
    Generate(ConfigArgs),
    /// Re-check an emitted dataset and print a JSON report.
    Validate {
        /// Dataset directory holding manifest.json.
        dataset: PathBuf,
    },
    /// Render one video of a dataset as a frame strip with mask overlays.
    Preview {
        /// Dataset directory holding manifest.json.
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        video_id: u64,
        /// PNG to write.
        #[arg(long, short, value_name = "FILE")]
        output: PathBuf,
    },
    /// Run the MSTM kernel invariant suite.
    MstmCheck(MstmCheckArgs),
    /// Print the resolved configuration (defaults, file, flags) as JSON.
    PrintConfig(ConfigArgs),
}

#[derive(Debug, clap::Args)]
struct MstmCheckArgs {
    /// Feature dims as T,H,W,D.
    #[arg(long, value_parser = parse_dims, default_value = "4,8,8,16")]
    dims: Dims,
    /// Attention window side [default: 4].
    #[arg(long)]
    window: Option<usize>,
    /// Shifted-window offset on odd layers [default: 2].
    #[arg(long)]
    shift: Option<usize>,
    /// Attention heads [default: 4].
    #[arg(long)]
    heads: Option<usize>,
    /// Attention layers [default: 2].
    #[arg(long)]
    layers: Option<usize>,
    /// Stacked ConvGRU layers [default: 2].
    #[arg(long)]
    gru_layers: Option<usize>,
    /// ConvGRU kernel side, odd [default: 3].
    #[arg(long)]
    gru_kernel: Option<usize>,
    /// Seed of the random input features [default: 2024].
    #[arg(long)]
    input_seed: Option<u64>,
    /// Seed of the random weights [default: 7].
    #[arg(long)]
    weight_seed: Option<u64>,
    /// Weight sidecar to use instead of seeded weights.
    #[arg(long, value_name = "FILE")]
    weights: Option<PathBuf>,
    /// Expected forward output (raw little-endian f64) instead of the built-in fixture.
    #[arg(long, value_name = "FILE")]
    golden: Option<PathBuf>,
    /// Write this run's forward output as a golden file and exit.
    #[arg(long, value_name = "FILE")]
    write_golden: Option<PathBuf>,
    /// Write this run's weights as a sidecar file.
    #[arg(long, value_name = "FILE")]
    dump_weights: Option<PathBuf>,
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [t, h, w, d] if t > 0 && h > 0 && w > 0 && d > 0 => Ok(Dims::new(t, h, w, d)),
        _ => Err(format!("expected four positive integers T,H,W,D, got `{s}`")),
    }
}

/// A command failure and the exit code it maps to.
enum Failure {
    Usage(String),
    Operational(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Operational(other.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PSEUDOVIS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(args) => generate(&args),
        Command::Validate { dataset } => validate(&dataset),
        Command::Preview { dataset, video_id, output } => preview(&dataset, video_id, &output),
        Command::MstmCheck(args) => mstm_check(&args),
        Command::PrintConfig(args) => print_config(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Operational(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn generate(args: &ConfigArgs) -> CmdResult {
    let cfg = args.resolve().map_err(Failure::Usage)?;
    let input = cfg.input.as_ref().ok_or_else(|| Failure::Usage("no input manifest (--input)".into()))?;
    let output =
        cfg.output.as_ref().ok_or_else(|| Failure::Usage("no output directory (--output)".into()))?;
    let workers = cfg.workers.unwrap_or_else(default_workers);
    let opts = LoadOptions { image_root: cfg.image_root.clone(), category_filter: cfg.categories.clone() };
    let dataset = load_dataset(input, &opts)?;
    log::info!(
        "loaded {} images ({} annotations dropped, {} empty, {} skipped)",
        dataset.images.len(),
        dataset.dropped_annotations,
        dataset.rejected_empty,
        dataset.skipped
    );
    let (_, summary) =
        run_generation(&dataset.images, &dataset.categories, &cfg.generation, output, workers)?;
    println!(
        "videos written: {}, tracks: {}, failures: {}",
        summary.videos_written,
        summary.tracks_written,
        summary.failures.len()
    );
    for f in &summary.failures {
        eprintln!("video {} failed: {}", f.video_id, f.message);
    }
    if summary.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Operational(format!("{} videos failed", summary.failures.len())))
    }
}

fn validate(dataset: &Path) -> CmdResult {
    let report = validate_dataset(dataset).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if report.is_ok() {
        Ok(())
    } else {
        Err(Failure::Operational(format!("{} violations", report.violations.len())))
    }
}

fn preview(dataset: &Path, video_id: u64, output: &Path) -> CmdResult {
    let manifest = read_manifest(dataset).map_err(|e| Failure::Usage(e.to_string()))?;
    let video = load_video(dataset, &manifest, video_id)?;
    render_preview(&video, output)?;
    println!("wrote {}", output.display());
    Ok(())
}

fn mstm_check(args: &MstmCheckArgs) -> CmdResult {
    let base = MstmConfig::default();
    let config = MstmConfig {
        window: args.window.unwrap_or(base.window),
        shift: args.shift.unwrap_or(base.shift),
        heads: args.heads.unwrap_or(base.heads),
        layers: args.layers.unwrap_or(base.layers),
        gru_layers: args.gru_layers.unwrap_or(base.gru_layers),
        gru_kernel: args.gru_kernel.unwrap_or(base.gru_kernel),
    };
    config.validate(args.dims.d)?;
    let mut opts = CheckOptions { dims: args.dims, config, ..CheckOptions::default() };
    if let Some(seed) = args.input_seed {
        opts.input_seed = seed;
    }
    if let Some(seed) = args.weight_seed {
        opts.weight_seed = seed;
    }
    if let Some(path) = &args.weights {
        opts.weights = Some(load_weights(path, &config, args.dims.d)?);
    }
    if let Some(path) = &args.dump_weights {
        let w = match &opts.weights {
            Some(w) => w.clone(),
            None => MstmWeights::random(&config, args.dims.d, opts.weight_seed),
        };
        dump_weights(&w, path)?;
        println!("wrote weights to {}", path.display());
    }
    if let Some(path) = &args.write_golden {
        write_golden(&opts, path)?;
        println!("wrote golden output to {}", path.display());
        return Ok(());
    }
    if let Some(path) = &args.golden {
        // an unreadable or malformed fixture is reported by the golden check itself
        opts.golden = Some(read_golden(path).unwrap_or_else(|e| {
            eprintln!("golden {}: {e}", path.display());
            Vec::new()
        }));
    }
    let report = run_checks(&opts)?;
    println!("mstm-check dims {} {:?}", report.dims, report.config);
    for r in &report.results {
        let tag = match r.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "SKIP",
        };
        println!("{tag} {}: {}", r.name, r.detail);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Operational("invariant check failed".into()))
    }
}

fn print_config(args: &ConfigArgs) -> CmdResult {
    let cfg = args.resolve().map_err(Failure::Usage)?;
    println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
    Ok(())
}
