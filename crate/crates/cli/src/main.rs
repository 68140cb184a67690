//! `gsedit`: render, edit, prep, eval and demo subcommands.
//!
//! Exit codes: 0 success, 2 unreadable input or bad arguments, 3 render or
//! edit failure, 4 evaluation without ground truth, 1 output failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsedit::evalkit::EvalConfig;
use gsedit::gaussians::PlyConvention;
use gsedit::layout::ClipParams;
use gsedit::pipeline::{
    run_edit, run_eval, run_prep, run_render, EditArgs, EvalArgs, PipelineError, PrepArgs, RenderArgs,
    DEFAULT_RANDOM_MASK_RATIO,
};

#[derive(Parser)]
#[command(name = "gsedit", version, about = "Gaussian-guided object editing for driving scenes")]
struct Cli {
    /// Reject unknown fields in scene and edit files instead of warning.
    #[arg(long, global = true)]
    strict: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct AssetOpts {
    /// How PLY attributes are interpreted: auto, linear or splat.
    #[arg(long, default_value = "auto")]
    ply_convention: PlyConvention,
}

#[derive(Subcommand)]
enum Command {
    /// Render the Gaussian image, depth-aware boxes and edge mask of one frame.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        asset: PathBuf,
        #[arg(long)]
        frame: u32,
        #[arg(long, default_value = "front")]
        camera: String,
        /// Object whose box receives the asset (default: first in the frame).
        #[arg(long)]
        object: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        assets: AssetOpts,
    },
    /// Apply edits and write one conditioning bundle per edit.
    Edit {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        edits: PathBuf,
        /// Directory of `<name>.ply` assets and optional `<name>.ref.png`.
        #[arg(long)]
        assets: PathBuf,
        /// Only the edit with this name.
        #[arg(long)]
        clip: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Recorded frames as `<dir>/<camera>/<frame:06>.png` (default: synthetic).
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Augment reference images.
        #[arg(long)]
        augment: bool,
        #[command(flatten)]
        asset_opts: AssetOpts,
    },
    /// Select training clips and write a manifest.
    Prep {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "front")]
        camera: String,
        #[arg(long, default_value_t = 10)]
        n: u32,
        #[arg(long, default_value_t = 40.0)]
        min_height: f64,
        #[arg(long, default_value_t = 2)]
        max_neighbors: usize,
        #[arg(long, default_value_t = 3.0)]
        neighbor_radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Share of clips that also get a random object-free mask.
        #[arg(long, default_value_t = DEFAULT_RANDOM_MASK_RATIO)]
        random_mask_ratio: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score detections of the edited instances with LET metrics.
    Eval {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        edits: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Longitudinal tolerance as a fraction of range.
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Score every object in the edited clips, not only the edited one.
        #[arg(long)]
        all_objects: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the synthetic demo scene and run prep, edit and eval on it.
    Demo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let strict = cli.strict;
    match cli.command {
        Command::Render {
            scene,
            asset,
            frame,
            camera,
            object,
            out,
            assets,
        } => {
            for p in run_render(&RenderArgs {
                scene,
                asset,
                frame,
                camera,
                object,
                out,
                strict,
                convention: assets.ply_convention,
            })? {
                println!("{}", p.display());
            }
        }
        Command::Edit {
            scene,
            edits,
            assets,
            clip,
            seed,
            out_dir,
            frames,
            augment,
            asset_opts,
        } => {
            let summary = run_edit(&EditArgs {
                scene,
                edits,
                assets,
                clip,
                seed,
                out_dir,
                frames,
                augment,
                strict,
                convention: asset_opts.ply_convention,
            })?;
            for p in summary.written {
                println!("{}", p.display());
            }
        }
        Command::Prep {
            scene,
            camera,
            n,
            min_height,
            max_neighbors,
            neighbor_radius,
            seed,
            random_mask_ratio,
            out,
        } => {
            if n == 0 {
                return Err(PipelineError::Usage("--n must be at least 1".into()));
            }
            let manifest = run_prep(&PrepArgs {
                scene,
                camera,
                params: ClipParams {
                    n,
                    min_height_px: min_height,
                    max_neighbors,
                    neighbor_radius_m: neighbor_radius,
                },
                seed,
                random_mask_ratio,
                out,
                strict,
            })?;
            println!(
                "{} clips, {} random masks",
                manifest["clips"].as_array().map_or(0, Vec::len),
                manifest["random_masks"].as_array().map_or(0, Vec::len)
            );
        }
        Command::Eval {
            scene,
            edits,
            detections,
            tol,
            iou,
            all_objects,
            out,
        } => {
            if !(tol >= 0.0 && (0.0..=1.0).contains(&iou)) {
                return Err(PipelineError::Usage("--tol must be ≥ 0 and --iou in [0, 1]".into()));
            }
            let (report, _) = run_eval(&EvalArgs {
                scene,
                edits,
                detections,
                config: EvalConfig {
                    lon_tolerance_frac: tol,
                    iou_threshold: iou,
                    restrict_to_edited: !all_objects,
                },
                out,
                strict,
            })?;
            println!(
                "LET-mAP {:.4}  LET-mAPH {:.4}  LET-mAPL {:.4}",
                report.let_map, report.let_maph, report.let_mapl
            );
        }
        Command::Demo { out, seed } => {
            let outcome = gsedit::demo::run_demo(&out, seed)?;
            println!(
                "{} clips selected, {} bundles; LET-mAP {:.4}  LET-mAPH {:.4}  LET-mAPL {:.4}",
                outcome.clips,
                outcome.bundles.len(),
                outcome.report.let_map,
                outcome.report.let_maph,
                outcome.report.let_mapl
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
