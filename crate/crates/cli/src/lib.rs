//! Command-line driver for the synthscan pipeline:
//! `scene-gen` → `scan` → `merge` → `blocks`, with `stats` and `compare` for
//! inspecting clouds.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run, CliError, ExitKind};

#[derive(Debug, Parser)]
#[command(
    name = "synthscan",
    version,
    about = "Synthetic labeled point clouds from OBJ scenes"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Place labeled OBJ assets on a ground plane and write scene.xml and survey.xml.
    SceneGen(SceneGenArgs),
    /// Simulate every leg of a survey and write one .xyz cloud per leg.
    Scan(ScanArgs),
    /// Concatenate .xyz clouds in the order given.
    Merge(MergeArgs),
    /// Cut a cloud into sliding-window training blocks.
    Blocks(BlocksArgs),
    /// Print point count, bounds, per-label counts and mean point spacing.
    Stats(StatsArgs),
    /// Nearest-neighbor distances from cloud A to cloud B.
    Compare(CompareArgs),
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{s} is not a positive number"))
    }
}

fn finite_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} is not finite"))
    }
}

#[derive(Debug, Args)]
pub struct SceneGenArgs {
    /// Directory of object .obj files; class names come from file names.
    #[arg(long)]
    pub objects_dir: PathBuf,
    /// Ground plane .obj file.
    #[arg(long)]
    pub ground_plane: PathBuf,
    /// Scene name, used as the scene id.
    #[arg(long)]
    pub name: String,
    /// Number of objects to place (assets are reused round-robin).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub num_objects: u32,
    /// Number of scan positions on the circle around the scene center.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub segments: u32,
    /// Radius of the scan circle (m).
    #[arg(long, value_parser = positive_f64)]
    pub radius: f64,
    /// Grid pitch between objects (m).
    #[arg(long, default_value_t = 10.0, value_parser = positive_f64)]
    pub spacing: f64,
    /// Scanner height above the ground (m).
    #[arg(long, default_value_t = 1.7, value_parser = finite_f64)]
    pub height: f64,
    /// Scanner preset: generic-lidar or tls-default.
    #[arg(long, default_value = "tls-default")]
    pub preset: String,
    /// Scatter objects at seeded random positions instead of a grid.
    #[arg(long)]
    pub scatter: bool,
    #[arg(long, env = "SYNTHSCAN_SEED", default_value_t = synthscan_core::DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory (created if absent).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub survey: PathBuf,
    /// Scene file; defaults to the one the survey references.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Output directory for leg_NNN.xyz files and scan.log.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the survey's seed.
    #[arg(long, env = "SYNTHSCAN_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Input .xyz files, merged in this order.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BlocksArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Window edge length in x and y (m).
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub window: f64,
    /// Window step in x and y (m); at most the window.
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub stride: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub min_points: u64,
    /// Resample each block to exactly this many points.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub sample_to: Option<u64>,
    #[arg(long, env = "SYNTHSCAN_SEED", default_value_t = synthscan_core::DEFAULT_SEED)]
    pub seed: u64,
    /// File name prefix; defaults to the input file stem.
    #[arg(long)]
    pub base: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Also write the per-label table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Also write the per-label table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
