use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::PhantomSource;

#[derive(Debug, Parser)]
#[command(name = "voxseg", version, about = "Volumetric segmentation with spectral coordinates, a two-stage patch network cascade and CRF refinement")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic phantom: image, labels, mask and label table.
    Phantom(PhantomArgs),
    /// Compute spectral coordinates of a mask.
    Spectral(SpectralArgs),
    /// Train the cascade networks (or a one-step network) from a JSON config.
    Train(TrainArgs),
    /// Segment an image with trained networks.
    Segment(SegmentArgs),
    /// Refine per-label probabilities with the dense CRF.
    Crf(CrfArgs),
    /// Per-label Dice of a segmentation against ground truth.
    Evaluate(EvaluateArgs),
    /// Print the parameter census of a model.
    InspectModel(InspectArgs),
    /// Run phantom, spectral, train, segment, crf and evaluate in one go.
    Pipeline(PipelineArgs),
}

const PHANTOM_KEYS: &str = "\
PHANTOM SPEC KEYS (--spec):
  name              string
  dims              [nx, ny, nz], default [64, 64, 64]
  structures        list; later entries overwrite earlier ones
    name            string
    shape           \"sphere\" | \"ellipsoid\" | \"shell\"
    radius          sphere radius in voxels
    radii           ellipsoid semi-axes [rx, ry, rz]
    inner, outer    shell radii
    center          [x, y, z] in voxels
    label           1..n, contiguous
    mean, std       Gaussian intensity
  background_mean   in-mask background intensity
  background_std
  seed              noise seed, default 0
  bias_amplitude    smooth multiplicative bias in [0, 1), default 0

OUTPUTS: image.vvol seg.vvol mask.vvol labels.json phantom.json";

#[derive(Debug, Args)]
#[command(after_help = PHANTOM_KEYS)]
pub struct PhantomArgs {
    /// Built-in scene by index (0, 1, 2) or name.
    #[arg(long, default_value = "0", value_parser = parse_source, conflicts_with = "spec")]
    pub suite: PhantomSource,
    /// JSON phantom spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Override the noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_source(s: &str) -> Result<PhantomSource, String> {
    Ok(s.parse().map(PhantomSource::Index).unwrap_or_else(|_| PhantomSource::Name(s.to_string())))
}

#[derive(Debug, Args)]
#[command(after_help = "OUTPUTS: coord_1.vvol coord_2.vvol coord_3.vvol spectral.json {lambda_1, lambda_2, lambda_3, residuals, matvecs, voxels}")]
pub struct SpectralArgs {
    /// Mask VVOL; nonzero voxels are inside.
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

const TRAIN_KEYS: &str = "\
CONFIG KEYS (--config):
  images            list of {image, seg, mask, coords?: [c1, c2, c3]}
  out_dir           models and report.jsonl are written here
  mode              \"cascade\" (default) | \"one_step\"
  train             {base_lr 0.01, power 0.9, max_iter, batch_size 64,
                     momentum 0.9, epochs 2, seed 0, neighborhood 7}
  fg_plan           {stage, quota 30000, doubled [], patch 23, jitter false,
                     cap_to_available false}
  structure_plan    same keys; quota 3000 (also the one-step plan)
  arch              \"canonical\" (default) | \"compact\" | {patch, kernels,
                     filters, fc, coord_width, class_count, task_count, dropout}
  coordinates       true (default) | false to train without coordinates
  threads           worker count, default 1

OUTPUTS: fg.dnmd structures.dnmd (or one_step.dnmd) report.jsonl";

#[derive(Debug, Args)]
#[command(after_help = TRAIN_KEYS)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
#[command(after_help = "OUTPUTS: the label VVOL and, with --probs-dir, prob_00.vvol, prob_01.vvol, ... (background first)")]
pub struct SegmentArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Foreground network of the cascade.
    #[arg(long, requires = "structure_model")]
    pub fg_model: Option<PathBuf>,
    /// Structure network of the cascade.
    #[arg(long, requires = "fg_model")]
    pub structure_model: Option<PathBuf>,
    /// Single network over background and all structures.
    #[arg(long, conflicts_with_all = ["fg_model", "structure_model"])]
    pub one_step_model: Option<PathBuf>,
    /// Three spectral channels from `spectral`; solved from the mask if absent.
    #[arg(long, num_args = 3, value_names = ["C1", "C2", "C3"])]
    pub coords: Option<Vec<PathBuf>>,
    /// Feed zero coordinates (for networks trained without them).
    #[arg(long, conflicts_with = "coords")]
    pub no_coords: bool,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub probs_dir: Option<PathBuf>,
}

const CRF_KEYS: &str = "\
PARAMS KEYS (--params), defaults in parentheses:
  v1            appearance kernel weight (3)
  v2            smoothness kernel weight (3)
  sigma_alpha   appearance spatial bandwidth, mm (3)
  sigma_beta    appearance intensity bandwidth (10)
  sigma_gamma   smoothness spatial bandwidth, mm (3)
  iterations    mean-field sweeps (5)";

#[derive(Debug, Args)]
#[command(after_help = CRF_KEYS)]
pub struct CrfArgs {
    /// Directory with prob_00.vvol, prob_01.vvol, ...
    #[arg(long)]
    pub probs_dir: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the final marginals, one VVOL per label.
    #[arg(long)]
    pub q_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(after_help = "OUTPUTS: JSON {labels: [{id, name, dice}], median, mean} on stdout or --json; CSV with --csv")]
pub struct EvaluateArgs {
    #[arg(long)]
    pub seg: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Label table; defaults to every nonzero label present.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// DNMD model; without it the canonical network is inspected.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Classes of the canonical network.
    #[arg(long, default_value_t = 25)]
    pub classes: usize,
    /// Tasks of the canonical network.
    #[arg(long, default_value_t = 1)]
    pub tasks: usize,
    #[arg(long)]
    pub json: bool,
}

const PIPELINE_KEYS: &str = "\
CONFIG KEYS (--config):
  out_dir          all artifacts are written here
  phantom          suite index, suite name or inline phantom spec (0)
  train_seed       noise seed of the training phantom (0)
  test_seed        noise seed of the evaluated phantom (1000)
  train            training keys as for `train`
  fg_plan          foreground sampling plan
  structure_plan   structure sampling plan
  arch             \"canonical\" | \"compact\" | explicit layer sizes
  crf              CRF parameters as for `crf --params`
  stride           inference stride (1)
  threads          worker count (1)

OUTPUTS: train/ test/ models/ probs/ labels.vvol labels_crf.vvol
         dice_pre_crf.csv dice_post_crf.csv summary.json";

#[derive(Debug, Args)]
#[command(after_help = PIPELINE_KEYS)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
}
