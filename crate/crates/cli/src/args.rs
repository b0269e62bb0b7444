use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use proptrack::associate::AssocConfig;
use proptrack::boxprop::BoxPropConfig;
use proptrack::config::ConfigFile;
use proptrack::features::FeatureSource;
use proptrack::labelprop::PropConfig;

use crate::{input_error, CliResult};

#[derive(Debug, Parser)]
#[command(name = "proptrack", version, about = "Training-free multi-task object tracking")]
pub struct Cli {
    /// `key = value` configuration file, e.g. `boxprop.ridge = 1e-4`.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one configuration key; repeatable. Wins over the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-object box tracking; writes one `x,y,w,h` line per frame.
    Sot(SotArgs),
    /// Mask propagation from frame-1 labels; writes one indexed PNG per frame.
    Vos(VosArgs),
    /// Pose propagation from frame-1 keypoints; writes a pose table.
    Poseprop(PosepropArgs),
    /// Box association; writes MOTChallenge results.
    Mot(MotArgs),
    /// Mask association; writes MOTChallenge boxes and optional id masks.
    Mots(MotsArgs),
    /// Pose association; writes a pose table with track ids.
    Posetrack(PosetrackArgs),
    /// Renders a synthetic sequence with ground truth and detections.
    Synth(SynthArgs),
    /// Scores results against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Directory of numbered PPM or PNG frames.
    #[arg(long, value_name = "DIR")]
    pub frames: Option<PathBuf>,
    /// Directory of numbered UTFM feature maps; used instead of the
    /// built-in extractor.
    #[arg(long, value_name = "DIR")]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SotArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Frame-1 box `x,y,w,h`, top-left anchored, 1-based pixels.
    #[arg(long, allow_hyphen_values = true)]
    pub init: String,
    /// `dcf` or `xcorr`.
    #[arg(long)]
    pub head: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VosArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Indexed or grayscale PNG of frame-1 object ids.
    #[arg(long, value_name = "PNG")]
    pub init_mask: PathBuf,
    /// Output directory for per-frame label PNGs.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PosepropArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Pose table `frame,keypoint_index,x,y,visible`; frame-1 rows are used.
    #[arg(long, value_name = "FILE")]
    pub init_pose: PathBuf,
    /// Keypoints per pose; defaults to the largest index in the table + 1.
    #[arg(long)]
    pub keypoints: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AssocArgs {
    /// `rsm`, `cf`, `gpf` or `gf`.
    #[arg(long)]
    pub similarity: Option<String>,
    /// Drop the motion term and gate from the first stage.
    #[arg(long)]
    pub no_motion: bool,
    #[arg(long)]
    pub fps: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MotArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Detections `frame,-1,x,y,w,h,conf`.
    #[arg(long, value_name = "FILE")]
    pub dets: PathBuf,
    #[command(flatten)]
    pub assoc: AssocArgs,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MotsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Directory of numbered label PNGs; every non-zero id is a detection.
    #[arg(long, value_name = "DIR")]
    pub det_masks: PathBuf,
    #[command(flatten)]
    pub assoc: AssocArgs,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also write per-frame PNGs whose pixel values are track ids.
    #[arg(long, value_name = "DIR")]
    pub out_masks: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PosetrackArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Pose table `frame,id,keypoint_index,x,y,visible` with one id per
    /// detected pose.
    #[arg(long, value_name = "FILE")]
    pub dets: PathBuf,
    #[command(flatten)]
    pub assoc: AssocArgs,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "num-frames", default_value_t = 50)]
    pub num_frames: usize,
    #[arg(long, default_value_t = 320)]
    pub width: u32,
    #[arg(long, default_value_t = 240)]
    pub height: u32,
    /// Objects, each on its own horizontal lane.
    #[arg(long, default_value_t = 3)]
    pub objects: usize,
    /// Object size `WxH` in pixels.
    #[arg(long, default_value = "40x30")]
    pub size: String,
    /// Horizontal speed in pixels per frame; lanes alternate direction.
    #[arg(long, default_value_t = 2.0)]
    pub speed: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub miss_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub fp_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub crop_rate: f64,
    /// Hide object `K` (1-based) during frames `A..B` (1-based, inclusive);
    /// written `K:A-B`, repeatable.
    #[arg(long, value_name = "K:A-B")]
    pub occlude: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// MOTChallenge ground truth.
    #[arg(long, value_name = "FILE", requires = "pred")]
    pub gt: Option<PathBuf>,
    /// MOTChallenge results.
    #[arg(long, value_name = "FILE")]
    pub pred: Option<PathBuf>,
    /// Directory of ground-truth label PNGs.
    #[arg(long, value_name = "DIR", requires = "pred_masks")]
    pub gt_masks: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub pred_masks: Option<PathBuf>,
    /// Ground-truth pose table `frame,keypoint_index,x,y,visible`.
    #[arg(long, value_name = "FILE", requires = "pred_poses")]
    pub gt_poses: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub pred_poses: Option<PathBuf>,
    /// Minimum IoU for a match.
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// PCK radius relative to body size.
    #[arg(long, default_value_t = 0.2)]
    pub pck_delta: f64,
    /// Also write the `key=value` summary here.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Every config struct after applying the file, `--set` overrides and the
/// subcommand's own flags, in that order.
#[derive(Debug, Clone)]
pub struct Settings {
    pub boxprop: BoxPropConfig,
    pub labelprop: PropConfig,
    pub associate: AssocConfig,
    pub features: FeatureSource,
}

impl Settings {
    pub fn load(cli: &Cli) -> CliResult<Self> {
        let mut file = match &cli.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        for o in &cli.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| input_error(format!("--set expects KEY=VALUE, got `{o}`")))?;
            file.set(k.trim(), v.trim());
        }
        let assoc_flags = match &cli.command {
            Command::Sot(a) => {
                if let Some(h) = &a.head {
                    file.set("boxprop.head", h.as_str());
                }
                None
            }
            Command::Mot(a) => Some(&a.assoc),
            Command::Mots(a) => Some(&a.assoc),
            Command::Posetrack(a) => Some(&a.assoc),
            _ => None,
        };
        if let Some(a) = assoc_flags {
            if let Some(s) = &a.similarity {
                file.set("associate.similarity", s.as_str());
            }
            if a.no_motion {
                file.set("associate.use_motion", "false");
            }
            if let Some(fps) = a.fps {
                file.set("associate.fps", fps.to_string());
            }
        }
        file.check_sections()?;
        let mut s = Settings {
            boxprop: BoxPropConfig::default(),
            labelprop: PropConfig::default(),
            associate: AssocConfig::default(),
            features: FeatureSource::default(),
        };
        file.apply("boxprop", &mut s.boxprop)?;
        file.apply("labelprop", &mut s.labelprop)?;
        file.apply("associate", &mut s.associate)?;
        file.apply("features", &mut s.features)?;
        s.boxprop.validate()?;
        s.labelprop.validate()?;
        s.associate.validate()?;
        if s.features.stride == 0 {
            return Err(input_error("features.stride must be positive"));
        }
        Ok(s)
    }
}
