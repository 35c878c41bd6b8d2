use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::warn;
use stereotrap::calibration::load_calibration;
use stereotrap::config::{split_overrides, PipelineConfig};
use stereotrap::detections::DetectionsFile;
use stereotrap::io::{
    read_flow_pfm, read_frame, read_pfm, write_disparity_png16, write_flow_pfm, write_frame,
    write_pfm,
};
use stereotrap::pipeline::run_pipeline;
use stereotrap::report::{
    detection_probability_svg, read_distances_csv, read_json, write_distances_csv, write_json,
    SamplePlanFile,
};
use stereotrap::stages::{self, CtdsReport, ForegroundTracker};
use stereotrap::store::{list_frames, ObservationStore};
use stereotrap_core::flow::estimate_flow_with;
use stereotrap_core::quality::temporal_error;
use stereotrap_core::raster::DisparityMap;

/// Stereo camera-trap processing: rectification, matching, depth, flow,
/// temporal error, frame sampling, distances and detection-function fits.
///
/// Any configuration field can be overridden with a dotted flag, e.g.
/// `--matcher.max-disparity 128 --ctds.window 3:11 --sampler.mode adaptive`.
#[derive(Parser)]
#[command(name = "stereotrap", version)]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a side-by-side frame into left and right views.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
    },
    /// Rectify a stereo pair.
    Rectify {
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        out_left: PathBuf,
        #[arg(long)]
        out_right: PathBuf,
    },
    /// Compute a left disparity map from a rectified pair.
    Match {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// PFM output, NaN where invalid.
        #[arg(long)]
        output: PathBuf,
        /// Optional 16-bit PNG (disparity x 256, 0 = invalid).
        #[arg(long)]
        png16: Option<PathBuf>,
    },
    /// Convert disparity to metric depth.
    Depth {
        #[arg(long)]
        disparity: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Dense optical flow between two rectified left frames.
    Flow {
        #[arg(long)]
        prev: PathBuf,
        #[arg(long)]
        curr: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Temporal error of a disparity sequence.
    Quality {
        /// Disparity maps in frame order.
        #[arg(long, num_args = 2.., required = true)]
        disparity: Vec<PathBuf>,
        /// One flow field per consecutive pair.
        #[arg(long, num_args = 1.., required = true)]
        flow: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Select still frames from a directory of frames.
    Sample {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        video_id: String,
        #[arg(long)]
        fps: Option<f64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Distances of detections from depth maps named `<frame>.pfm`.
    Distances {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        depth_dir: PathBuf,
        #[arg(long)]
        observation_id: String,
        /// Restrict to the frames of a sample plan.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit the detection function to one or more distance CSVs.
    CtdsFit {
        #[arg(long, num_args = 1.., required = true)]
        distances: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Also render the plot.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Render the detection-probability plot of a fit.
    Report {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the full pipeline over an observation store.
    Run {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let (args, overrides) = split_overrides(std::env::args());
    let cli = Cli::parse_from(args);
    let base = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let mut config = base.with_overrides(&overrides)?;

    match cli.command {
        Command::Split { input, left, right } => {
            let (l, r) = stages::split_frame(&input)?;
            write_frame(&left, &l)?;
            write_frame(&right, &r)?;
        }
        Command::Rectify {
            calibration,
            left,
            right,
            out_left,
            out_right,
        } => {
            let map = stages::rectification(&load_calibration(&calibration)?)?;
            let (l, r) = stages::rectify_pair(&map, &read_frame(&left)?, &read_frame(&right)?)?;
            write_frame(&out_left, &l)?;
            write_frame(&out_right, &r)?;
        }
        Command::Match {
            left,
            right,
            output,
            png16,
        } => {
            let d = config
                .matcher
                .compute(&read_frame(&left)?, &read_frame(&right)?)?;
            write_pfm(&output, d.raster())?;
            if let Some(p) = png16 {
                write_disparity_png16(&p, &d)?;
            }
        }
        Command::Depth {
            disparity,
            calibration,
            output,
        } => {
            let map = stages::rectification(&load_calibration(&calibration)?)?;
            let d = DisparityMap::new(read_pfm(&disparity)?, config.matcher.max_disparity as f32);
            write_pfm(
                &output,
                &stages::depth(&d, &map, config.distances.min_disparity),
            )?;
        }
        Command::Flow { prev, curr, output } => {
            let f = estimate_flow_with(&read_frame(&curr)?, &read_frame(&prev)?, &config.flow)?;
            write_flow_pfm(&output, &f)?;
        }
        Command::Quality {
            disparity,
            flow,
            output,
        } => {
            let d = disparity
                .iter()
                .map(|p| read_pfm(p))
                .collect::<Result<Vec<_>, _>>()?;
            let f = flow
                .iter()
                .map(|p| read_flow_pfm(p))
                .collect::<Result<Vec<_>, _>>()?;
            write_json(
                &output,
                &temporal_error(&d, &f, config.quality.normalization)?,
            )?;
        }
        Command::Sample {
            frames,
            video_id,
            fps,
            output,
        } => {
            let files = list_frames(&frames)?;
            let mut tracker = ForegroundTracker::new(&config.sampler);
            if config.sampler.mode == stereotrap::config::SamplerMode::Adaptive {
                for f in &files {
                    tracker.push(&read_frame(f)?)?;
                }
            }
            let plan = stages::sample_plan(
                &config.sampler,
                files.len(),
                fps.unwrap_or(config.default_fps),
                &tracker.ratios,
            )?;
            write_json(&output, &SamplePlanFile::new(&video_id, &plan))?;
        }
        Command::Distances {
            detections,
            depth_dir,
            observation_id,
            plan,
            output,
        } => {
            let dets = DetectionsFile::load(&detections)?;
            let keep: Option<Vec<usize>> = plan
                .map(|p| read_json::<SamplePlanFile>(&p).map(|f| f.indices))
                .transpose()?;
            let mut records = Vec::new();
            for n in dets.frame_indices() {
                if keep.as_ref().is_some_and(|k| !k.contains(&n)) {
                    continue;
                }
                let path = depth_path(&depth_dir, n);
                let depth = read_pfm(&path).with_context(|| format!("depth for frame {n}"))?;
                let (r, skipped) = stages::frame_distances(&observation_id, n, &depth, &dets);
                for s in skipped {
                    warn!("frame {}: skipped detection: {}", s.frame_index, s.reason);
                }
                records.extend(r);
            }
            write_distances_csv(&output, &records)?;
        }
        Command::CtdsFit {
            distances,
            output,
            svg,
        } => {
            let mut records = Vec::new();
            for p in &distances {
                records.extend(read_distances_csv(p)?);
            }
            let report = stages::fit_survey(&records, &config.ctds)?;
            if let Some(e) = &report.error {
                warn!("detection function not fitted: {e}");
            }
            write_json(&output, &report)?;
            if let Some(p) = svg {
                stereotrap::io::write_atomic(&p, detection_probability_svg(&report).as_bytes())?;
            }
        }
        Command::Report { fit, output } => {
            let report: CtdsReport = read_json(&fit)?;
            stereotrap::io::write_atomic(&output, detection_probability_svg(&report).as_bytes())?;
        }
        Command::Run {
            store,
            output,
            workers,
        } => {
            if workers.is_some() {
                config.workers = workers;
            }
            let store = ObservationStore::open(&store)?;
            let report = run_pipeline(&config, &store, &output)?;
            if !report.is_success() {
                bail!("none of {} observations succeeded", report.observations);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn depth_path(dir: &Path, frame: usize) -> PathBuf {
    dir.join(format!("{frame:06}.pfm"))
}
