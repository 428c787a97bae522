use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use thermogram::classifier::{classify_batch, read_records_file, write_records_file};
use thermogram::features::extract_features;
use thermogram::filter::directional_valley;
use thermogram::io::{load_image, save_image};
use thermogram::registration::{
    fit_rigid_from_keypoints, read_keypoints_file, register_sequence, warp_image,
    write_transforms_file, Interpolation, RigidTransform2D, SearchParams, SequenceMode,
    SimilarityMetric,
};
use thermogram::roi::{detect_thyroid_roi, draw_rect_border};
use thermogram::synth::{generate_phantom, PhantomSpec};
use thermogram::{
    ClassifyMethod, Error, FilterParams, PatientRecord, PipelineConfig, Rect, Result, RoiParams,
};

#[derive(Parser)]
#[command(
    name = "thermogram",
    version,
    about = "Thermogram analysis: valley filtering, ROI detection, rigid registration, segmentation features, and nearest-neighbor screening"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the directional valley filter and write the binary edge mask.
    Filter(FilterCmd),
    /// Locate the region of interest on one frame.
    Roi(RoiCmd),
    /// Register moving frames to a reference frame.
    Register(RegisterCmd),
    /// Extract segment features from frames over a fixed region.
    Features(FeaturesCmd),
    /// Classify feature records against a labeled gallery.
    Classify(ClassifyCmd),
    /// Render a synthetic phantom sequence from a spec file.
    Synth(SynthCmd),
    /// Run the full pipeline described by a config file.
    Pipeline(PipelineCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Rows,
    Cols,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolarityArg {
    Shadow,
    Light,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanArg {
    TopDown,
    BottomUp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    RoiFirst,
    RegisterFirst,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Mad,
    Chamfer,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Vote,
    Knn,
}

/// Valley-filter flags shared by the stages that run it.
#[derive(Args)]
struct FilterFlags {
    /// Neighbor distance in pixels.
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Intensity excess a neighbor pair must show.
    #[arg(long, default_value_t = 40, allow_negative_numbers = true)]
    t: i32,
    #[arg(long, value_enum, default_value_t = AxisArg::Cols)]
    axis: AxisArg,
    #[arg(long, value_enum, default_value_t = PolarityArg::Shadow)]
    polarity: PolarityArg,
}

impl FilterFlags {
    fn params(&self) -> FilterParams {
        FilterParams {
            d: self.d,
            t: self.t,
            axis: match self.axis {
                AxisArg::Rows => thermogram::Axis::Rows,
                AxisArg::Cols => thermogram::Axis::Cols,
                AxisArg::Both => thermogram::Axis::Both,
            },
            polarity: match self.polarity {
                PolarityArg::Shadow => thermogram::Polarity::Shadow,
                PolarityArg::Light => thermogram::Polarity::Light,
            },
        }
    }
}

/// Region-scan flags shared by the stages that locate the ROI.
#[derive(Args)]
struct RoiFlags {
    #[arg(long, default_value_t = 330)]
    roi_w: usize,
    #[arg(long, default_value_t = 310)]
    roi_h: usize,
    #[arg(long, default_value_t = 110)]
    residual_w: usize,
    #[arg(long, default_value_t = 110)]
    residual_h: usize,
    /// Residual-removal passes before the region scan.
    #[arg(long, default_value_t = 1)]
    passes: usize,
    #[arg(long, value_enum, default_value_t = ScanArg::BottomUp)]
    scan: ScanArg,
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

impl RoiFlags {
    fn params(&self) -> RoiParams {
        RoiParams {
            roi_w: self.roi_w,
            roi_h: self.roi_h,
            residual_w: self.residual_w,
            residual_h: self.residual_h,
            residual_passes: self.passes,
            scan: match self.scan {
                ScanArg::TopDown => thermogram::ScanOrder::TopDown,
                ScanArg::BottomUp => thermogram::ScanOrder::BottomUp,
            },
            stride: self.stride,
        }
    }
}

#[derive(Args)]
struct FilterCmd {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    filter: FilterFlags,
}

#[derive(Args)]
struct RoiCmd {
    #[arg(long = "in")]
    input: PathBuf,
    /// File receiving the rect as one line `x y w h`.
    #[arg(long)]
    out_rect: PathBuf,
    /// Optional copy of the input with the rect border drawn at 255.
    #[arg(long)]
    overlay: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterFlags,
    #[command(flatten)]
    roi: RoiFlags,
}

#[derive(Args)]
struct RegisterCmd {
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Moving frames, registered to the reference in the given order.
    #[arg(long = "mov", required = true, num_args = 1..)]
    moving: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Transforms file; defaults to OUT_DIR/transforms.txt.
    #[arg(long)]
    transforms: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::RoiFirst)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = MetricArg::Mad)]
    metric: MetricArg,
    /// Search half-range for the angle, in degrees.
    #[arg(long, default_value_t = 10.0)]
    theta_range_deg: f64,
    /// Coarse angle step, in degrees.
    #[arg(long, default_value_t = 0.5)]
    theta_step_deg: f64,
    /// Search half-range for each translation component, in pixels.
    #[arg(long, default_value_t = 15.0)]
    trans_range: f64,
    /// Coarse translation step, in pixels.
    #[arg(long, default_value_t = 1.0)]
    trans_step: f64,
    #[arg(long, default_value_t = 3)]
    refine_levels: u32,
    /// Fit the transform from a keypoint-pairs file instead of searching
    /// (requires exactly one moving frame).
    #[arg(long)]
    keypoints: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterFlags,
    #[command(flatten)]
    roi: RoiFlags,
}

#[derive(Args)]
struct FeaturesCmd {
    /// Input frames; each contributes one output row.
    #[arg(long = "in", required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Region as `"x y w h"`.
    #[arg(long, conflicts_with = "roi_file")]
    roi: Option<Rect>,
    /// File holding the region as one line `x y w h`.
    #[arg(long)]
    roi_file: Option<PathBuf>,
    #[arg(long, default_value_t = 209)]
    cutoff: u8,
    /// Record id for a single input; defaults to the file stem.
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyCmd {
    /// Records to classify.
    #[arg(long = "in")]
    input: PathBuf,
    /// Labeled gallery records.
    #[arg(long)]
    gallery: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Vote)]
    method: MethodArg,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = false)]
    normalize: bool,
    /// Report file; written to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthCmd {
    /// Phantom spec file.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PipelineCmd {
    /// Pipeline config file.
    #[arg(long)]
    config: PathBuf,
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::UnwritableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::UnwritableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn run_filter(cmd: &FilterCmd) -> Result<()> {
    let img = load_image(&cmd.input)?;
    let mask = directional_valley(&img, &cmd.filter.params())?;
    save_image(&mask.to_image(), &cmd.out)
}

fn run_roi(cmd: &RoiCmd) -> Result<()> {
    let img = load_image(&cmd.input)?;
    let rect = detect_thyroid_roi(&img, &cmd.filter.params(), &cmd.roi.params())?;
    write_text(&cmd.out_rect, &format!("{rect}\n"))?;
    if let Some(overlay) = &cmd.overlay {
        save_image(&draw_rect_border(&img, rect, 255)?, overlay)?;
    }
    println!("{rect}");
    Ok(())
}

fn run_register(cmd: &RegisterCmd) -> Result<()> {
    let mut frames = vec![load_image(&cmd.reference)?];
    for path in &cmd.moving {
        frames.push(load_image(path)?);
    }
    ensure_dir(&cmd.out_dir)?;
    let transforms_path = cmd
        .transforms
        .clone()
        .unwrap_or_else(|| cmd.out_dir.join("transforms.txt"));

    let registered: Vec<(RigidTransform2D, thermogram::ThermalImage)> =
        if let Some(keypoints) = &cmd.keypoints {
            if frames.len() != 2 {
                return Err(Error::InvalidParams {
                    detail: format!(
                        "--keypoints registers exactly one moving frame, got {}",
                        frames.len() - 1
                    ),
                });
            }
            let pairs = read_keypoints_file(keypoints)?;
            let t = fit_rigid_from_keypoints(&pairs)?;
            vec![
                (RigidTransform2D::identity(), frames[0].clone()),
                (t, warp_image(&frames[1], &t, Interpolation::Bilinear)),
            ]
        } else {
            let sp = SearchParams {
                theta_range: cmd.theta_range_deg.to_radians(),
                theta_step: cmd.theta_step_deg.to_radians(),
                trans_range: cmd.trans_range,
                trans_step: cmd.trans_step,
                refine_levels: cmd.refine_levels,
                metric: match cmd.metric {
                    MetricArg::Mad => SimilarityMetric::MeanAbsDiff,
                    MetricArg::Chamfer => SimilarityMetric::Chamfer {
                        filter: cmd.filter.params(),
                    },
                },
            };
            let mode = match cmd.mode {
                ModeArg::RoiFirst => SequenceMode::RoiFirst,
                ModeArg::RegisterFirst => SequenceMode::RegisterFirst,
            };
            register_sequence(&frames, mode, &sp, &cmd.filter.params(), &cmd.roi.params())?.frames
        };

    let transforms: Vec<(usize, RigidTransform2D)> =
        registered.iter().enumerate().map(|(k, (t, _))| (k, *t)).collect();
    write_transforms_file(&transforms_path, &transforms)?;
    for (k, (_, frame)) in registered.iter().enumerate() {
        save_image(frame, &cmd.out_dir.join(format!("frame_{k:03}.png")))?;
    }
    for (k, t) in &transforms {
        println!("{} {:.6} {:.6} {:.6}", k, t.theta, t.t_x, t.t_y);
    }
    Ok(())
}

fn run_features(cmd: &FeaturesCmd) -> Result<()> {
    let rect = match (&cmd.roi, &cmd.roi_file) {
        (Some(rect), None) => *rect,
        (None, Some(path)) => read_to_string(path)?.trim().parse()?,
        _ => {
            return Err(Error::InvalidParams {
                detail: "give the region with exactly one of --roi or --roi-file".into(),
            })
        }
    };
    if cmd.id.is_some() && cmd.input.len() > 1 {
        return Err(Error::InvalidParams {
            detail: "--id applies to a single input frame".into(),
        });
    }
    let mut records = Vec::with_capacity(cmd.input.len());
    for path in &cmd.input {
        let img = load_image(path)?;
        let features = extract_features(&img, rect, cmd.cutoff)?;
        let id = match &cmd.id {
            Some(id) => id.clone(),
            None => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "frame".into()),
        };
        records.push(PatientRecord {
            id,
            features,
            label: None,
        });
    }
    write_records_file(&cmd.out, &records)
}

fn run_classify(cmd: &ClassifyCmd) -> Result<()> {
    let records = read_records_file(&cmd.input)?;
    let gallery = read_records_file(&cmd.gallery)?;
    let method = match cmd.method {
        MethodArg::Vote => ClassifyMethod::Vote,
        MethodArg::Knn => ClassifyMethod::Knn {
            k: cmd.k,
            normalize: cmd.normalize,
        },
    };
    let report = classify_batch(&records, &gallery, method)?;
    let text = report.render();
    match &cmd.report {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_synth(cmd: &SynthCmd) -> Result<()> {
    let text = read_to_string(&cmd.spec)?;
    let spec: PhantomSpec = toml::from_str(&text).map_err(|e| Error::Parse {
        what: "phantom spec".into(),
        detail: e.to_string(),
    })?;
    let frames = generate_phantom(&spec)?;
    ensure_dir(&cmd.out_dir)?;
    for (k, frame) in frames.iter().enumerate() {
        save_image(frame, &cmd.out_dir.join(format!("frame_{k:03}.png")))?;
    }
    println!("{} frames", frames.len());
    Ok(())
}

fn run_pipeline_cmd(cmd: &PipelineCmd) -> Result<()> {
    let config = PipelineConfig::load(&cmd.config)?;
    let outcome = thermogram::run_pipeline(&config)?;
    println!("roi: {}", outcome.roi);
    println!("overall: {}", outcome.overall);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Filter(cmd) => run_filter(cmd),
        Command::Roi(cmd) => run_roi(cmd),
        Command::Register(cmd) => run_register(cmd),
        Command::Features(cmd) => run_features(cmd),
        Command::Classify(cmd) => run_classify(cmd),
        Command::Synth(cmd) => run_synth(cmd),
        Command::Pipeline(cmd) => run_pipeline_cmd(cmd),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap renders help to stdout and errors to stderr itself.
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1u8 } else { 2u8 })
        }
    }
}
