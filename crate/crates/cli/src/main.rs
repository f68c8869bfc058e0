use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lidar_fiducial::export;
use lidar_fiducial::json;
use lidar_fiducial::pipeline::{self, PipelineConfig, Settings, Timings};
use lidar_fiducial::pointcloud::{load_cloud, save_cloud, CloudFormat, LoadReport, PointCloud};
use lidar_fiducial::synth::{generate_scan, LidarModel, Scene};
use lidar_fiducial::Error;

/// Fiducial marker detection and pose estimation on LiDAR intensity images.
#[derive(Debug, Parser)]
#[command(name = "lidar-fiducial", version)]
struct Cli {
    /// JSON config file; command-line flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Project a cloud to intensity and range images.
    Render {
        cloud: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        flags: Flags,
    },
    /// Detect markers and print them as JSON.
    Detect {
        cloud: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        flags: Flags,
        /// Also write the binary image as PBM and PNG.
        #[arg(long)]
        dump_binary: bool,
    },
    /// Estimate the LiDAR pose against a marker map and print it as JSON.
    Pose {
        cloud: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        flags: Flags,
    },
    /// Simulate a scan of a scene and write the cloud with its ground truth.
    Synth {
        scene: PathBuf,
        /// Full sensor model as JSON; replaces --lidar-model.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Cloud format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Pcd,
    Ply,
    Csv,
}

/// Pipeline flags; each one overrides the config file when given.
#[derive(Debug, Args)]
struct Flags {
    /// Azimuth resolution in degrees.
    #[arg(long, value_name = "DEG")]
    theta_a: Option<f64>,
    /// Inclination resolution in degrees.
    #[arg(long, value_name = "DEG")]
    theta_i: Option<f64>,
    /// Sensor preset: livox_mid40, vlp16, ultra_puck or custom.
    #[arg(long, value_name = "NAME")]
    lidar_model: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Gaussian blur sigma in pixels; 0 disables the blur.
    #[arg(long, value_name = "SIGMA")]
    blur_sigma: Option<f64>,
    #[arg(long, value_name = "SIZE")]
    blur_kernel: Option<usize>,
    /// Built-in family name or codebook file.
    #[arg(long, value_name = "NAME|FILE")]
    codebook: Option<String>,
    #[arg(long, value_name = "FILE")]
    marker_map: Option<PathBuf>,
    /// Rows searched above and below an unobserved corner.
    #[arg(long, value_name = "ROWS")]
    search_limit: Option<usize>,
    #[arg(long)]
    min_area: Option<f64>,
    #[arg(long)]
    max_cos: Option<f64>,
    #[arg(long)]
    max_border_errors: Option<usize>,
    /// Detect in the image as projected, without the left-right flip.
    #[arg(long)]
    no_mirror: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Write annotated PNG images.
    #[arg(long)]
    annotate: bool,
}

impl Flags {
    fn to_config(&self) -> PipelineConfig {
        PipelineConfig {
            lidar_model: self.lidar_model.clone(),
            theta_a_deg: self.theta_a,
            theta_i_deg: self.theta_i,
            threshold: self.threshold,
            blur_sigma: self.blur_sigma,
            blur_kernel: self.blur_kernel,
            codebook: self.codebook.clone(),
            marker_map: self.marker_map.clone(),
            search_limit: self.search_limit,
            min_area: self.min_area,
            max_cos: self.max_cos,
            max_border_errors: self.max_border_errors,
            no_mirror: self.no_mirror.then_some(true),
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            annotate: self.annotate.then_some(true),
        }
    }
}

const EXIT_INPUT: u8 = 2;
const EXIT_NO_POSE: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoCorrespondence | Error::NoFeatures | Error::InsufficientPoints(_) | Error::DegenerateGeometry(_) => {
            EXIT_NO_POSE
        }
        Error::OutOfBounds { .. } | Error::Interpolation { .. } => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}

fn load_config(path: Option<&Path>, flags: &Flags) -> Result<PipelineConfig, Error> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            PipelineConfig::from_json(&text)?
        }
        None => PipelineConfig::default(),
    };
    Ok(base.overlay(flags.to_config()))
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Render { cloud, input, flags } => {
            cmd_render(cloud, input, &load_config(cli.config.as_deref(), flags)?)
        }
        Command::Detect { cloud, input, flags, dump_binary } => {
            cmd_detect(cloud, input, &load_config(cli.config.as_deref(), flags)?, *dump_binary)
        }
        Command::Pose { cloud, input, flags } => cmd_pose(cloud, input, &load_config(cli.config.as_deref(), flags)?),
        Command::Synth { scene, model, flags } => {
            cmd_synth(scene, model.as_deref(), &load_config(cli.config.as_deref(), flags)?)
        }
    }
}

fn read_cloud(path: &Path, input: &InputArgs, timings: &mut Timings) -> Result<(PointCloud, LoadReport), Error> {
    let format = match input.format {
        Some(FormatArg::Pcd) => CloudFormat::PcdBinary,
        Some(FormatArg::Ply) => CloudFormat::PlyAscii,
        Some(FormatArg::Csv) => CloudFormat::Csv,
        None => CloudFormat::from_path(path)
            .ok_or_else(|| Error::Config(format!("cannot tell the format of {}; pass --format", path.display())))?,
    };
    timings.time("load", || load_cloud(path, format))
}

fn out_dir(cfg: &PipelineConfig) -> Result<PathBuf, Error> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    export::write_bytes(path, text.as_bytes())
}

fn print_timings(timings: &Timings) {
    for line in timings.lines() {
        eprintln!("{line}");
    }
    eprintln!("timing stage=total ms={:.3}", timings.total().as_secs_f64() * 1e3);
}

fn cmd_render(path: &Path, input: &InputArgs, cfg: &PipelineConfig) -> Result<(), Error> {
    let settings = Settings::from_config(cfg)?;
    let mut timings = Timings::default();
    let (cloud, report) = read_cloud(path, input, &mut timings)?;
    let img = pipeline::render(&cloud, &settings, &mut timings)?;
    let dir = out_dir(cfg)?;
    export::write_bytes(dir.join("intensity.pgm"), &export::encode_intensity_pgm(&img))?;
    export::write_bytes(dir.join("range.pgm"), &export::encode_range_pgm(&img))?;
    if cfg.annotate == Some(true) {
        export::write_bytes(dir.join("intensity.png"), &export::encode_intensity_png(&img, true)?)?;
    }
    let summary = json!({
        "width": img.width(),
        "height": img.height(),
        "observed": img.observed_count(),
        "out_of_bounds": img.out_of_bounds_count(),
        "occupancy_ratio": img.occupancy_ratio(),
        "load": report,
    });
    print!("{}", json::to_string_pretty(&summary));
    print_timings(&timings);
    Ok(())
}

fn cmd_detect(path: &Path, input: &InputArgs, cfg: &PipelineConfig, dump_binary: bool) -> Result<(), Error> {
    let settings = Settings::from_config(cfg)?;
    let mut timings = Timings::default();
    let (cloud, _) = read_cloud(path, input, &mut timings)?;
    let img = pipeline::render(&cloud, &settings, &mut timings)?;
    let det = pipeline::detect(&img, &settings, &mut timings)?;
    let text = json::to_string_pretty(&json::detections_value(&det.detections));
    if cfg.out_dir.is_some() || dump_binary || cfg.annotate == Some(true) {
        let dir = out_dir(cfg)?;
        write_text(&dir.join("detections.json"), &text)?;
        if dump_binary {
            export::write_bytes(dir.join("binary.pbm"), &export::encode_pbm(&det.binary))?;
            export::write_bytes(dir.join("binary.png"), &export::encode_binary_png(&det.binary)?)?;
        }
        if cfg.annotate == Some(true) {
            export::write_bytes(dir.join("annotated.png"), &export::encode_annotated_png(&det.binary, &det.detections)?)?;
        }
    }
    print!("{text}");
    print_timings(&timings);
    Ok(())
}

fn cmd_pose(path: &Path, input: &InputArgs, cfg: &PipelineConfig) -> Result<(), Error> {
    let settings = Settings::from_config(cfg)?;
    let map = cfg.marker_map()?;
    let mut timings = Timings::default();
    let (cloud, _) = read_cloud(path, input, &mut timings)?;
    let img = pipeline::render(&cloud, &settings, &mut timings)?;
    let det = pipeline::detect(&img, &settings, &mut timings)?;
    let result = pipeline::estimate_pose(&img, &det.detections, &map, settings.search_limit, &mut timings);
    // Timings are reported even when no pose comes out.
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            print_timings(&timings);
            return Err(e);
        }
    };
    for (id, vertex, reason) in &out.assembly.discarded {
        eprintln!("warning: marker {id} dropped, vertex {vertex}: {reason}");
    }
    for id in &out.correspondences.skipped {
        eprintln!("warning: marker {id} is not in the marker map");
    }
    let text = json::to_string_pretty(&json::pose_value(&out.pose, &out.correspondences));
    if cfg.out_dir.is_some() {
        let dir = out_dir(cfg)?;
        write_text(&dir.join("pose.json"), &text)?;
        write_text(&dir.join("detections.json"), &json::to_string_pretty(&json::detections_value(&det.detections)))?;
        write_text(&dir.join("features.json"), &json::to_string_pretty(&json::features_value(&out.features)))?;
        if cfg.annotate == Some(true) {
            export::write_bytes(dir.join("annotated.png"), &export::encode_annotated_png(&det.binary, &det.detections)?)?;
        }
    }
    print!("{text}");
    print_timings(&timings);
    Ok(())
}

fn sensor_model(model_file: Option<&Path>, cfg: &PipelineConfig) -> Result<LidarModel, Error> {
    let mut model = match (model_file, cfg.lidar_model.as_deref()) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read model {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("model file: {e}")))?
        }
        (None, Some(name)) => LidarModel::preset(name)
            .ok_or_else(|| Error::Config(format!("{name:?} is not a sensor preset; pass --model")))?,
        (None, None) => return Err(Error::Config("synth needs --lidar-model or --model".into())),
    };
    if let Some(a) = cfg.theta_a_deg {
        model.theta_h = a.to_radians();
    }
    if let Some(i) = cfg.theta_i_deg {
        model.theta_v = i.to_radians();
    }
    model.validate()?;
    Ok(model)
}

fn cmd_synth(scene_path: &Path, model_file: Option<&Path>, cfg: &PipelineConfig) -> Result<(), Error> {
    let text = std::fs::read_to_string(scene_path)
        .map_err(|e| Error::Config(format!("cannot read scene {}: {e}", scene_path.display())))?;
    let scene = Scene::from_json(&text)?;
    let model = sensor_model(model_file, cfg)?;
    let seed = cfg.seed.unwrap_or(0);
    let mut timings = Timings::default();
    let (cloud, truth) = timings.time("synth", || generate_scan(&scene, &model, seed))?;
    let dir = out_dir(cfg)?;
    save_cloud(&cloud, dir.join("cloud.pcd"), CloudFormat::PcdBinary)?;
    write_text(&dir.join("ground_truth.json"), &json::to_string_pretty(&truth))?;
    write_text(&dir.join("marker_map.json"), &json::to_string_pretty(&scene.marker_map()?.to_json_value()))?;
    eprintln!("wrote {} points to {}", cloud.len(), dir.join("cloud.pcd").display());
    print_timings(&timings);
    Ok(())
}
