//! Command-line pipeline: `synth`, `match`, `train`, `filter`, `eval`,
//! `bands`. Stages talk through files only, so any external detector's
//! KITTI-format output drops in at the `match` stage.
//!
//! Exit codes are stable: 0 success, 1 input/config error, 2 output I/O
//! error, 3 numeric failure.

use crate::config::RunConfig;
use crate::eval::{
    self, ApReport, BandReport, EvalConfig, EvalError, ReportFormat, ReportMeta,
};
use crate::kitti::{self, ClassFilter, Difficulty, FrameMetaMap, KittiError, Modality};
use crate::matching::{self, CameraSource, FeatureLayout, MatchConfig};
use crate::synth::{self, SynthConfig, SynthError};
use crate::verifier::{self, TrainConfig, VerifierError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

/// Failures classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable/malformed inputs, misaligned directories (1).
    Config(String),
    /// Failure writing an output artifact (2).
    Io(String),
    /// Numeric failure such as a diverging training loss (3).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

fn input_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn write_err(e: impl fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "latefuse",
    version,
    about = "Verify LiDAR detections against camera detections and score the result with KITTI-style 2D AP"
)]
pub struct Cli {
    /// TOML run configuration; explicit flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for per-frame stages. Results are identical at any
    /// thread count; 1 is the default.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic KITTI-format dataset.
    Synth(SynthArgs),
    /// Build labeled feature vectors from detection directories.
    Match(MatchArgs),
    /// Train the accept/reject verifier on a feature CSV.
    Train(TrainArgs),
    /// Filter LiDAR detection files through a trained verifier.
    Filter(FilterArgs),
    /// Evaluate detections: AP per difficulty band plus PR curves.
    Eval(EvalArgs),
    /// TP/FP histogram over the ten confidence bands.
    Bands(BandsArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene/detector TOML config; omit to use the built-in default
    /// (500 frames, seed 7).
    pub scene_config: Option<PathBuf>,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// LiDAR detection directory (one `<frame>.txt` per frame).
    #[arg(long)]
    pub lidar: PathBuf,
    /// Camera detection directory.
    #[arg(long)]
    pub camera: PathBuf,
    /// Second camera detection directory (switches to the 17-value layout).
    #[arg(long)]
    pub camera2: Option<PathBuf>,
    /// The first camera is an open-vocabulary model (lower match threshold).
    #[arg(long)]
    pub camera_openvocab: bool,
    /// The second camera is an open-vocabulary model.
    #[arg(long)]
    pub camera2_openvocab: bool,
    /// Ground-truth label directory.
    #[arg(long)]
    pub gt: PathBuf,
    /// Frame-meta table `frame width height`; missing frames fall back to
    /// 1242x375.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// IoU threshold for standard camera matching.
    #[arg(long)]
    pub tau_match: Option<f64>,
    /// IoU threshold for open-vocabulary camera matching.
    #[arg(long)]
    pub tau_match_openvocab: Option<f64>,
    /// Ground-truth IoU threshold for positive labels.
    #[arg(long)]
    pub tau_gt: Option<f64>,
    /// Evaluated object class.
    #[arg(long)]
    pub class: Option<String>,
    /// Output feature CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature CSV produced by `match`.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub pos_weight: Option<f64>,
    #[arg(long)]
    pub neg_weight: Option<f64>,
    #[arg(long)]
    pub hidden_width: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Disable the per-epoch shuffle.
    #[arg(long)]
    pub no_shuffle: bool,
    /// Use one batch per epoch regardless of --batch-size.
    #[arg(long)]
    pub full_batch: bool,
    /// Output model file (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Trained verifier model (JSON).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub lidar: PathBuf,
    #[arg(long)]
    pub camera: PathBuf,
    #[arg(long)]
    pub camera2: Option<PathBuf>,
    #[arg(long)]
    pub camera_openvocab: bool,
    #[arg(long)]
    pub camera2_openvocab: bool,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub tau_match: Option<f64>,
    #[arg(long)]
    pub tau_match_openvocab: Option<f64>,
    #[arg(long)]
    pub class: Option<String>,
    /// Acceptance threshold on the verifier probability (inclusive).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Multiply each kept detection's score by the verifier probability
    /// instead of passing scores through untouched.
    #[arg(long)]
    pub rescore: bool,
    /// Output directory for filtered detection files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandArg {
    Easy,
    Moderate,
    Hard,
    All,
}

impl BandArg {
    fn parse_name(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(BandArg::Easy),
            "moderate" => Ok(BandArg::Moderate),
            "hard" => Ok(BandArg::Hard),
            "all" => Ok(BandArg::All),
            other => Err(CliError::Config(format!(
                "unknown difficulty {other:?} (expected easy|moderate|hard|all)"
            ))),
        }
    }

    fn bands(self) -> Vec<Difficulty> {
        match self {
            BandArg::Easy => vec![Difficulty::Easy],
            BandArg::Moderate => vec![Difficulty::Moderate],
            BandArg::Hard => vec![Difficulty::Hard],
            BandArg::All => vec![Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApModeArg {
    #[value(name = "11")]
    Eleven,
    #[value(name = "40")]
    Forty,
    Both,
}

impl ApModeArg {
    fn parse_name(s: &str) -> Result<Self, CliError> {
        match s {
            "11" => Ok(ApModeArg::Eleven),
            "40" => Ok(ApModeArg::Forty),
            "both" => Ok(ApModeArg::Both),
            other => Err(CliError::Config(format!(
                "unknown ap mode {other:?} (expected 11|40|both)"
            ))),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth label directory.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection directory to score.
    #[arg(long)]
    pub det: PathBuf,
    #[arg(long, value_enum)]
    pub difficulty: Option<BandArg>,
    #[arg(long, value_enum)]
    pub ap_mode: Option<ApModeArg>,
    /// Drop detections below this score from TP/FP tables.
    #[arg(long)]
    pub score_floor: Option<f64>,
    /// Overlap required to claim a ground-truth box.
    #[arg(long)]
    pub iou_thresh: Option<f64>,
    #[arg(long)]
    pub class: Option<String>,
    /// Count detections on "Van" ground truth as false positives instead of
    /// ignoring them.
    #[arg(long)]
    pub no_van_ignore: bool,
    /// Full report (JSON).
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    /// PR-curve points (CSV).
    #[arg(long)]
    pub out_pr: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BandsArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub det: PathBuf,
    /// Single difficulty band (default moderate).
    #[arg(long, value_enum)]
    pub difficulty: Option<BandArg>,
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub score_floor: Option<f64>,
    /// Output CSV: ten rows of `band_low,band_high,tp,fp`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let run_cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if cli.threads == 0 {
        return Err(CliError::Config("--threads must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command, &run_cfg))
}

fn dispatch(command: Command, run_cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Match(args) => cmd_match(args, run_cfg),
        Command::Train(args) => cmd_train(args, run_cfg),
        Command::Filter(args) => cmd_filter(args, run_cfg),
        Command::Eval(args) => cmd_eval(args, run_cfg),
        Command::Bands(args) => cmd_bands(args, run_cfg),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let mut cfg = match &args.scene_config {
        Some(path) => SynthConfig::load(path).map_err(input_err)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    synth::generate_dataset(&cfg, &args.out).map_err(|e| match e {
        SynthError::InvalidConfig(_) => input_err(e),
        SynthError::Io { .. } | SynthError::Kitti(_) => write_err(e),
    })?;
    println!(
        "synth: wrote {} frames (seed {}) to {}",
        cfg.n_frames,
        cfg.master_seed,
        args.out.display()
    );
    Ok(())
}

fn resolve_match_config(
    tau_match: Option<f64>,
    tau_openvocab: Option<f64>,
    tau_gt: Option<f64>,
    run_cfg: &RunConfig,
) -> MatchConfig {
    let defaults = MatchConfig::default();
    MatchConfig {
        tau_match: tau_match
            .or(run_cfg.matching.tau_match)
            .unwrap_or(defaults.tau_match),
        tau_match_openvocab: tau_openvocab
            .or(run_cfg.matching.tau_match_openvocab)
            .unwrap_or(defaults.tau_match_openvocab),
        tau_gt: tau_gt.or(run_cfg.matching.tau_gt).unwrap_or(defaults.tau_gt),
    }
}

fn resolve_class(flag: Option<String>, config: &Option<String>) -> ClassFilter {
    match flag.or_else(|| config.clone()) {
        Some(name) => ClassFilter::new(name),
        None => ClassFilter::car(),
    }
}

fn load_meta(meta: &Option<PathBuf>) -> Result<FrameMetaMap, CliError> {
    match meta {
        Some(path) => {
            let (w, h) = kitti::DEFAULT_IMAGE_DIMS;
            let default = crate::geometry::ImageDims::new(w, h).expect("constant dims");
            FrameMetaMap::load(path, Some(default)).map_err(input_err)
        }
        None => Ok(FrameMetaMap::kitti_default()),
    }
}

fn camera_sources(
    camera: &Path,
    camera2: &Option<PathBuf>,
    openvocab1: bool,
    openvocab2: bool,
) -> Vec<CameraSource> {
    let mut sources = vec![CameraSource::new(camera, openvocab1)];
    if let Some(dir) = camera2 {
        sources.push(CameraSource::new(dir, openvocab2));
    }
    sources
}

/// Frames present under `lidar` but missing under `gt`, for error messages.
fn missing_gt_frames(lidar: &Path, gt: &Path) -> Result<Vec<String>, CliError> {
    let frames = kitti::list_frame_files(lidar).map_err(input_err)?;
    Ok(frames
        .iter()
        .filter(|(frame, _)| !gt.join(format!("{frame}.txt")).exists())
        .map(|(frame, _)| frame.to_string())
        .collect())
}

fn cmd_match(args: MatchArgs, run_cfg: &RunConfig) -> Result<(), CliError> {
    let cfg = resolve_match_config(
        args.tau_match,
        args.tau_match_openvocab,
        args.tau_gt,
        run_cfg,
    );
    cfg.validate().map_err(input_err)?;
    let class = resolve_class(args.class, &run_cfg.matching.class);
    let meta = load_meta(&args.meta)?;
    let missing = missing_gt_frames(&args.lidar, &args.gt)?;
    if !missing.is_empty() {
        return Err(CliError::Config(format!(
            "frames missing ground truth: {}",
            missing.join(", ")
        )));
    }
    let sources = camera_sources(
        &args.camera,
        &args.camera2,
        args.camera_openvocab,
        args.camera2_openvocab,
    );
    let samples = matching::build_dataset(&args.lidar, &sources, &args.gt, &meta, &cfg, &class)
        .map_err(input_err)?;
    matching::write_feature_csv(&samples, &args.out).map_err(write_err)?;
    let positives = samples.iter().filter(|s| s.label).count();
    println!(
        "match: {} samples ({} positive) -> {}",
        samples.len(),
        positives,
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs, run_cfg: &RunConfig) -> Result<(), CliError> {
    let csv = matching::read_feature_csv(&args.features).map_err(input_err)?;
    let section = &run_cfg.train;
    let defaults = TrainConfig::default();
    let mut cfg = TrainConfig {
        epochs: args.epochs.or(section.epochs).unwrap_or(defaults.epochs),
        lr: args.lr.or(section.lr).unwrap_or(defaults.lr),
        pos_weight: args
            .pos_weight
            .or(section.pos_weight)
            .unwrap_or(defaults.pos_weight),
        neg_weight: args
            .neg_weight
            .or(section.neg_weight)
            .unwrap_or(defaults.neg_weight),
        hidden_width: args
            .hidden_width
            .or(section.hidden_width)
            .unwrap_or(defaults.hidden_width),
        batch_size: args
            .batch_size
            .or(section.batch_size)
            .unwrap_or(defaults.batch_size),
        seed: args.seed.or(section.seed).unwrap_or(defaults.seed),
        shuffle_each_epoch: !args.no_shuffle
            && section.shuffle_each_epoch.unwrap_or(defaults.shuffle_each_epoch),
    };
    if args.full_batch {
        cfg.batch_size = csv.samples.len().max(1);
    }
    let effective_batch = cfg.batch_size.min(csv.samples.len().max(1));
    println!(
        "train config: epochs={} lr={} pos_weight={} neg_weight={} hidden_width={} batch_size={} seed={} shuffle={}",
        cfg.epochs,
        cfg.lr,
        cfg.pos_weight,
        cfg.neg_weight,
        cfg.hidden_width,
        effective_batch,
        cfg.seed,
        cfg.shuffle_each_epoch
    );

    if csv.samples.is_empty() {
        eprintln!("warning: feature CSV has no samples; writing an untrained model");
        let model = verifier::init_model(csv.layout, cfg.hidden_width, cfg.seed);
        verifier::save_model(&model, Some(&cfg), cfg.seed, &args.out).map_err(write_err)?;
        println!("train: wrote {}", args.out.display());
        return Ok(());
    }
    if !verifier::has_both_classes(&csv.samples) {
        eprintln!("warning: training set contains a single class; the verifier will be trivial");
    }

    let (model, log) = verifier::train(&csv.samples, &cfg).map_err(|e| match e {
        VerifierError::NumericFailure { .. } => CliError::Numeric(e.to_string()),
        other => input_err(other),
    })?;
    for entry in &log {
        println!(
            "epoch {:>3}/{} loss={:.6} recall={:.6} precision={:.6}",
            entry.epoch, cfg.epochs, entry.loss, entry.recall, entry.precision
        );
    }
    verifier::save_model(&model, Some(&cfg), cfg.seed, &args.out).map_err(write_err)?;
    println!("train: wrote {}", args.out.display());
    Ok(())
}

fn cmd_filter(args: FilterArgs, run_cfg: &RunConfig) -> Result<(), CliError> {
    let (model, _, _) = verifier::load_model(&args.model).map_err(input_err)?;
    let wanted_cameras = match model.feature_layout {
        FeatureLayout::Single11 => 1,
        FeatureLayout::Dual17 => 2,
    };
    let given_cameras = 1 + usize::from(args.camera2.is_some());
    if wanted_cameras != given_cameras {
        return Err(CliError::Config(format!(
            "model expects {wanted_cameras} camera source(s) but {given_cameras} given"
        )));
    }
    let cfg = resolve_match_config(args.tau_match, args.tau_match_openvocab, None, run_cfg);
    cfg.validate().map_err(input_err)?;
    let class = resolve_class(args.class, &run_cfg.matching.class);
    let meta = load_meta(&args.meta)?;
    let threshold = args
        .threshold
        .or(run_cfg.filter.threshold)
        .unwrap_or(0.5);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CliError::Config(format!(
            "--threshold must be in (0, 1), got {threshold}"
        )));
    }
    let sources = camera_sources(
        &args.camera,
        &args.camera2,
        args.camera_openvocab,
        args.camera2_openvocab,
    );

    fs::create_dir_all(&args.out).map_err(|e| write_err(format!("{}: {e}", args.out.display())))?;
    let frames = kitti::list_frame_files(&args.lidar).map_err(input_err)?;
    let (mut total_in, mut total_kept) = (0usize, 0usize);
    for (frame, path) in &frames {
        let content = fs::read_to_string(path)
            .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
        let lines: Vec<&str> = content.lines().filter(|l| !l.trim().is_empty()).collect();
        let dets = kitti::parse_detection_file(path, Modality::Lidar).map_err(input_err)?;
        debug_assert_eq!(lines.len(), dets.len());

        // judge only the evaluated class; other lines pass through untouched
        let judged_idx: Vec<usize> = (0..dets.len())
            .filter(|&i| class.matches(&dets[i].class_name))
            .collect();
        let mut judged: Vec<kitti::Detection> =
            judged_idx.iter().map(|&i| dets[i].clone()).collect();
        kitti::rescale_scores(&mut judged);
        let cams = matching::load_camera_detections(&sources, frame, &class).map_err(input_err)?;
        let dims = meta.get(frame).map_err(input_err)?;
        let features = matching::build_frame_features(&judged, &cams, &sources, dims, &cfg)
            .map_err(input_err)?;
        let predictions: Vec<verifier::Prediction> = features
            .iter()
            .map(|f| verifier::predict(&model, f, threshold))
            .collect::<Result<_, _>>()
            .map_err(input_err)?;

        let mut keep = vec![true; dets.len()];
        let mut rescored: Vec<Option<String>> = vec![None; dets.len()];
        for (slot, &i) in judged_idx.iter().enumerate() {
            keep[i] = predictions[slot].accepted;
            if keep[i] && args.rescore {
                let mut det = dets[i].clone();
                det.score *= predictions[slot].probability;
                rescored[i] = Some(kitti::format_detection_line(&det));
            }
        }
        let mut out = String::new();
        for (i, line) in lines.iter().enumerate() {
            if keep[i] {
                out.push_str(rescored[i].as_deref().unwrap_or(line));
                out.push('\n');
            }
        }
        total_in += dets.len();
        total_kept += keep.iter().filter(|&&k| k).count();
        let out_path = args.out.join(format!("{frame}.txt"));
        fs::write(&out_path, out)
            .map_err(|e| write_err(format!("{}: {e}", out_path.display())))?;
    }
    println!(
        "filter: kept {total_kept}/{total_in} detections across {} frames -> {}",
        frames.len(),
        args.out.display()
    );
    Ok(())
}

fn resolve_eval_config(
    class: Option<String>,
    iou_thresh: Option<f64>,
    score_floor: Option<f64>,
    no_van_ignore: bool,
    run_cfg: &RunConfig,
) -> EvalConfig {
    let defaults = EvalConfig::default();
    EvalConfig {
        iou_thresh: iou_thresh
            .or(run_cfg.eval.iou_thresh)
            .unwrap_or(defaults.iou_thresh),
        dontcare_iou: defaults.dontcare_iou,
        class: resolve_class(class, &run_cfg.eval.class),
        van_ignored: if no_van_ignore {
            false
        } else {
            run_cfg.eval.van_ignored.unwrap_or(defaults.van_ignored)
        },
        score_floor: score_floor
            .or(run_cfg.eval.score_floor)
            .unwrap_or(defaults.score_floor),
    }
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::Io { .. } => write_err(e),
        EvalError::Kitti(KittiError::Io { .. }) => input_err(e),
        other => input_err(other),
    }
}

fn cmd_eval(args: EvalArgs, run_cfg: &RunConfig) -> Result<(), CliError> {
    let band_arg = match args.difficulty {
        Some(b) => b,
        None => match &run_cfg.eval.difficulty {
            Some(s) => BandArg::parse_name(s)?,
            None => BandArg::All,
        },
    };
    let ap_mode = match args.ap_mode {
        Some(m) => m,
        None => match &run_cfg.eval.ap_mode {
            Some(s) => ApModeArg::parse_name(s)?,
            None => ApModeArg::Both,
        },
    };
    let cfg = resolve_eval_config(
        args.class,
        args.iou_thresh,
        args.score_floor,
        args.no_van_ignore,
        run_cfg,
    );
    let frames = eval::load_eval_frames(&args.gt, &args.det, &cfg.class).map_err(eval_err)?;
    let bands: Vec<BandReport> = band_arg
        .bands()
        .into_iter()
        .map(|difficulty| eval::evaluate_band(&frames, difficulty, &cfg))
        .collect::<Result<_, _>>()
        .map_err(eval_err)?;

    print_ap_table(&bands, ap_mode);

    let report = ApReport {
        meta: ReportMeta {
            gt_dir: args.gt.display().to_string(),
            det_dir: args.det.display().to_string(),
            class: cfg.class.class().to_string(),
            iou_thresh: cfg.iou_thresh,
            score_floor: cfg.score_floor,
        },
        bands,
    };
    if let Some(path) = &args.out_report {
        eval::emit_report(&report, path, ReportFormat::Json).map_err(eval_err)?;
        println!("eval: report -> {}", path.display());
    }
    if let Some(path) = &args.out_pr {
        eval::emit_report(&report, path, ReportFormat::Csv).map_err(eval_err)?;
        println!("eval: pr points -> {}", path.display());
    }
    Ok(())
}

fn print_ap_table(bands: &[BandReport], ap_mode: ApModeArg) {
    let show_11 = matches!(ap_mode, ApModeArg::Eleven | ApModeArg::Both);
    let show_40 = matches!(ap_mode, ApModeArg::Forty | ApModeArg::Both);
    let mut header = format!("{:<10}", "band");
    if show_11 {
        header.push_str(&format!("{:>12}", "2d_ap_11"));
    }
    if show_40 {
        header.push_str(&format!("{:>12}", "2d_ap_40"));
    }
    header.push_str(&format!("{:>8}{:>8}{:>8}", "tp", "fp", "gt"));
    println!("{header}");
    for band in bands {
        let mut row = format!("{:<10}", band.difficulty.name());
        if show_11 {
            row.push_str(&format!("{:>12.3}", band.ap_11));
        }
        if show_40 {
            row.push_str(&format!("{:>12.3}", band.ap_40));
        }
        row.push_str(&format!(
            "{:>8}{:>8}{:>8}",
            band.tp, band.fp, band.gt_count
        ));
        println!("{row}");
    }
}

fn cmd_bands(args: BandsArgs, run_cfg: &RunConfig) -> Result<(), CliError> {
    let band_arg = match args.difficulty {
        Some(b) => b,
        None => match &run_cfg.eval.difficulty {
            Some(s) => BandArg::parse_name(s)?,
            None => BandArg::Moderate,
        },
    };
    let difficulty = match band_arg {
        BandArg::All => {
            return Err(CliError::Config(
                "bands needs a single difficulty (easy|moderate|hard)".into(),
            ))
        }
        single => single.bands()[0],
    };
    let cfg = resolve_eval_config(args.class, None, args.score_floor, false, run_cfg);
    let frames = eval::load_eval_frames(&args.gt, &args.det, &cfg.class).map_err(eval_err)?;
    if eval::band_gt_count(&frames, difficulty, &cfg) == 0 {
        return Err(input_err(EvalError::NoGroundTruth(difficulty)));
    }
    let hist = eval::band_histogram(&frames, difficulty, &cfg);
    eval::write_band_histogram_csv(&hist, &args.out).map_err(eval_err)?;
    let (tp, fp) = hist.totals();
    println!(
        "bands: {} band, {tp} tp / {fp} fp -> {}",
        difficulty,
        args.out.display()
    );
    Ok(())
}
