//! Seeded generator of KITTI-format scenes and detector outputs.
//!
//! The default profiles imitate the regime this toolkit targets: a LiDAR
//! detector that finds nearly everything but over-fires (false positives
//! spread across all confidence bands) next to camera detectors that miss
//! more but rarely fire where nothing exists. Every byte of the output tree
//! is a pure function of the config, including the master seed; per-frame
//! RNG streams derive from (master seed, frame index) so any frame can be
//! regenerated in isolation.

use crate::geometry::{Box2D, ImageDims};
use crate::kitti::{
    self, Detection, FrameId, GroundTruthObject, KittiError, Modality, PLACEHOLDER_3D,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kitti(#[from] KittiError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Histogram over the ten confidence bands, used to draw detection scores.
pub type ScoreBands = [f64; 10];

/// Behaviour of one synthetic detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorProfile {
    /// Chance of emitting a detection for each ground-truth object.
    pub detect_prob: f64,
    /// Gaussian jitter scale as a fraction of the box size.
    pub box_jitter_sigma: f64,
    /// Poisson mean of spurious boxes per frame.
    pub fp_per_frame: f64,
    /// Score distribution of true detections over the ten bands.
    pub tp_score_dist: ScoreBands,
    /// Score distribution of spurious boxes over the ten bands.
    pub fp_score_dist: ScoreBands,
    /// Chance that a spurious box co-locates with a LiDAR false positive
    /// (correlation control for camera profiles; unused by the LiDAR one).
    pub fp_on_lidar_fp_prob: f64,
}

impl Default for DetectorProfile {
    fn default() -> Self {
        Self {
            detect_prob: 0.9,
            box_jitter_sigma: 0.03,
            fp_per_frame: 1.0,
            tp_score_dist: [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.10, 0.15, 0.30, 0.45],
            fp_score_dist: [0.1; 10],
            fp_on_lidar_fp_prob: 0.0,
        }
    }
}

impl DetectorProfile {
    /// An over-firing LiDAR detector: high recall, false positives in every
    /// confidence band — including above the genuine detections, which is
    /// what drags its precision at every operating point.
    pub fn lidar_default() -> Self {
        Self {
            detect_prob: 0.95,
            fp_per_frame: 2.0,
            tp_score_dist: [0.0, 0.0, 0.0, 0.0, 0.03, 0.03, 0.03, 0.30, 0.32, 0.29],
            fp_score_dist: [0.10, 0.10, 0.10, 0.10, 0.12, 0.12, 0.11, 0.09, 0.08, 0.08],
            ..Self::default()
        }
    }

    /// A conservative camera detector that occasionally also fires near a
    /// LiDAR false positive.
    pub fn camera_default() -> Self {
        Self {
            detect_prob: 0.85,
            fp_per_frame: 0.5,
            tp_score_dist: [0.0, 0.0, 0.0, 0.02, 0.03, 0.05, 0.10, 0.20, 0.30, 0.30],
            fp_score_dist: [0.05, 0.10, 0.15, 0.15, 0.15, 0.12, 0.10, 0.08, 0.06, 0.04],
            fp_on_lidar_fp_prob: 0.1,
            ..Self::default()
        }
    }

    fn validate(&self, name: &str) -> Result<(), SynthError> {
        let prob = |v: f64, what: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SynthError::InvalidConfig(format!(
                    "{name}.{what} = {v} is not a probability"
                )))
            }
        };
        prob(self.detect_prob, "detect_prob")?;
        prob(self.fp_on_lidar_fp_prob, "fp_on_lidar_fp_prob")?;
        if self.fp_per_frame < 0.0 || !self.fp_per_frame.is_finite() {
            return Err(SynthError::InvalidConfig(format!(
                "{name}.fp_per_frame must be a finite non-negative rate"
            )));
        }
        if self.box_jitter_sigma < 0.0 {
            return Err(SynthError::InvalidConfig(format!(
                "{name}.box_jitter_sigma must be non-negative"
            )));
        }
        for (label, bands) in [("tp_score_dist", &self.tp_score_dist), ("fp_score_dist", &self.fp_score_dist)] {
            if bands.iter().any(|&v| v < 0.0) {
                return Err(SynthError::InvalidConfig(format!(
                    "{name}.{label} has negative weights"
                )));
            }
            let sum: f64 = bands.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(SynthError::InvalidConfig(format!(
                    "{name}.{label} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Full description of a synthetic dataset. The default covers 500 frames at
/// the dominant KITTI image size with seed 7.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_frames: usize,
    pub image_width: u32,
    pub image_height: u32,
    /// Inclusive min/max ground-truth objects per frame.
    pub gt_per_frame: [usize; 2],
    /// Ground-truth box height range in pixels.
    pub gt_height_range: [f64; 2],
    /// Box width = height x aspect, drawn from this range.
    pub gt_aspect_range: [f64; 2],
    /// Probabilities of occlusion levels 0..=3.
    pub occlusion_probs: [f64; 4],
    /// Truncation is uniform in [0, truncation_max].
    pub truncation_max: f64,
    pub master_seed: u64,
    pub lidar: DetectorProfile,
    pub camera: DetectorProfile,
    pub camera2: Option<DetectorProfile>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_frames: 500,
            image_width: 1242,
            image_height: 375,
            gt_per_frame: [2, 4],
            gt_height_range: [28.0, 150.0],
            gt_aspect_range: [1.0, 2.5],
            occlusion_probs: [0.70, 0.20, 0.08, 0.02],
            truncation_max: 0.4,
            master_seed: 7,
            lidar: DetectorProfile::lidar_default(),
            camera: DetectorProfile::camera_default(),
            camera2: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_frames < 1 {
            return Err(SynthError::InvalidConfig("n_frames must be >= 1".into()));
        }
        ImageDims::new(self.image_width, self.image_height)
            .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
        if self.gt_per_frame[0] > self.gt_per_frame[1] {
            return Err(SynthError::InvalidConfig(
                "gt_per_frame min exceeds max".into(),
            ));
        }
        let [h0, h1] = self.gt_height_range;
        if !(h0 > 0.0 && h0 <= h1 && h1 < f64::from(self.image_height)) {
            return Err(SynthError::InvalidConfig(format!(
                "gt_height_range [{h0}, {h1}] must sit inside (0, image_height)"
            )));
        }
        let [a0, a1] = self.gt_aspect_range;
        if !(a0 > 0.0 && a0 <= a1) {
            return Err(SynthError::InvalidConfig(
                "gt_aspect_range must be positive and ordered".into(),
            ));
        }
        if self.occlusion_probs.iter().any(|&p| p < 0.0)
            || (self.occlusion_probs.iter().sum::<f64>() - 1.0).abs() > 1e-6
        {
            return Err(SynthError::InvalidConfig(
                "occlusion_probs must be non-negative and sum to 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.truncation_max) {
            return Err(SynthError::InvalidConfig(
                "truncation_max must be in [0, 1]".into(),
            ));
        }
        self.lidar.validate("lidar")?;
        self.camera.validate("camera")?;
        if let Some(cam2) = &self.camera2 {
            cam2.validate("camera2")?;
        }
        Ok(())
    }

    pub fn dims(&self) -> ImageDims {
        ImageDims::new(self.image_width, self.image_height).expect("validated")
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let content = fs::read_to_string(path).map_err(|e| SynthError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let cfg: SynthConfig = toml::from_str(&content)
            .map_err(|e| SynthError::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

// Lane offsets inside a frame's stream block, one per consumer.
const LANE_SCENE: u64 = 0;
const LANE_LIDAR: u64 = 1;
const LANE_CAMERA: u64 = 2;
const LANE_CAMERA2: u64 = 3;
const LANES_PER_FRAME: u64 = 4;

fn frame_rng(master_seed: u64, frame_index: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(frame_index * LANES_PER_FRAME + lane);
    rng
}

fn sample_band(bands: &ScoreBands, rng: &mut ChaCha8Rng) -> f64 {
    let total: f64 = bands.iter().sum();
    let mut u = rng.random_range(0.0..total);
    let mut band = 9;
    for (i, &w) in bands.iter().enumerate() {
        if u < w {
            band = i;
            break;
        }
        u -= w;
    }
    rng.random_range(band as f64 / 10.0..(band as f64 + 1.0) / 10.0)
}

fn sample_occlusion(probs: &[f64; 4], rng: &mut ChaCha8Rng) -> u8 {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random_range(0.0..total);
    for (i, &w) in probs.iter().enumerate() {
        if u < w {
            return i as u8;
        }
        u -= w;
    }
    3
}

fn sample_box(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Box2D {
    let w_img = f64::from(cfg.image_width);
    let h_img = f64::from(cfg.image_height);
    let h = rng.random_range(cfg.gt_height_range[0]..=cfg.gt_height_range[1]);
    let aspect = rng.random_range(cfg.gt_aspect_range[0]..=cfg.gt_aspect_range[1]);
    let w = (h * aspect).min(w_img);
    let x0 = rng.random_range(0.0..=(w_img - w));
    let y0 = rng.random_range(0.0..=(h_img - h));
    Box2D::new(x0, y0, x0 + w, y0 + h).expect("sampled box is ordered")
}

/// Gaussian jitter of center and size, truncated so the box stays valid
/// (minimum side 2 px).
fn jitter_box(b: &Box2D, sigma: f64, rng: &mut ChaCha8Rng) -> Box2D {
    if sigma <= 0.0 {
        return *b;
    }
    let (w, h) = (b.width().max(2.0), b.height().max(2.0));
    let nx = Normal::new(0.0, sigma * w).expect("finite sigma");
    let ny = Normal::new(0.0, sigma * h).expect("finite sigma");
    let cx = (b.x_min() + b.x_max()) / 2.0 + nx.sample(rng);
    let cy = (b.y_min() + b.y_max()) / 2.0 + ny.sample(rng);
    let new_w = (w + nx.sample(rng)).max(2.0);
    let new_h = (h + ny.sample(rng)).max(2.0);
    Box2D::new(
        cx - new_w / 2.0,
        cy - new_h / 2.0,
        cx + new_w / 2.0,
        cy + new_h / 2.0,
    )
    .expect("jittered box is ordered")
}

/// Deterministically generate one frame's ground truth.
pub fn generate_scene(cfg: &SynthConfig, frame_index: u64) -> (Vec<GroundTruthObject>, ImageDims) {
    let mut rng = frame_rng(cfg.master_seed, frame_index, LANE_SCENE);
    let n = rng.random_range(cfg.gt_per_frame[0]..=cfg.gt_per_frame[1]);
    let gts = (0..n)
        .map(|_| {
            let box2d = sample_box(cfg, &mut rng);
            let occlusion = sample_occlusion(&cfg.occlusion_probs, &mut rng);
            let truncation = if cfg.truncation_max > 0.0 {
                rng.random_range(0.0..=cfg.truncation_max)
            } else {
                0.0
            };
            GroundTruthObject {
                class_name: "Car".into(),
                truncation,
                occlusion,
                alpha: 0.0,
                box2d,
                extras3d: PLACEHOLDER_3D,
            }
        })
        .collect();
    (gts, cfg.dims())
}

/// Detections for one modality plus the spurious boxes it invented
/// (camera profiles reuse the LiDAR list for co-located false positives).
#[derive(Debug, Clone)]
pub struct GeneratedDetections {
    pub detections: Vec<Detection>,
    pub fp_boxes: Vec<Box2D>,
}

/// Run one detector profile over a scene. `colocate_with` carries the LiDAR
/// false-positive boxes; pass an empty slice for the LiDAR pass itself.
pub fn generate_detections(
    gts: &[GroundTruthObject],
    profile: &DetectorProfile,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    colocate_with: &[Box2D],
    modality: Modality,
    frame: &FrameId,
) -> GeneratedDetections {
    let mut detections = Vec::new();
    let mut fp_boxes = Vec::new();
    for gt in gts {
        if rng.random_bool(profile.detect_prob) {
            let box2d = jitter_box(&gt.box2d, profile.box_jitter_sigma, rng);
            let score = sample_band(&profile.tp_score_dist, rng);
            detections.push(Detection::new("Car", box2d, score, modality, frame.clone()));
        }
    }
    let n_fp = if profile.fp_per_frame > 0.0 {
        let poisson = Poisson::new(profile.fp_per_frame).expect("validated rate");
        poisson.sample(rng) as usize
    } else {
        0
    };
    for _ in 0..n_fp {
        let box2d = if !colocate_with.is_empty() && rng.random_bool(profile.fp_on_lidar_fp_prob) {
            let idx = rng.random_range(0..colocate_with.len());
            jitter_box(&colocate_with[idx], profile.box_jitter_sigma, rng)
        } else {
            sample_box(cfg, rng)
        };
        let score = sample_band(&profile.fp_score_dist, rng);
        fp_boxes.push(box2d);
        detections.push(Detection::new("Car", box2d, score, modality, frame.clone()));
    }
    GeneratedDetections {
        detections,
        fp_boxes,
    }
}

/// Everything generated for one frame.
#[derive(Debug, Clone)]
pub struct FrameBundle {
    pub frame: FrameId,
    pub gts: Vec<GroundTruthObject>,
    pub lidar: Vec<Detection>,
    pub camera: Vec<Detection>,
    pub camera2: Option<Vec<Detection>>,
}

/// Generate one frame end to end. Independent of any other frame, so frames
/// may be produced in any order (or in parallel) with identical results.
pub fn generate_frame(cfg: &SynthConfig, frame_index: u64) -> FrameBundle {
    let frame = FrameId::new(&format!("{frame_index:06}")).expect("numeric frame id");
    let (gts, _) = generate_scene(cfg, frame_index);

    let mut lidar_rng = frame_rng(cfg.master_seed, frame_index, LANE_LIDAR);
    let lidar = generate_detections(
        &gts,
        &cfg.lidar,
        cfg,
        &mut lidar_rng,
        &[],
        Modality::Lidar,
        &frame,
    );

    let mut cam_rng = frame_rng(cfg.master_seed, frame_index, LANE_CAMERA);
    let camera = generate_detections(
        &gts,
        &cfg.camera,
        cfg,
        &mut cam_rng,
        &lidar.fp_boxes,
        Modality::Camera,
        &frame,
    );

    let camera2 = cfg.camera2.as_ref().map(|profile| {
        let mut cam2_rng = frame_rng(cfg.master_seed, frame_index, LANE_CAMERA2);
        generate_detections(
            &gts,
            profile,
            cfg,
            &mut cam2_rng,
            &lidar.fp_boxes,
            Modality::Camera2,
            &frame,
        )
        .detections
    });

    FrameBundle {
        frame,
        gts,
        lidar: lidar.detections,
        camera: camera.detections,
        camera2,
    }
}

/// Write the full KITTI-format tree: `label/`, `lidar/`, `camera/`
/// (plus `camera2/` when configured), a frame-meta table, and an echo of the
/// generating config.
pub fn generate_dataset(cfg: &SynthConfig, out_dir: &Path) -> Result<(), SynthError> {
    cfg.validate()?;
    let io = |path: &Path, e: std::io::Error| SynthError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let label_dir = out_dir.join("label");
    let lidar_dir = out_dir.join("lidar");
    let camera_dir = out_dir.join("camera");
    for dir in [&label_dir, &lidar_dir, &camera_dir] {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    let camera2_dir = out_dir.join("camera2");
    if cfg.camera2.is_some() {
        fs::create_dir_all(&camera2_dir).map_err(|e| io(&camera2_dir, e))?;
    }

    let mut meta = Vec::with_capacity(cfg.n_frames);
    for frame_index in 0..cfg.n_frames as u64 {
        let bundle = generate_frame(cfg, frame_index);
        let name = format!("{}.txt", bundle.frame);
        kitti::write_label_file(&bundle.gts, &label_dir.join(&name))?;
        kitti::write_detection_file(&bundle.lidar, &lidar_dir.join(&name))?;
        kitti::write_detection_file(&bundle.camera, &camera_dir.join(&name))?;
        if let Some(cam2) = &bundle.camera2 {
            kitti::write_detection_file(cam2, &camera2_dir.join(&name))?;
        }
        meta.push((bundle.frame, cfg.dims()));
    }
    kitti::write_frame_meta(&meta, &out_dir.join("frame_meta.txt"))?;

    let echo = toml::to_string_pretty(cfg).expect("config serialization cannot fail");
    let echo_path = out_dir.join("synth_config.toml");
    fs::write(&echo_path, echo).map_err(|e| io(&echo_path, e))?;
    Ok(())
}
