//! Associate camera detections with LiDAR detections, build the verifier's
//! input vectors, and label samples against ground truth.
//!
//! Every LiDAR detection becomes exactly one sample; a missing camera match
//! zero-fills its slots. Labels come from ground-truth overlap at the
//! dataset's standard 0.7 threshold.

use crate::geometry::{normalize, ImageDims};
use crate::kitti::{
    self, ClassFilter, Detection, FrameId, FrameMetaMap, GroundTruthObject, KittiError, Modality,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error(transparent)]
    Kitti(#[from] KittiError),
    #[error("invalid match config: {0}")]
    InvalidConfig(String),
    #[error("frame {0} has LiDAR detections but no ground-truth file")]
    MissingGroundTruth(String),
    #[error("need at least 2 frames to split, found {0}")]
    TooFewFrames(usize),
    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("expected 1 or 2 camera sources, got {0}")]
    BadCameraCount(usize),
    #[error("inconsistent feature layout: expected {expected} values, found {found}")]
    LayoutMismatch { expected: usize, found: usize },
}

/// Width of the verifier input: one camera (11 values) or two (17).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureLayout {
    Single11,
    Dual17,
}

#[allow(clippy::len_without_is_empty)] // a layout always has a fixed width
impl FeatureLayout {
    pub fn len(self) -> usize {
        match self {
            FeatureLayout::Single11 => 11,
            FeatureLayout::Dual17 => 17,
        }
    }

    pub fn for_camera_count(count: usize) -> Result<Self, MatchError> {
        match count {
            1 => Ok(FeatureLayout::Single11),
            2 => Ok(FeatureLayout::Dual17),
            n => Err(MatchError::BadCameraCount(n)),
        }
    }

    pub fn from_len(len: usize) -> Result<Self, MatchError> {
        match len {
            11 => Ok(FeatureLayout::Single11),
            17 => Ok(FeatureLayout::Dual17),
            n => Err(MatchError::LayoutMismatch {
                expected: 11,
                found: n,
            }),
        }
    }
}

/// Ordered verifier input:
/// `[L.cx, L.cy, L.w, L.h, C.cx, C.cy, C.w, C.h, S_L, S_C, IoU_LC]`,
/// extended by `[C2.cx, C2.cy, C2.w, C2.h, S_C2, IoU_LC2]` in dual mode.
/// Slots of an absent camera match are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn from_values(values: Vec<f64>) -> Result<Self, MatchError> {
        FeatureLayout::from_len(values.len())?;
        Ok(Self { values })
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::from_len(self.values.len()).expect("length enforced at construction")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One labeled verifier sample with provenance back to its LiDAR detection.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub features: FeatureVector,
    pub label: bool,
    pub frame: FrameId,
    pub lidar_index: usize,
}

/// Matching thresholds. The open-vocabulary threshold is lower because those
/// boxes are looser; the ground-truth threshold follows the dataset standard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub tau_match: f64,
    pub tau_match_openvocab: f64,
    pub tau_gt: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            tau_match: 0.5,
            tau_match_openvocab: 0.3,
            tau_gt: 0.7,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(0.0..=1.0).contains(&self.tau_match_openvocab)
            || !(0.0..=1.0).contains(&self.tau_match)
            || self.tau_match_openvocab > self.tau_match
        {
            return Err(MatchError::InvalidConfig(format!(
                "need 0 <= tau_match_openvocab <= tau_match <= 1, got {} and {}",
                self.tau_match_openvocab, self.tau_match
            )));
        }
        if !(self.tau_gt > 0.0 && self.tau_gt <= 1.0) {
            return Err(MatchError::InvalidConfig(format!(
                "tau_gt must be in (0, 1], got {}",
                self.tau_gt
            )));
        }
        Ok(())
    }
}

/// Index and overlap of the camera detection selected for a LiDAR box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraMatch {
    pub index: usize,
    pub iou: f64,
}

/// Pick the camera detection with maximum IoU against the LiDAR box, if that
/// IoU reaches `tau`. Ties resolve by higher camera score, then lower index,
/// so the result is independent of any reordering of equal candidates.
pub fn match_camera(lidar: &Detection, cams: &[Detection], tau: f64) -> Option<CameraMatch> {
    let mut best: Option<(f64, f64, usize)> = None; // (iou, score, index)
    for (index, cam) in cams.iter().enumerate() {
        let iou = lidar.box2d.iou(&cam.box2d);
        if iou < tau {
            continue;
        }
        let candidate = (iou, cam.score, index);
        best = Some(match best {
            None => candidate,
            Some(cur) => {
                if candidate.0 > cur.0 || (candidate.0 == cur.0 && candidate.1 > cur.1) {
                    candidate
                } else {
                    cur
                }
            }
        });
    }
    best.map(|(iou, _, index)| CameraMatch { index, iou })
}

/// A matched camera detection paired with its overlap, as consumed by
/// [`build_feature_vector`].
pub type MatchedCamera<'a> = (&'a Detection, f64);

/// Assemble the feature vector in its documented order; `second` is only
/// meaningful in dual layout and absent matches zero-fill their slots.
pub fn build_feature_vector(
    lidar: &Detection,
    first: Option<MatchedCamera<'_>>,
    second: Option<MatchedCamera<'_>>,
    dims: ImageDims,
    layout: FeatureLayout,
) -> FeatureVector {
    let mut values = Vec::with_capacity(layout.len());
    let l = normalize(&lidar.box2d, dims);
    values.extend_from_slice(&[l.cx(), l.cy(), l.w(), l.h()]);
    push_camera_slots(&mut values, first, dims, lidar.score);
    if layout == FeatureLayout::Dual17 {
        push_camera_slots2(&mut values, second, dims);
    }
    FeatureVector { values }
}

fn push_camera_slots(
    values: &mut Vec<f64>,
    cam: Option<MatchedCamera<'_>>,
    dims: ImageDims,
    lidar_score: f64,
) {
    match cam {
        Some((det, iou)) => {
            let c = normalize(&det.box2d, dims);
            values.extend_from_slice(&[c.cx(), c.cy(), c.w(), c.h(), lidar_score, det.score, iou]);
        }
        None => {
            values.extend_from_slice(&[0.0, 0.0, 0.0, 0.0, lidar_score, 0.0, 0.0]);
        }
    }
}

fn push_camera_slots2(values: &mut Vec<f64>, cam: Option<MatchedCamera<'_>>, dims: ImageDims) {
    match cam {
        Some((det, iou)) => {
            let c = normalize(&det.box2d, dims);
            values.extend_from_slice(&[c.cx(), c.cy(), c.w(), c.h(), det.score, iou]);
        }
        None => values.extend_from_slice(&[0.0; 6]),
    }
}

/// 1 when the LiDAR box overlaps any ground-truth object at `tau_gt` or
/// better (inclusive). Callers pass ground truth already filtered to the
/// evaluated class with DontCare removed.
pub fn label_sample(lidar: &Detection, gts: &[GroundTruthObject], tau_gt: f64) -> bool {
    gts.iter().any(|g| lidar.box2d.iou(&g.box2d) >= tau_gt)
}

/// One camera detection directory plus whether it came from an
/// open-vocabulary model (which selects the lower matching threshold).
#[derive(Debug, Clone)]
pub struct CameraSource {
    pub dir: PathBuf,
    pub open_vocab: bool,
}

impl CameraSource {
    pub fn new(dir: impl Into<PathBuf>, open_vocab: bool) -> Self {
        Self {
            dir: dir.into(),
            open_vocab,
        }
    }

    fn tau(&self, cfg: &MatchConfig) -> f64 {
        if self.open_vocab {
            cfg.tau_match_openvocab
        } else {
            cfg.tau_match
        }
    }
}

/// Camera detections for one frame from every source, class-filtered and
/// per-file score-rescaled. A missing file yields an empty list so the
/// frame's samples zero-fill those slots.
pub fn load_camera_detections(
    cameras: &[CameraSource],
    frame: &FrameId,
    filter: &ClassFilter,
) -> Result<Vec<Vec<Detection>>, MatchError> {
    cameras
        .iter()
        .enumerate()
        .map(|(i, source)| {
            let modality = if i == 0 {
                Modality::Camera
            } else {
                Modality::Camera2
            };
            let path = source.dir.join(format!("{frame}.txt"));
            if !path.exists() {
                return Ok(Vec::new());
            }
            let mut dets = kitti::parse_detection_file(&path, modality)?;
            dets.retain(|d| filter.matches(&d.class_name));
            kitti::rescale_scores(&mut dets);
            Ok(dets)
        })
        .collect()
}

/// Feature vectors for one frame's LiDAR detections (already class-filtered
/// and rescaled), matched against pre-loaded camera detections. `cams` must
/// align with `sources`; the layout follows the source count.
pub fn build_frame_features(
    lidar: &[Detection],
    cams: &[Vec<Detection>],
    sources: &[CameraSource],
    dims: ImageDims,
    cfg: &MatchConfig,
) -> Result<Vec<FeatureVector>, MatchError> {
    let layout = FeatureLayout::for_camera_count(sources.len())?;
    Ok(lidar
        .iter()
        .map(|det| {
            let m1 = match_camera(det, &cams[0], sources[0].tau(cfg))
                .map(|m| (&cams[0][m.index], m.iou));
            let m2 = sources.get(1).and_then(|src| {
                match_camera(det, &cams[1], src.tau(cfg)).map(|m| (&cams[1][m.index], m.iou))
            });
            build_feature_vector(det, m1, m2, dims, layout)
        })
        .collect())
}

fn samples_for_frame(
    frame: &FrameId,
    lidar_path: &Path,
    cameras: &[CameraSource],
    gt_dir: &Path,
    meta: &FrameMetaMap,
    cfg: &MatchConfig,
    filter: &ClassFilter,
) -> Result<Vec<TrainingSample>, MatchError> {
    let gt_path = gt_dir.join(format!("{frame}.txt"));
    if !gt_path.exists() {
        return Err(MatchError::MissingGroundTruth(frame.to_string()));
    }
    let gts: Vec<GroundTruthObject> = kitti::parse_label_file(&gt_path)?
        .into_iter()
        .filter(|g| !g.is_dont_care() && filter.matches(&g.class_name))
        .collect();

    let mut lidar = kitti::parse_detection_file(lidar_path, Modality::Lidar)?;
    lidar.retain(|d| filter.matches(&d.class_name));
    kitti::rescale_scores(&mut lidar);

    let cams = load_camera_detections(cameras, frame, filter)?;
    let dims = meta.get(frame)?;
    let features = build_frame_features(&lidar, &cams, cameras, dims, cfg)?;

    Ok(lidar
        .iter()
        .zip(features)
        .enumerate()
        .map(|(lidar_index, (det, features))| TrainingSample {
            features,
            label: label_sample(det, &gts, cfg.tau_gt),
            frame: frame.clone(),
            lidar_index,
        })
        .collect())
}

/// Build one sample per LiDAR detection across all frames of `lidar_dir`.
/// Output order is deterministic: frame ascending, then detection file order.
/// A frame without a ground-truth file is an error (the sample could not be
/// labeled); a frame without a camera file just zero-fills camera slots.
pub fn build_dataset(
    lidar_dir: &Path,
    cameras: &[CameraSource],
    gt_dir: &Path,
    meta: &FrameMetaMap,
    cfg: &MatchConfig,
    filter: &ClassFilter,
) -> Result<Vec<TrainingSample>, MatchError> {
    cfg.validate()?;
    FeatureLayout::for_camera_count(cameras.len())?;
    let frames = kitti::list_frame_files(lidar_dir)?;
    let mut per_frame: Vec<(FrameId, Vec<TrainingSample>)> = frames
        .par_iter()
        .map(|(frame, path)| {
            samples_for_frame(frame, path, cameras, gt_dir, meta, cfg, filter)
                .map(|s| (frame.clone(), s))
        })
        .collect::<Result<_, _>>()?;
    per_frame.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(per_frame.into_iter().flat_map(|(_, s)| s).collect())
}

/// Split frames into disjoint train/test sets; deterministic per seed, and
/// both sides are returned sorted. Each side gets at least one frame.
pub fn split_frames(
    frames: &[FrameId],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<FrameId>, Vec<FrameId>), MatchError> {
    if frames.len() < 2 {
        return Err(MatchError::TooFewFrames(frames.len()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(MatchError::InvalidConfig(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..frames.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n = frames.len();
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let mut train: Vec<FrameId> = order[..n_train].iter().map(|&i| frames[i].clone()).collect();
    let mut test: Vec<FrameId> = order[n_train..].iter().map(|&i| frames[i].clone()).collect();
    train.sort();
    test.sort();
    Ok((train, test))
}

const SINGLE_HEADER: [&str; 11] = [
    "l_cx", "l_cy", "l_w", "l_h", "c_cx", "c_cy", "c_w", "c_h", "s_l", "s_c", "iou_lc",
];
const DUAL_EXTRA_HEADER: [&str; 6] = ["c2_cx", "c2_cy", "c2_w", "c2_h", "s_c2", "iou_lc2"];

/// Write samples as a headered CSV: `frame,lidar_index,<features...>,label`.
/// Feature values use the shortest round-trip decimal form, so reading the
/// file back reproduces them bit-exactly.
pub fn write_feature_csv(samples: &[TrainingSample], path: &Path) -> Result<(), MatchError> {
    let layout = samples
        .first()
        .map(|s| s.features.layout())
        .unwrap_or(FeatureLayout::Single11);
    let mut out = String::from("frame,lidar_index");
    for name in SINGLE_HEADER {
        out.push(',');
        out.push_str(name);
    }
    if layout == FeatureLayout::Dual17 {
        for name in DUAL_EXTRA_HEADER {
            out.push(',');
            out.push_str(name);
        }
    }
    out.push_str(",label\n");
    for s in samples {
        if s.features.layout() != layout {
            return Err(MatchError::LayoutMismatch {
                expected: layout.len(),
                found: s.features.len(),
            });
        }
        out.push_str(s.frame.as_str());
        out.push(',');
        out.push_str(&s.lidar_index.to_string());
        for v in s.features.values() {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push(',');
        out.push(if s.label { '1' } else { '0' });
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| MatchError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// A parsed feature CSV. The layout comes from the header, so it is known
/// even when the file carries no data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCsv {
    pub layout: FeatureLayout,
    pub samples: Vec<TrainingSample>,
}

/// Read a feature CSV produced by [`write_feature_csv`].
pub fn read_feature_csv(path: &Path) -> Result<FeatureCsv, MatchError> {
    let content = fs::read_to_string(path).map_err(|e| MatchError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let csv_err = |line: usize, message: String| MatchError::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_err(1, "empty file".into()))?;
    let n_cols = header.split(',').count();
    let n_features = n_cols
        .checked_sub(3)
        .ok_or_else(|| csv_err(1, format!("header has only {n_cols} columns")))?;
    let layout = FeatureLayout::from_len(n_features)
        .map_err(|_| csv_err(1, format!("{n_features} feature columns is not a known layout")))?;

    let mut samples = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != n_cols {
            return Err(csv_err(
                line,
                format!("expected {n_cols} columns, found {}", fields.len()),
            ));
        }
        let frame = FrameId::new(fields[0]).map_err(|e| csv_err(line, e.to_string()))?;
        let lidar_index: usize = fields[1]
            .parse()
            .map_err(|_| csv_err(line, format!("bad lidar_index {:?}", fields[1])))?;
        let mut values = Vec::with_capacity(n_features);
        for tok in &fields[2..2 + n_features] {
            let v: f64 = tok
                .parse()
                .map_err(|_| csv_err(line, format!("bad feature value {tok:?}")))?;
            values.push(v);
        }
        let label = match fields[n_cols - 1] {
            "0" => false,
            "1" => true,
            other => return Err(csv_err(line, format!("bad label {other:?}"))),
        };
        samples.push(TrainingSample {
            features: FeatureVector { values },
            label,
            frame,
            lidar_index,
        });
    }
    Ok(FeatureCsv { layout, samples })
}
