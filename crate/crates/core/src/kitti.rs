//! KITTI-format ground-truth and detection files: parsing, writing,
//! difficulty bands, and per-frame image dimensions.
//!
//! Only the 2D fields are interpreted. The seven 3D fields (dimensions,
//! location, rotation) are carried as opaque reals so files round-trip;
//! detections written without 3D information get the usual -1 / -1000
//! placeholders.

use crate::geometry::{Box2D, ImageDims};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Dominant KITTI image size, used when no frame-meta file is supplied.
pub const DEFAULT_IMAGE_DIMS: (u32, u32) = (1242, 375);

#[derive(Debug, Error)]
pub enum KittiError {
    #[error("{path}:{line}: {message}")]
    Parse {
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
    #[error("invalid frame id {0:?}: must be a non-negative integer")]
    InvalidFrameId(String),
    #[error("duplicate frame {0} in frame-meta file")]
    DuplicateFrame(String),
    #[error("no image dimensions for frame {0} and no default configured")]
    MissingFrameMeta(String),
    #[error("detections for write span multiple frames ({0} vs {1})")]
    MixedFrames(String, String),
}

fn io_err(path: &Path, source: std::io::Error) -> KittiError {
    KittiError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Zero-padded numeric frame identifier ("000042"). Ordering is numeric,
/// with the literal text as tiebreak so distinct paddings stay distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameId(String);

impl FrameId {
    pub fn new(text: &str) -> Result<Self, KittiError> {
        if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(KittiError::InvalidFrameId(text.to_string()));
        }
        Ok(Self(text.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn value(&self) -> u64 {
        // all-digit invariant; saturate rather than panic on absurd lengths
        self.0.parse().unwrap_or(u64::MAX)
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Ord for FrameId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.value()
            .cmp(&other.value())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for FrameId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Modality {
    Lidar,
    Camera,
    Camera2,
}

/// One line of a KITTI label file.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub class_name: String,
    /// Fraction of the object outside image bounds, in [0, 1].
    pub truncation: f64,
    /// 0 fully visible, 1 partly occluded, 2 largely occluded, 3 unknown.
    pub occlusion: u8,
    /// Observation angle, retained but unused here.
    pub alpha: f64,
    pub box2d: Box2D,
    /// dims3d (3), loc3d (3), rotation_y — opaque pass-through.
    pub extras3d: [f64; 7],
}

impl GroundTruthObject {
    pub fn is_dont_care(&self) -> bool {
        self.class_name.eq_ignore_ascii_case("DontCare")
    }
}

/// One detector output box.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class_name: String,
    pub box2d: Box2D,
    pub score: f64,
    pub modality: Modality,
    pub frame: FrameId,
    /// truncation, occlusion, alpha as they appeared in the file
    /// (placeholders for synthetic detections), retained for round-trips.
    pub truncation: f64,
    pub occlusion: f64,
    pub alpha: f64,
    pub extras3d: [f64; 7],
}

impl Detection {
    /// Detection with placeholder pass-through fields.
    pub fn new(
        class_name: impl Into<String>,
        box2d: Box2D,
        score: f64,
        modality: Modality,
        frame: FrameId,
    ) -> Self {
        Self {
            class_name: class_name.into(),
            box2d,
            score,
            modality,
            frame,
            truncation: -1.0,
            occlusion: -1.0,
            alpha: -10.0,
            extras3d: PLACEHOLDER_3D,
        }
    }
}

/// KITTI placeholder values for the seven unused 3D fields.
pub const PLACEHOLDER_3D: [f64; 7] = [-1.0, -1.0, -1.0, -1000.0, -1000.0, -1000.0, -10.0];

/// KITTI difficulty band assigned to a ground-truth object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
    Ignored,
}

impl Difficulty {
    /// True when an object assigned `assigned` belongs to the evaluation pool
    /// of this band. Pools are cumulative: the HARD pool also contains EASY
    /// and MODERATE objects.
    pub fn pool_contains(self, assigned: Difficulty) -> bool {
        let rank = |d: Difficulty| match d {
            Difficulty::Easy => 0u8,
            Difficulty::Moderate => 1,
            Difficulty::Hard => 2,
            Difficulty::Ignored => 3,
        };
        rank(assigned) <= rank(self) && self != Difficulty::Ignored
    }

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "EASY",
            Difficulty::Moderate => "MODERATE",
            Difficulty::Hard => "HARD",
            Difficulty::Ignored => "IGNORED",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// KITTI devkit band thresholds: minimum box height (px), maximum occlusion
/// level, maximum truncation.
pub fn assign_difficulty(gt: &GroundTruthObject) -> Difficulty {
    let h = gt.box2d.height();
    let occ = gt.occlusion;
    let trunc = gt.truncation;
    if h >= 40.0 && occ == 0 && trunc <= 0.15 {
        Difficulty::Easy
    } else if h >= 25.0 && occ <= 1 && trunc <= 0.30 {
        Difficulty::Moderate
    } else if h >= 25.0 && occ <= 2 && trunc <= 0.50 {
        Difficulty::Hard
    } else {
        Difficulty::Ignored
    }
}

/// Case-insensitive class selector. Evaluation and fusion default to "Car";
/// "Van" ground truth is ignored-not-penalized for car evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassFilter {
    class: String,
}

impl ClassFilter {
    pub fn new(class: impl Into<String>) -> Self {
        Self {
            class: class.into(),
        }
    }

    pub fn car() -> Self {
        Self::new("Car")
    }

    pub fn class(&self) -> &str {
        &self.class
    }

    pub fn matches(&self, name: &str) -> bool {
        self.class.eq_ignore_ascii_case(name)
    }

    /// Neighboring class whose ground truth is ignorable rather than penalized.
    pub fn is_neighbor(&self, name: &str) -> bool {
        self.matches("Car") && name.eq_ignore_ascii_case("Van")
    }
}

impl Default for ClassFilter {
    fn default() -> Self {
        Self::car()
    }
}

fn parse_f64(tok: &str, path: &Path, line: usize, field: &str) -> Result<f64, KittiError> {
    tok.parse::<f64>().map_err(|_| KittiError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("field {field}: {tok:?} is not a number"),
    })
}

/// The 15 label fields of one line, before GT/detection interpretation.
struct ObjectFields {
    class_name: String,
    truncation: f64,
    occlusion: f64,
    alpha: f64,
    box2d: Box2D,
    extras3d: [f64; 7],
}

fn parse_object_fields(
    fields: &[&str],
    path: &Path,
    line: usize,
) -> Result<ObjectFields, KittiError> {
    let class_name = fields[0].to_string();
    let truncation = parse_f64(fields[1], path, line, "truncated")?;
    let occlusion = parse_f64(fields[2], path, line, "occluded")?;
    let alpha = parse_f64(fields[3], path, line, "alpha")?;
    let x_min = parse_f64(fields[4], path, line, "bbox left")?;
    let y_min = parse_f64(fields[5], path, line, "bbox top")?;
    let x_max = parse_f64(fields[6], path, line, "bbox right")?;
    let y_max = parse_f64(fields[7], path, line, "bbox bottom")?;
    let box2d = Box2D::new(x_min, y_min, x_max, y_max).map_err(|e| KittiError::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })?;
    let mut extras3d = [0.0; 7];
    for (i, slot) in extras3d.iter_mut().enumerate() {
        *slot = parse_f64(fields[8 + i], path, line, "3d")?;
    }
    Ok(ObjectFields {
        class_name,
        truncation,
        occlusion,
        alpha,
        box2d,
        extras3d,
    })
}

/// Parse a KITTI label file: 15 whitespace-separated fields per line.
/// "DontCare" lines are retained. Empty lines are skipped.
pub fn parse_label_file(path: &Path) -> Result<Vec<GroundTruthObject>, KittiError> {
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut objects = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() < 15 {
            return Err(KittiError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected >= 15 fields, found {}", fields.len()),
            });
        }
        let f = parse_object_fields(&fields, path, line)?;
        // DontCare rows carry -1 markers; fold them into the valid ranges.
        let truncation = if f.truncation < 0.0 { 0.0 } else { f.truncation };
        if truncation > 1.0 {
            return Err(KittiError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("truncation {truncation} outside [0, 1]"),
            });
        }
        let occlusion = if f.occlusion < 0.0 {
            3 // unknown
        } else if f.occlusion <= 3.0 && f.occlusion.fract() == 0.0 {
            f.occlusion as u8
        } else {
            return Err(KittiError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("occlusion {} not in {{0,1,2,3}}", f.occlusion),
            });
        };
        objects.push(GroundTruthObject {
            class_name: f.class_name,
            truncation,
            occlusion,
            alpha: f.alpha,
            box2d: f.box2d,
            extras3d: f.extras3d,
        });
    }
    Ok(objects)
}

/// Parse a KITTI detection file: label fields plus a trailing score (16
/// fields). The frame id is taken from the file stem.
pub fn parse_detection_file(path: &Path, modality: Modality) -> Result<Vec<Detection>, KittiError> {
    let frame = frame_from_path(path)?;
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut detections = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() < 16 {
            return Err(KittiError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected >= 16 fields (15 + score), found {}", fields.len()),
            });
        }
        let f = parse_object_fields(&fields, path, line)?;
        let score = parse_f64(fields[15], path, line, "score")?;
        if !score.is_finite() {
            return Err(KittiError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("score {score} is not finite"),
            });
        }
        detections.push(Detection {
            class_name: f.class_name,
            box2d: f.box2d,
            score,
            modality,
            frame: frame.clone(),
            truncation: f.truncation,
            occlusion: f.occlusion,
            alpha: f.alpha,
            extras3d: f.extras3d,
        });
    }
    Ok(detections)
}

/// Frame id from a detection/label file path ("000123.txt" -> 000123).
pub fn frame_from_path(path: &Path) -> Result<FrameId, KittiError> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| KittiError::InvalidFrameId(path.display().to_string()))?;
    FrameId::new(stem)
}

/// Min-max rescale scores into [0, 1] when any score leaves that range,
/// applied per file. Files already in range are left untouched so detector
/// probabilities survive verbatim.
pub fn rescale_scores(dets: &mut [Detection]) {
    if dets.is_empty() {
        return;
    }
    let lo = dets.iter().map(|d| d.score).fold(f64::INFINITY, f64::min);
    let hi = dets
        .iter()
        .map(|d| d.score)
        .fold(f64::NEG_INFINITY, f64::max);
    if lo >= 0.0 && hi <= 1.0 {
        return;
    }
    let span = hi - lo;
    for d in dets.iter_mut() {
        d.score = if span > 0.0 { (d.score - lo) / span } else { 0.5 };
    }
}

/// One KITTI 16-field result line (no trailing newline).
pub fn format_detection_line(d: &Detection) -> String {
    let e = &d.extras3d;
    format!(
        "{} {:.2} {:.2} {:.2} {:.6} {:.6} {:.6} {:.6} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.6}",
        d.class_name,
        d.truncation,
        d.occlusion,
        d.alpha,
        d.box2d.x_min(),
        d.box2d.y_min(),
        d.box2d.x_max(),
        d.box2d.y_max(),
        e[0], e[1], e[2], e[3], e[4], e[5], e[6],
        d.score,
    )
}

/// Write one frame's detections as KITTI 16-field lines. All detections must
/// share a frame; an empty list produces an empty file.
pub fn write_detection_file(dets: &[Detection], path: &Path) -> Result<(), KittiError> {
    if let Some(first) = dets.first() {
        for d in dets {
            if d.frame != first.frame {
                return Err(KittiError::MixedFrames(
                    first.frame.to_string(),
                    d.frame.to_string(),
                ));
            }
        }
    }
    let mut out = String::new();
    for d in dets {
        out.push_str(&format_detection_line(d));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Write a KITTI label file (15 fields per line).
pub fn write_label_file(gts: &[GroundTruthObject], path: &Path) -> Result<(), KittiError> {
    let mut out = String::new();
    for g in gts {
        let e = &g.extras3d;
        out.push_str(&format!(
            "{} {:.2} {} {:.2} {:.6} {:.6} {:.6} {:.6} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2}\n",
            g.class_name,
            g.truncation,
            g.occlusion,
            g.alpha,
            g.box2d.x_min(),
            g.box2d.y_min(),
            g.box2d.x_max(),
            g.box2d.y_max(),
            e[0], e[1], e[2], e[3], e[4], e[5], e[6],
        ));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Per-frame image dimensions with an optional fallback for absent frames.
#[derive(Debug, Clone)]
pub struct FrameMetaMap {
    entries: BTreeMap<FrameId, ImageDims>,
    default: Option<ImageDims>,
}

impl FrameMetaMap {
    /// Load a `frame width height` whitespace table.
    pub fn load(path: &Path, default: Option<ImageDims>) -> Result<Self, KittiError> {
        let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut entries = BTreeMap::new();
        for (idx, raw) in content.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.len() < 3 {
                return Err(KittiError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected `frame width height`, found {} fields", fields.len()),
                });
            }
            let frame = FrameId::new(fields[0])?;
            let parse_dim = |tok: &str| -> Result<u32, KittiError> {
                tok.parse::<u32>().map_err(|_| KittiError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("dimension {tok:?} is not a non-negative integer"),
                })
            };
            let width = parse_dim(fields[1])?;
            let height = parse_dim(fields[2])?;
            let dims = ImageDims::new(width, height).map_err(|e| KittiError::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            if entries.insert(frame.clone(), dims).is_some() {
                return Err(KittiError::DuplicateFrame(frame.to_string()));
            }
        }
        Ok(Self { entries, default })
    }

    /// Map with no per-frame entries; every lookup resolves to `dims`.
    pub fn with_default(dims: ImageDims) -> Self {
        Self {
            entries: BTreeMap::new(),
            default: Some(dims),
        }
    }

    pub fn kitti_default() -> Self {
        let (w, h) = DEFAULT_IMAGE_DIMS;
        Self::with_default(ImageDims::new(w, h).expect("constant dims"))
    }

    pub fn get(&self, frame: &FrameId) -> Result<ImageDims, KittiError> {
        self.entries
            .get(frame)
            .copied()
            .or(self.default)
            .ok_or_else(|| KittiError::MissingFrameMeta(frame.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Write a frame-meta table matching [`FrameMetaMap::load`].
pub fn write_frame_meta(
    entries: &[(FrameId, ImageDims)],
    path: &Path,
) -> Result<(), KittiError> {
    let mut out = String::new();
    for (frame, dims) in entries {
        out.push_str(&format!("{} {} {}\n", frame, dims.width(), dims.height()));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Enumerate `<frame>.txt` files in a directory, sorted by frame id.
pub fn list_frame_files(dir: &Path) -> Result<Vec<(FrameId, PathBuf)>, KittiError> {
    let mut frames = Vec::new();
    let rd = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    for entry in rd {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let frame = frame_from_path(&path)?;
        frames.push((frame, path));
    }
    frames.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(frames)
}
