//! KITTI-style 2D evaluation: greedy detection-to-ground-truth matching with
//! ignore rules, pooled precision-recall curves, 11- and 40-point
//! interpolated AP per difficulty band, TP/FP tables, and confidence-band
//! histograms.
//!
//! Matching is greedy in score order, exactly the scheme the dataset's AP
//! numbers rest on: a detection claims the highest-IoU unclaimed ground truth
//! at the overlap threshold; detections on out-of-band ground truth, "Van"
//! boxes (for car evaluation), or DontCare regions are ignored rather than
//! penalized; duplicates on an already-claimed ground truth are false
//! positives.

use crate::kitti::{
    self, assign_difficulty, ClassFilter, Detection, Difficulty, FrameId, GroundTruthObject,
    KittiError, Modality,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Kitti(#[from] KittiError),
    #[error("no ground truth in the {0} band: recall is undefined")]
    NoGroundTruth(Difficulty),
    #[error("detections for frame {0} have no ground-truth file")]
    MissingGroundTruth(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report file {path}: {message}")]
    Report { path: PathBuf, message: String },
}

/// Matching thresholds and ignore policy.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Overlap needed to claim a ground-truth box (dataset standard 0.7).
    pub iou_thresh: f64,
    /// Overlap with a DontCare region that suppresses a detection.
    pub dontcare_iou: f64,
    pub class: ClassFilter,
    /// Treat "Van" ground truth as ignorable during car evaluation.
    pub van_ignored: bool,
    /// Detections below this score are dropped from TP/FP tables and band
    /// histograms (the PR curve always uses the full ranking).
    pub score_floor: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresh: 0.7,
            dontcare_iou: 0.5,
            class: ClassFilter::car(),
            van_ignored: true,
            score_floor: 0.0,
        }
    }
}

/// Verdict for one detection within a frame and difficulty band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetOutcome {
    Tp,
    Fp,
    /// Neither rewarded nor penalized; excluded from every count.
    Ignored,
}

/// One frame's detections and ground truth, aligned for evaluation.
#[derive(Debug, Clone)]
pub struct EvalFrame {
    pub frame: FrameId,
    pub dets: Vec<Detection>,
    pub gts: Vec<GroundTruthObject>,
}

/// Count ground truth of the evaluated class inside a difficulty pool.
pub fn band_gt_count(frames: &[EvalFrame], difficulty: Difficulty, cfg: &EvalConfig) -> u64 {
    frames
        .iter()
        .flat_map(|f| f.gts.iter())
        .filter(|g| {
            cfg.class.matches(&g.class_name) && difficulty.pool_contains(assign_difficulty(g))
        })
        .count() as u64
}

/// Greedy per-frame matching. Detections are ranked by score (descending,
/// input order as tiebreak); outcomes are returned in input order.
pub fn match_for_eval(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    difficulty: Difficulty,
    cfg: &EvalConfig,
) -> Vec<DetOutcome> {
    let mut counted: Vec<&GroundTruthObject> = Vec::new();
    let mut ignorable: Vec<&GroundTruthObject> = Vec::new();
    let mut dont_care: Vec<&GroundTruthObject> = Vec::new();
    for g in gts {
        if g.is_dont_care() {
            dont_care.push(g);
        } else if cfg.class.matches(&g.class_name) {
            if difficulty.pool_contains(assign_difficulty(g)) {
                counted.push(g);
            } else {
                ignorable.push(g);
            }
        } else if cfg.van_ignored && cfg.class.is_neighbor(&g.class_name) {
            ignorable.push(g);
        }
    }

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .expect("scores are finite")
            .then(a.cmp(&b))
    });

    let mut claimed = vec![false; counted.len()];
    let mut outcomes = vec![DetOutcome::Fp; dets.len()];
    for det_idx in order {
        let det = &dets[det_idx];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in counted.iter().enumerate() {
            if claimed[gi] {
                continue;
            }
            let iou = det.box2d.iou(&g.box2d);
            if iou >= cfg.iou_thresh && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        let suppressed = || {
            ignorable
                .iter()
                .any(|g| det.box2d.iou(&g.box2d) >= cfg.iou_thresh)
                || dont_care
                    .iter()
                    .any(|g| det.box2d.iou(&g.box2d) >= cfg.dontcare_iou)
        };
        outcomes[det_idx] = if let Some((gi, _)) = best {
            claimed[gi] = true;
            DetOutcome::Tp
        } else if suppressed() {
            DetOutcome::Ignored
        } else {
            DetOutcome::Fp
        };
    }
    outcomes
}

/// One operating point of the pooled precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub score_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_count: u64,
}

/// Cumulative PR points down the score ranking, one per distinct score.
/// `ranked` carries (score, is_tp) for every non-ignored detection in any
/// order; `gt_count` must be positive.
pub fn pr_curve(
    ranked: &[(f64, bool)],
    gt_count: u64,
    difficulty: Difficulty,
) -> Result<Vec<PrPoint>, EvalError> {
    if gt_count == 0 {
        return Err(EvalError::NoGroundTruth(difficulty));
    }
    let mut sorted: Vec<(f64, bool)> = ranked.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            score_threshold: score,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / gt_count as f64,
            tp,
            fp,
            fn_count: gt_count - tp,
        });
    }
    Ok(points)
}

fn interpolated_precision(pr: &[PrPoint], recall_level: f64) -> f64 {
    pr.iter()
        .filter(|p| p.recall >= recall_level)
        .map(|p| p.precision)
        .fold(0.0, f64::max)
}

/// 11-point interpolated AP over recall levels {0, 0.1, …, 1.0}, in percent.
pub fn ap_11(pr: &[PrPoint]) -> f64 {
    let sum: f64 = (0..=10)
        .map(|i| interpolated_precision(pr, f64::from(i) / 10.0))
        .sum();
    sum / 11.0 * 100.0
}

/// 40-point interpolated AP over recall levels {1/40, …, 40/40}, in percent.
pub fn ap_40(pr: &[PrPoint]) -> f64 {
    let sum: f64 = (1..=40)
        .map(|i| interpolated_precision(pr, f64::from(i) / 40.0))
        .sum();
    sum / 40.0 * 100.0
}

/// Pooled (score, is_tp) ranking for a band, ignored detections dropped.
/// `floor` removes detections below the score floor before matching.
fn pooled_ranking(
    frames: &[EvalFrame],
    difficulty: Difficulty,
    cfg: &EvalConfig,
    floor: Option<f64>,
) -> Vec<(f64, bool)> {
    let mut ranked = Vec::new();
    for frame in frames {
        let dets: Vec<Detection> = match floor {
            Some(f) => frame
                .dets
                .iter()
                .filter(|d| d.score >= f)
                .cloned()
                .collect(),
            None => frame.dets.clone(),
        };
        let outcomes = match_for_eval(&dets, &frame.gts, difficulty, cfg);
        for (det, outcome) in dets.iter().zip(outcomes) {
            match outcome {
                DetOutcome::Tp => ranked.push((det.score, true)),
                DetOutcome::Fp => ranked.push((det.score, false)),
                DetOutcome::Ignored => {}
            }
        }
    }
    ranked
}

/// TP/FP counts over detections at or above `score_floor`.
pub fn tp_fp_table(
    frames: &[EvalFrame],
    difficulty: Difficulty,
    score_floor: f64,
    cfg: &EvalConfig,
) -> (u64, u64) {
    let ranked = pooled_ranking(frames, difficulty, cfg, Some(score_floor));
    let tp = ranked.iter().filter(|(_, is_tp)| *is_tp).count() as u64;
    let fp = ranked.len() as u64 - tp;
    (tp, fp)
}

/// TP/FP counts split over ten equal confidence bands. Scores must be in
/// [0, 1]; a score of exactly 1.0 lands in the top bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandHistogram {
    pub tp: [u64; 10],
    pub fp: [u64; 10],
}

impl BandHistogram {
    pub fn totals(&self) -> (u64, u64) {
        (self.tp.iter().sum(), self.fp.iter().sum())
    }
}

pub fn band_histogram(
    frames: &[EvalFrame],
    difficulty: Difficulty,
    cfg: &EvalConfig,
) -> BandHistogram {
    let mut hist = BandHistogram {
        tp: [0; 10],
        fp: [0; 10],
    };
    for (score, is_tp) in pooled_ranking(frames, difficulty, cfg, Some(cfg.score_floor)) {
        let bin = ((score * 10.0).floor() as usize).min(9);
        if is_tp {
            hist.tp[bin] += 1;
        } else {
            hist.fp[bin] += 1;
        }
    }
    hist
}

/// Everything reported for one difficulty band. AP values are percentages,
/// rounded to six decimals for byte-stable output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub difficulty: Difficulty,
    pub gt_count: u64,
    pub tp: u64,
    pub fp: u64,
    pub ap_11: f64,
    pub ap_40: f64,
    pub pr_curve: Vec<PrPoint>,
}

/// Run metadata echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub gt_dir: String,
    pub det_dir: String,
    pub class: String,
    pub iou_thresh: f64,
    pub score_floor: f64,
}

/// The artifact's primary output: per-band AP, TP/FP, and PR curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub meta: ReportMeta,
    pub bands: Vec<BandReport>,
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Evaluate one difficulty band over pooled frames.
pub fn evaluate_band(
    frames: &[EvalFrame],
    difficulty: Difficulty,
    cfg: &EvalConfig,
) -> Result<BandReport, EvalError> {
    let gt_count = band_gt_count(frames, difficulty, cfg);
    if gt_count == 0 {
        return Err(EvalError::NoGroundTruth(difficulty));
    }
    let ranked = pooled_ranking(frames, difficulty, cfg, None);
    let pr = pr_curve(&ranked, gt_count, difficulty)?;
    let (tp, fp) = tp_fp_table(frames, difficulty, cfg.score_floor, cfg);
    Ok(BandReport {
        difficulty,
        gt_count,
        tp,
        fp,
        ap_11: round6(ap_11(&pr)),
        ap_40: round6(ap_40(&pr)),
        pr_curve: pr
            .into_iter()
            .map(|p| PrPoint {
                score_threshold: round6(p.score_threshold),
                precision: round6(p.precision),
                recall: round6(p.recall),
                ..p
            })
            .collect(),
    })
}

/// Load aligned (ground truth, detections) frames from two directories.
/// Every ground-truth frame participates; a missing detection file means an
/// empty detection list, while detections without ground truth are an error.
pub fn load_eval_frames(
    gt_dir: &Path,
    det_dir: &Path,
    class: &ClassFilter,
) -> Result<Vec<EvalFrame>, EvalError> {
    let gt_frames = kitti::list_frame_files(gt_dir)?;
    let det_frames = kitti::list_frame_files(det_dir)?;
    for (frame, _) in &det_frames {
        if !gt_dir.join(format!("{frame}.txt")).exists() {
            return Err(EvalError::MissingGroundTruth(frame.to_string()));
        }
    }
    let mut frames = Vec::with_capacity(gt_frames.len());
    for (frame, gt_path) in gt_frames {
        let gts = kitti::parse_label_file(&gt_path)?;
        let det_path = det_dir.join(format!("{frame}.txt"));
        let dets = if det_path.exists() {
            let mut dets = kitti::parse_detection_file(&det_path, Modality::Lidar)?;
            dets.retain(|d| class.matches(&d.class_name));
            kitti::rescale_scores(&mut dets);
            dets
        } else {
            Vec::new()
        };
        frames.push(EvalFrame { frame, dets, gts });
    }
    Ok(frames)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Write the report: JSON carries everything; CSV carries the PR points
/// (band, threshold, precision, recall, tp, fp, fn), one line per point.
pub fn emit_report(report: &ApReport, path: &Path, format: ReportFormat) -> Result<(), EvalError> {
    let out = match format {
        ReportFormat::Json => {
            serde_json::to_string_pretty(report).expect("report serialization cannot fail") + "\n"
        }
        ReportFormat::Csv => {
            let mut s = String::from("band,score_threshold,precision,recall,tp,fp,fn\n");
            for band in &report.bands {
                for p in &band.pr_curve {
                    s.push_str(&format!(
                        "{},{:.6},{:.6},{:.6},{},{},{}\n",
                        band.difficulty, p.score_threshold, p.precision, p.recall, p.tp, p.fp,
                        p.fn_count
                    ));
                }
            }
            s
        }
    };
    fs::write(path, out).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn load_report(path: &Path) -> Result<ApReport, EvalError> {
    let content = fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&content).map_err(|e| EvalError::Report {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Band-histogram CSV: ten rows of `band_low,band_high,tp,fp`.
pub fn write_band_histogram_csv(hist: &BandHistogram, path: &Path) -> Result<(), EvalError> {
    let mut out = String::from("band_low,band_high,tp,fp\n");
    for i in 0..10 {
        out.push_str(&format!(
            "{:.1},{:.1},{},{}\n",
            i as f64 / 10.0,
            (i + 1) as f64 / 10.0,
            hist.tp[i],
            hist.fp[i]
        ));
    }
    fs::write(path, out).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
