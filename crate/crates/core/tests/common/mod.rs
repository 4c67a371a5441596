//! Independent oracles and pipeline helpers shared by the integration tests.
//!
//! Everything here deliberately avoids the implementation paths it checks:
//! IoU is recomputed by integer arithmetic and by rasterization, gradients by
//! central finite differences on the public loss, and AP by re-counting
//! TP/FP from scratch at every distinct score threshold.

#![allow(dead_code)]

use latefuse::geometry::Box2D;
use latefuse::matching::FeatureVector;
use latefuse::verifier::{forward, weighted_bce, MlpModel};
use std::path::{Path, PathBuf};
use std::process::Command;

/// IoU of two integer-coordinate boxes via pure integer overlap arithmetic.
pub fn integer_iou(a: [i64; 4], b: [i64; 4]) -> f64 {
    let ow = (a[2].min(b[2]) - a[0].max(b[0])).max(0);
    let oh = (a[3].min(b[3]) - a[1].max(b[1])).max(0);
    let inter = ow * oh;
    let area_a = (a[2] - a[0]) * (a[3] - a[1]);
    let area_b = (b[2] - b[0]) * (b[3] - b[1]);
    let union = area_a + area_b - inter;
    if union <= 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU by counting 0.25-pixel grid cells (by center) inside each box.
pub fn rasterized_iou(a: &Box2D, b: &Box2D) -> f64 {
    const PITCH: f64 = 0.25;
    let x0 = a.x_min().min(b.x_min());
    let y0 = a.y_min().min(b.y_min());
    let x1 = a.x_max().max(b.x_max());
    let y1 = a.y_max().max(b.y_max());
    let nx = ((x1 - x0) / PITCH).ceil() as usize;
    let ny = ((y1 - y0) / PITCH).ceil() as usize;
    let inside = |bx: &Box2D, cx: f64, cy: f64| {
        cx >= bx.x_min() && cx < bx.x_max() && cy >= bx.y_min() && cy < bx.y_max()
    };
    let (mut inter, mut union) = (0u64, 0u64);
    for iy in 0..ny {
        let cy = y0 + (iy as f64 + 0.5) * PITCH;
        for ix in 0..nx {
            let cx = x0 + (ix as f64 + 0.5) * PITCH;
            let in_a = inside(a, cx, cy);
            let in_b = inside(b, cx, cy);
            if in_a && in_b {
                inter += 1;
            }
            if in_a || in_b {
                union += 1;
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Central-difference gradient of the weighted BCE with respect to every
/// parameter, via the public forward/loss surface only. Returns per-layer
/// (weight gradients, bias gradients).
pub fn finite_difference_gradients(
    model: &MlpModel,
    x: &FeatureVector,
    label: bool,
    pos_weight: f64,
    neg_weight: f64,
    h: f64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let loss_of = |m: &MlpModel| {
        weighted_bce(forward(m, x).unwrap(), label, pos_weight, neg_weight)
    };
    let mut m = model.clone();
    let mut out = Vec::with_capacity(m.layers.len());
    for l in 0..model.layers.len() {
        let central_diff = |m: &mut MlpModel, l: usize, i: usize, weights: bool| {
            let perturb = |m: &mut MlpModel, v: f64| {
                if weights {
                    m.layers[l].weights[i] = v;
                } else {
                    m.layers[l].biases[i] = v;
                }
            };
            let orig = if weights {
                m.layers[l].weights[i]
            } else {
                m.layers[l].biases[i]
            };
            perturb(m, orig + h);
            let up = loss_of(m);
            perturb(m, orig - h);
            let down = loss_of(m);
            perturb(m, orig);
            (up - down) / (2.0 * h)
        };
        let gw: Vec<f64> = (0..model.layers[l].weights.len())
            .map(|i| central_diff(&mut m, l, i, true))
            .collect();
        let gb: Vec<f64> = (0..model.layers[l].biases.len())
            .map(|i| central_diff(&mut m, l, i, false))
            .collect();
        out.push((gw, gb));
    }
    out
}

/// Direct evaluation of interpolated-precision AP: for every recall level,
/// re-count TP/FP from scratch at each distinct score threshold and take the
/// best precision among thresholds whose recall reaches the level. Returns
/// percent.
pub fn brute_force_interpolated_ap(
    ranked: &[(f64, bool)],
    gt_count: u64,
    recall_levels: &[f64],
) -> f64 {
    let mut thresholds: Vec<f64> = ranked.iter().map(|(s, _)| *s).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut sum = 0.0;
    for &level in recall_levels {
        let mut best = 0.0f64;
        for &t in &thresholds {
            let tp = ranked.iter().filter(|(s, is_tp)| *s >= t && *is_tp).count() as u64;
            let fp = ranked.iter().filter(|(s, is_tp)| *s >= t && !*is_tp).count() as u64;
            if tp + fp == 0 {
                continue;
            }
            let recall = tp as f64 / gt_count as f64;
            if recall >= level {
                best = best.max(tp as f64 / (tp + fp) as f64);
            }
        }
        sum += best;
    }
    sum / recall_levels.len() as f64 * 100.0
}

pub fn bin_path() -> &'static str {
    env!("CARGO_BIN_EXE_latefuse")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Run the CLI and panic with its stderr if the exit code differs.
pub fn run_cli(args: &[&str]) -> std::process::Output {
    run_cli_in(args, Path::new("."))
}

/// Run the CLI from `cwd` so relative paths stay relative in its outputs.
pub fn run_cli_in(args: &[&str], cwd: &Path) -> std::process::Output {
    let output = Command::new(bin_path())
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("failed to launch latefuse binary");
    assert!(
        output.status.success(),
        "latefuse {:?} failed with {:?}\nstderr: {}",
        args,
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

pub fn run_cli_expect_code(args: &[&str], code: i32) -> std::process::Output {
    let output = Command::new(bin_path())
        .args(args)
        .output()
        .expect("failed to launch latefuse binary");
    assert_eq!(
        output.status.code(),
        Some(code),
        "latefuse {:?}: expected exit {}, got {:?}\nstderr: {}",
        args,
        code,
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// Copy the per-frame files for `frames` from a full dataset into a
/// train/test view directory with label/, lidar/, camera/ subtrees.
pub fn split_dataset_view(
    data: &Path,
    frames: &[latefuse::kitti::FrameId],
    dest: &Path,
) -> std::io::Result<()> {
    for sub in ["label", "lidar", "camera"] {
        let dest_dir = dest.join(sub);
        std::fs::create_dir_all(&dest_dir)?;
        for frame in frames {
            let name = format!("{frame}.txt");
            let src = data.join(sub).join(&name);
            if src.exists() {
                std::fs::copy(&src, dest_dir.join(&name))?;
            }
        }
    }
    Ok(())
}

/// Artifacts of one full synth -> match -> train -> filter -> eval run.
pub struct PipelineArtifacts {
    pub model: PathBuf,
    pub filtered_dir: PathBuf,
    pub baseline_report: PathBuf,
    pub filtered_report: PathBuf,
}

/// Drive the full pipeline end-to-end through the CLI binary: generate the
/// fixture dataset, split frames 50/50 (seed 7), train on the train side, and
/// filter + evaluate the test side. Every command runs from `root` with
/// relative paths, so two runs in different roots produce byte-identical
/// artifacts.
pub fn run_full_pipeline(root: &Path, fixture_toml: &Path) -> PipelineArtifacts {
    let data = root.join("data");
    run_cli_in(
        &["synth", fixture_toml.to_str().unwrap(), "--out", "data"],
        root,
    );

    let frames: Vec<latefuse::kitti::FrameId> =
        latefuse::kitti::list_frame_files(&data.join("lidar"))
            .unwrap()
            .into_iter()
            .map(|(f, _)| f)
            .collect();
    let (train_frames, test_frames) = latefuse::matching::split_frames(&frames, 0.5, 7).unwrap();
    split_dataset_view(&data, &train_frames, &root.join("train")).unwrap();
    split_dataset_view(&data, &test_frames, &root.join("test")).unwrap();

    run_cli_in(
        &[
            "match",
            "--lidar",
            "train/lidar",
            "--camera",
            "train/camera",
            "--gt",
            "train/label",
            "--meta",
            "data/frame_meta.txt",
            "--out",
            "train_features.csv",
        ],
        root,
    );
    run_cli_in(
        &[
            "train",
            "--features",
            "train_features.csv",
            "--seed",
            "7",
            "--out",
            "model.json",
        ],
        root,
    );
    run_cli_in(
        &[
            "filter",
            "--model",
            "model.json",
            "--lidar",
            "test/lidar",
            "--camera",
            "test/camera",
            "--meta",
            "data/frame_meta.txt",
            "--threshold",
            "0.5",
            "--out",
            "filtered",
        ],
        root,
    );
    run_cli_in(
        &[
            "eval",
            "--gt",
            "test/label",
            "--det",
            "test/lidar",
            "--out-report",
            "baseline_report.json",
        ],
        root,
    );
    run_cli_in(
        &[
            "eval",
            "--gt",
            "test/label",
            "--det",
            "filtered",
            "--out-report",
            "filtered_report.json",
        ],
        root,
    );

    PipelineArtifacts {
        model: root.join("model.json"),
        filtered_dir: root.join("filtered"),
        baseline_report: root.join("baseline_report.json"),
        filtered_report: root.join("filtered_report.json"),
    }
}
