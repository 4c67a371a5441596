//! Late-fusion detection verification.
//!
//! A LiDAR detector finds most objects but over-fires; camera detectors miss
//! more but rarely fire on nothing. This crate cross-validates each LiDAR
//! detection against camera detections with a small recall-biased MLP and
//! keeps only the verified boxes, then scores the result with KITTI-style 2D
//! average precision.
//!
//! The pipeline is file-mediated, so any detector whose output is written in
//! the KITTI detection format drops in:
//!
//! 1. [`synth`] — generate a seeded KITTI-format dataset (or bring your own).
//! 2. [`matching`] — associate camera boxes with each LiDAR box and build
//!    feature vectors, labeled against ground truth.
//! 3. [`verifier`] — train the accept/reject MLP, filter detections.
//! 4. [`eval`] — greedy matching, PR curves, 11/40-point AP per difficulty.
//!
//! The `latefuse` binary exposes each stage as a subcommand; see the README.

pub mod cli;
pub mod config;
pub mod eval;
pub mod geometry;
pub mod kitti;
pub mod matching;
pub mod synth;
pub mod verifier;
