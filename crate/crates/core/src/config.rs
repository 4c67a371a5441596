//! Optional TOML run configuration for the CLI.
//!
//! Every value here mirrors a command-line flag; explicit flags win over
//! config values, which win over built-in defaults.

use serde::Deserialize;
use std::fs;
use std::path::Path;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "match")]
    pub matching: MatchSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub filter: FilterSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchSection {
    pub tau_match: Option<f64>,
    pub tau_match_openvocab: Option<f64>,
    pub tau_gt: Option<f64>,
    pub class: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub pos_weight: Option<f64>,
    pub neg_weight: Option<f64>,
    pub hidden_width: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub shuffle_each_epoch: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub difficulty: Option<String>,
    pub ap_mode: Option<String>,
    pub score_floor: Option<f64>,
    pub iou_thresh: Option<f64>,
    pub class: Option<String>,
    pub van_ignored: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub threshold: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let content = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&content).map_err(|e| format!("config {}: {e}", path.display()))
    }
}
