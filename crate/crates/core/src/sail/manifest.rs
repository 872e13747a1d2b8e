use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SailConfig;
use crate::backend::{BackendIdentity, ServiceStats};
use crate::corpus::LanguagePair;
use crate::extraction::{Prediction, PredictionStatus};
use crate::prompting::ShotMode;

/// Counts from one harvest sweep in one direction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestStats {
    pub direction: Option<LanguagePair>,
    /// Top-N_f words translated.
    pub queried: usize,
    pub forward_ok: usize,
    /// Distinct forward outputs sent back.
    pub back_translated: usize,
    pub kept: usize,
    pub backend_errors: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub shot_mode: ShotMode,
    pub x_side: HarvestStats,
    pub y_side: HarvestStats,
    pub from_x_side: usize,
    pub from_y_side: usize,
    pub from_both: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLog {
    pub query: String,
    pub predicted: Option<String>,
    pub status: PredictionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&Prediction> for PredictionLog {
    fn from(p: &Prediction) -> Self {
        Self {
            query: p.query.clone(),
            predicted: p.predicted.clone(),
            status: p.status,
            error: p.error.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    ZeroShot,
    Sail,
}

/// Everything needed to repeat a run. Contains no clocks or cache
/// counters, so two runs over the same responses serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub mode: RunMode,
    pub pair: LanguagePair,
    pub config_hash: String,
    pub config: SailConfig,
    pub backend: BackendIdentity,
    pub iterations: Vec<IterationSummary>,
    pub final_dictionary_size: usize,
    /// Per test direction, one entry per query word in sorted order.
    pub predictions: BTreeMap<String, Vec<PredictionLog>>,
    pub backend_failures: usize,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Wall-clock and cache accounting for one run, kept apart from the
/// manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub elapsed_ms: u128,
    pub iteration_ms: Vec<u128>,
    pub inference_ms: u128,
    pub service: ServiceStats,
}

impl RunStats {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
        s.push('\n');
        s
    }
}
