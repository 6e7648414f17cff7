use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::PipelineError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub files_found: usize,
    pub files_ingested: usize,
    pub files_failed: usize,
    pub pages_kept: usize,
    pub pages_rejected: usize,
    pub pages_duplicate: usize,
    pub truncated_records: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectCounts {
    pub sites: usize,
    pub selected: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateCounts {
    /// Successful selections offered to the model.
    pub sites_selected: usize,
    pub rows_generated: usize,
    pub errors: usize,
    /// Rows answered from the checkpoint without a request.
    pub resumed: usize,
    /// Selections whose content was cut to the token cap.
    pub truncated: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluateCounts {
    pub combinations: usize,
    pub references: usize,
    pub scored_pairs: usize,
    pub unmatched_generated: usize,
    pub unmatched_reference: usize,
    pub shortlisted: Vec<String>,
}

/// Per-output-directory record of what ran. Timestamps live only here so
/// every other artifact is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestCounts>,
    /// Keyed by heuristic code.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub select: BTreeMap<String, SelectCounts>,
    /// Keyed by source label (`Combo{n}`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub generate: BTreeMap<String, GenerateCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluate: Option<EvaluateCounts>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    /// Starts a new run, carrying over stage counts from an earlier manifest
    /// in `output_dir` if there is one.
    pub fn begin(output_dir: &Path, command: &str, config_digest: &str) -> Self {
        let started_at = Utc::now();
        let previous = std::fs::read_to_string(output_dir.join(MANIFEST_FILE))
            .ok()
            .and_then(|t| serde_json::from_str::<RunManifest>(&t).ok());
        let run_id = format!("{}-{}", started_at.format("%Y%m%dT%H%M%S%.3fZ"), &config_digest[..config_digest.len().min(8)]);
        let mut m = RunManifest {
            run_id,
            command: command.to_string(),
            started_at,
            finished_at: None,
            config_digest: config_digest.to_string(),
            ingest: None,
            select: BTreeMap::new(),
            generate: BTreeMap::new(),
            evaluate: None,
        };
        if let Some(p) = previous {
            m.ingest = p.ingest;
            m.select = p.select;
            m.generate = p.generate;
            m.evaluate = p.evaluate;
        }
        m
    }

    pub fn finish(&mut self, output_dir: &Path) -> Result<(), PipelineError> {
        self.finished_at = Some(Utc::now());
        std::fs::create_dir_all(output_dir)?;
        let path = output_dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, json + "\n").map_err(|e| PipelineError::store(path, e))
    }

    pub fn load(output_dir: &Path) -> Result<Self, PipelineError> {
        let path = output_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::store(&path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::store(path, e))
    }
}
