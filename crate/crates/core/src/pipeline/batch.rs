use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::build::{build_tuple, BuildError, BuildOutcome, SkipReason, Skipped};
use super::manifest::ManifestEntry;
use super::PipelineConfig;

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ClipStatus {
    Built,
    Skipped { reason: SkipReason, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipReport {
    pub clip_id: String,
    #[serde(flatten)]
    pub status: ClipStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub total: usize,
    pub built: usize,
    pub skipped: BTreeMap<SkipReason, usize>,
    pub clips: Vec<ClipReport>,
}

impl BatchSummary {
    fn from_reports(clips: Vec<ClipReport>) -> Self {
        let mut skipped = BTreeMap::new();
        let mut built = 0;
        for c in &clips {
            match &c.status {
                ClipStatus::Built => built += 1,
                ClipStatus::Skipped { reason, .. } => *skipped.entry(*reason).or_insert(0) += 1,
            }
        }
        Self { total: clips.len(), built, skipped, clips }
    }
}

/// Processes every entry independently on `workers` threads. Results keep
/// input order, so the summary does not depend on scheduling. Repeated
/// clip ids after the first are skipped.
pub fn run_batch(
    entries: &[ManifestEntry],
    config: &PipelineConfig,
    seed: u64,
    workers: usize,
    out_root: &Path,
) -> BatchSummary {
    let mut seen = HashSet::new();
    let duplicate: Vec<bool> = entries
        .iter()
        .map(|e| match e {
            ManifestEntry::Parsed(m) => !seen.insert(super::sanitize_id(&m.clip_id)),
            ManifestEntry::Invalid { .. } => false,
        })
        .collect();

    let run_one = |(entry, dup): (&ManifestEntry, &bool)| -> ClipReport {
        let (clip_id, outcome) = match entry {
            ManifestEntry::Invalid { clip_id, reason } => {
                (clip_id.clone(), Skipped::new(SkipReason::ManifestInvalid, reason.clone()).into())
            }
            ManifestEntry::Parsed(m) if *dup => (
                m.clip_id.clone(),
                Skipped::new(SkipReason::DuplicateClip, format!("clip id {} already processed", m.clip_id)).into(),
            ),
            ManifestEntry::Parsed(m) => {
                let status = match build_tuple(m, config, seed, out_root) {
                    Ok(BuildOutcome::Built(_)) => ClipStatus::Built,
                    Ok(BuildOutcome::Skipped(s)) => s.into(),
                    Err(BuildError::ManifestInvalid(r)) => Skipped::new(SkipReason::ManifestInvalid, r).into(),
                };
                (m.clip_id.clone(), status)
            }
        };
        log::info!("{clip_id}: {outcome:?}");
        ClipReport { clip_id, status: outcome }
    };

    let reports: Vec<ClipReport> = match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(|| entries.par_iter().zip(duplicate.par_iter()).map(run_one).collect()),
        Err(_) => entries.iter().zip(&duplicate).map(run_one).collect(),
    };
    BatchSummary::from_reports(reports)
}

impl From<Skipped> for ClipStatus {
    fn from(s: Skipped) -> Self {
        ClipStatus::Skipped { reason: s.reason, detail: s.detail }
    }
}
