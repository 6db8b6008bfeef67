//! Manual annotations: five contact keypoints and a trajectory polyline
//! per image, stored one JSON object per line.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::build::{quantize, DatasetTuple, LabeledClip, Provenance, HEATMAP_FILE, TRAJECTORY_FILE};
use super::classify::{InteractionKind, InteractionLabel, LabelSource};
use super::{derive_seed, PipelineConfig};
use crate::contact::rasterize_heatmap;
use crate::geometry::Point2;
use crate::trajectory::{fit_trajectory, TrackSet};

pub const KEYPOINT_COUNT: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("invalid annotation: {0}")]
    AnnotationInvalid(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Interaction as chosen by the annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualInteraction {
    pub kind: InteractionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub task_id: String,
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub description: String,
    pub interaction: ManualInteraction,
    pub keypoints: Vec<Point2>,
    pub trajectory: Vec<Point2>,
    pub annotator: String,
    pub timestamp: String,
}

impl AnnotationRecord {
    pub fn label(&self) -> InteractionLabel {
        InteractionLabel {
            kind: self.interaction.kind,
            tool_name: self.interaction.tool_name.clone(),
            source: LabelSource::Manual,
            origin: None,
        }
    }

    pub fn validate(&self) -> Result<(), AnnotationError> {
        let bad = |m: String| Err(AnnotationError::AnnotationInvalid(m));
        if self.keypoints.len() != KEYPOINT_COUNT {
            return bad(format!("expected {KEYPOINT_COUNT} keypoints, got {}", self.keypoints.len()));
        }
        if self.trajectory.len() < 2 {
            return bad(format!("trajectory needs at least 2 points, got {}", self.trajectory.len()));
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive".into());
        }
        let (w, h) = (self.width as f64, self.height as f64);
        if let Some(p) = self
            .keypoints
            .iter()
            .chain(&self.trajectory)
            .find(|p| !(p.is_finite() && p.x >= 0.0 && p.y >= 0.0 && p.x < w && p.y < h))
        {
            return bad(format!("point ({}, {}) lies outside the {}x{} image", p.x, p.y, self.width, self.height));
        }
        if !self.label().is_valid() {
            return bad("tool_name must be given exactly for tool_object interactions".into());
        }
        if self.task_id.trim().is_empty() {
            return bad("task_id is empty".into());
        }
        Ok(())
    }
}

/// Turns a manual annotation into a dataset tuple: keypoints are blurred
/// directly into the heatmap and the polyline, timed uniformly in click
/// order, is fitted with the trajectory model.
pub fn convert_annotation(
    a: &AnnotationRecord,
    config: &PipelineConfig,
    seed: u64,
) -> Result<LabeledClip, AnnotationError> {
    a.validate()?;
    let heatmap = quantize(rasterize_heatmap(&a.keypoints, a.width, a.height, config.sigma));
    let tracks = TrackSet::uniform(vec![a.trajectory.clone()])
        .map_err(|e| AnnotationError::AnnotationInvalid(e.to_string()))?;
    let clip_seed = derive_seed(seed, &a.task_id, 0);
    let fit = fit_trajectory(&tracks, derive_seed(clip_seed, "fit", 0))
        .map_err(|e| AnnotationError::AnnotationInvalid(e.to_string()))?;

    let mut prov = Provenance::new(seed, clip_seed, config);
    prov.annotator = Some(a.annotator.clone());
    prov.annotated_at = Some(a.timestamp.clone());
    let tuple = DatasetTuple {
        clip_id: a.task_id.clone(),
        image: a.image.clone(),
        description: a.description.clone(),
        heatmap: HEATMAP_FILE.into(),
        trajectory: TRAJECTORY_FILE.into(),
        interaction: a.label(),
        width: a.width,
        height: a.height,
        keypoints: Some(a.keypoints.clone()),
        provenance: prov,
    };
    Ok(LabeledClip { tuple, heatmap, fit })
}

pub fn parse_jsonl(text: &str) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| AnnotationError::Parse { line: i + 1, msg: e.to_string() })
        })
        .collect()
}

pub fn read_jsonl(path: &Path) -> Result<Vec<AnnotationRecord>, crate::io::IoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::io::IoError::Io { path: path.display().to_string(), source: e })?;
    parse_jsonl(&text).map_err(|e| crate::io::IoError::Format { path: path.display().to_string(), msg: e.to_string() })
}

/// Keeps the last record per `(task_id, annotator)`, in order of each
/// key's final occurrence.
pub fn latest_per_annotator(records: Vec<AnnotationRecord>) -> Vec<AnnotationRecord> {
    let mut last: HashMap<(String, String), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        last.insert((r.task_id.clone(), r.annotator.clone()), i);
    }
    records
        .into_iter()
        .enumerate()
        .filter(|(i, r)| last.get(&(r.task_id.clone(), r.annotator.clone())) == Some(i))
        .map(|(_, r)| r)
        .collect()
}

/// Output directory names: the task id, or `task.annotator` when a task
/// has more than one annotator.
pub fn instance_names(records: &[AnnotationRecord]) -> Vec<String> {
    let mut per_task: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *per_task.entry(&r.task_id).or_default() += 1;
    }
    records
        .iter()
        .map(|r| {
            if per_task[r.task_id.as_str()] > 1 {
                super::sanitize_id(&format!("{}.{}", r.task_id, r.annotator))
            } else {
                super::sanitize_id(&r.task_id)
            }
        })
        .collect()
}
