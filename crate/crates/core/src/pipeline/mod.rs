//! Per-clip orchestration: interaction classification, contact projection
//! and trajectory fitting, plus dataset-tuple storage, annotation
//! conversion, batch runs and evaluation.

pub mod annotation;
pub mod batch;
pub mod build;
pub mod classify;
pub mod evaluate;
pub mod manifest;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contact::{DEFAULT_GMM_COMPONENTS, DEFAULT_GMM_MAX_ITERS, DEFAULT_SAMPLES, DEFAULT_SIGMA};
use crate::geometry::{DEFAULT_RANSAC_ITERATIONS, DEFAULT_RANSAC_THRESHOLD};

pub use annotation::{convert_annotation, AnnotationRecord};
pub use batch::{run_batch, BatchSummary};
pub use build::{build_tuple, load_tuple, write_tuple, BuildOutcome, DatasetTuple, LabeledClip, SkipReason, Skipped};
pub use classify::{classify_interaction, InteractionKind, InteractionLabel, LabelSource};
pub use manifest::ClipManifest;

/// Tunables shared by pseudo-labelling and annotation conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub gmm_k: usize,
    pub gmm_max_iters: usize,
    pub samples: usize,
    pub sigma: f64,
    pub ransac_thresh: f64,
    pub ransac_iters: usize,
    /// Write an 8-bit PNG next to every heatmap.
    pub png_preview: bool,
    /// Overrides the built-in tool lexicon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<Vec<String>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gmm_k: DEFAULT_GMM_COMPONENTS,
            gmm_max_iters: DEFAULT_GMM_MAX_ITERS,
            samples: DEFAULT_SAMPLES,
            sigma: DEFAULT_SIGMA,
            ransac_thresh: DEFAULT_RANSAC_THRESHOLD,
            ransac_iters: DEFAULT_RANSAC_ITERATIONS,
            png_preview: false,
            lexicon: None,
        }
    }
}

impl PipelineConfig {
    pub fn lexicon(&self) -> Vec<String> {
        match &self.lexicon {
            Some(l) => l.clone(),
            None => classify::DEFAULT_LEXICON.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Stable sub-seed for a named stage; independent of scheduling.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}

/// Directory-safe form of an identifier.
pub fn sanitize_id(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    match s.trim_matches('.') {
        "" => "_".to_string(),
        t => t.to_string(),
    }
}
