use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::classify::ExternalLabel;

/// Ingestion record for one clip. Relative paths resolve against the
/// directory of the file the manifest was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipManifest {
    pub clip_id: String,
    pub frames_dir: PathBuf,
    pub t_obs: f64,
    pub t_inter: f64,
    pub fps: f64,
    pub description: String,
    #[serde(default)]
    pub prev_descriptions: Vec<String>,
    pub detections: PathBuf,
    pub correspondences: PathBuf,
    pub mask: PathBuf,
    pub tracks: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<ExternalLabel>,
}

impl ClipManifest {
    pub fn frame_index(&self, t: f64) -> i64 {
        (t * self.fps).round() as i64
    }

    pub fn obs_frame(&self) -> i64 {
        self.frame_index(self.t_obs)
    }

    pub fn inter_frame(&self) -> i64 {
        self.frame_index(self.t_inter)
    }

    /// Rewrites every relative path against `base`.
    pub fn resolved(mut self, base: &Path) -> Self {
        for p in [&mut self.frames_dir, &mut self.detections, &mut self.correspondences, &mut self.mask, &mut self.tracks] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self
    }

    /// Field-level checks plus existence of every referenced input file.
    pub fn validate(&self) -> Result<(), String> {
        if self.clip_id.trim().is_empty() {
            return Err("clip_id is empty".into());
        }
        if self.description.trim().is_empty() {
            return Err("description is empty".into());
        }
        if self.prev_descriptions.len() > 2 {
            return Err("at most two preceding descriptions are allowed".into());
        }
        if !(self.fps > 0.0) || !self.fps.is_finite() {
            return Err(format!("fps must be positive, got {}", self.fps));
        }
        if !self.t_obs.is_finite() || !self.t_inter.is_finite() || self.t_obs < 0.0 {
            return Err("timestamps must be finite and non-negative".into());
        }
        if !(self.t_obs < self.t_inter) {
            return Err(format!("t_obs ({}) must precede t_inter ({})", self.t_obs, self.t_inter));
        }
        for (name, p) in [
            ("detections", &self.detections),
            ("correspondences", &self.correspondences),
            ("mask", &self.mask),
            ("tracks", &self.tracks),
        ] {
            if !p.is_file() {
                return Err(format!("{name} file {} does not exist", p.display()));
            }
        }
        if let Some(label) = &self.interaction {
            if label.to_label().is_none() {
                return Err("interaction label must name a tool exactly for tool_object".into());
            }
        }
        Ok(())
    }
}

/// A manifest list entry: either a parsed manifest with its base directory
/// or the reason it could not be parsed.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum ManifestEntry {
    Parsed(ClipManifest),
    Invalid { clip_id: String, reason: String },
}

/// Reads a manifest file holding one manifest object or an array of them.
/// Entries that fail to parse are kept as [`ManifestEntry::Invalid`].
pub fn read_manifest_list(path: &Path) -> Result<Vec<ManifestEntry>, crate::io::IoError> {
    let value: serde_json::Value = crate::io::read_json(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let items = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    Ok(items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let clip_id = v
                .get("clip_id")
                .and_then(|c| c.as_str())
                .map(str::to_string)
                .unwrap_or_else(|| format!("#{i}"));
            match serde_json::from_value::<ClipManifest>(v) {
                Ok(m) => ManifestEntry::Parsed(m.resolved(&base)),
                Err(e) => ManifestEntry::Invalid { clip_id, reason: e.to_string() },
            }
        })
        .collect())
}
