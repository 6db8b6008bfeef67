use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::classify::{resolve_interaction, InteractionLabel};
use super::manifest::ClipManifest;
use super::{derive_seed, sanitize_id, PipelineConfig};
use crate::contact::{
    fit_gmm, intersect_mask_bbox, project_region, rasterize_heatmap, sample_contact_points, ContactError, Heatmap,
};
use crate::geometry::{
    filter_correspondences, ransac_homography, BoxLabel, CorrespondenceSet, GeometryError, Homography, Point2,
};
use crate::io::{self, TrackFile, TrajectoryRecord};
use crate::trajectory::{fit_trajectory, project_tracks, TrackSet, TrajectoryError, TrajectoryFit};

pub const HEATMAP_FILE: &str = "heatmap.pfm";
pub const HEATMAP_PREVIEW_FILE: &str = "heatmap.png";
pub const TRAJECTORY_FILE: &str = "trajectory.json";
pub const TUPLE_FILE: &str = "tuple.json";

/// Machine-readable cause of a skipped clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    ManifestInvalid,
    DuplicateClip,
    Io,
    MissingCorrespondences,
    FilteredBelowMinimum,
    DegenerateConfiguration,
    NoConsensus,
    PointAtInfinity,
    NoObjectBox,
    EmptyIntersection,
    AllPointsOutOfFrame,
    TooFewPoints,
    InvalidTracks,
    DegenerateTrack,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub reason: SkipReason,
    pub detail: String,
}

impl Skipped {
    pub fn new(reason: SkipReason, detail: impl Into<String>) -> Self {
        Self { reason, detail: detail.into() }
    }
}

impl From<GeometryError> for Skipped {
    fn from(e: GeometryError) -> Self {
        let reason = match e {
            GeometryError::TooFewPairs { .. } | GeometryError::FilteredBelowMinimum { .. } => {
                SkipReason::FilteredBelowMinimum
            }
            GeometryError::NoConsensus { .. } => SkipReason::NoConsensus,
            GeometryError::PointAtInfinity { .. } => SkipReason::PointAtInfinity,
            GeometryError::DegenerateConfiguration | GeometryError::Singular | GeometryError::EmptyChain => {
                SkipReason::DegenerateConfiguration
            }
        };
        Skipped::new(reason, e.to_string())
    }
}

impl From<ContactError> for Skipped {
    fn from(e: ContactError) -> Self {
        match e {
            ContactError::EmptyIntersection => Skipped::new(SkipReason::EmptyIntersection, e.to_string()),
            ContactError::AllPointsOutOfFrame => Skipped::new(SkipReason::AllPointsOutOfFrame, e.to_string()),
            ContactError::TooFewPoints { .. } => Skipped::new(SkipReason::TooFewPoints, e.to_string()),
            ContactError::MaskShape { .. } => Skipped::new(SkipReason::Io, e.to_string()),
            ContactError::Geometry(g) => g.into(),
        }
    }
}

impl From<TrajectoryError> for Skipped {
    fn from(e: TrajectoryError) -> Self {
        match e {
            TrajectoryError::Geometry(g) => g.into(),
            other => Skipped::new(SkipReason::InvalidTracks, other.to_string()),
        }
    }
}

impl From<io::IoError> for Skipped {
    fn from(e: io::IoError) -> Self {
        Skipped::new(SkipReason::Io, e.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),
}

/// Settings and intermediate counts needed to reproduce a tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub clip_seed: u64,
    pub config: PipelineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_obs: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_inter: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmm_components: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_region_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ransac_inliers: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotated_at: Option<String>,
}

impl Provenance {
    pub fn new(seed: u64, clip_seed: u64, config: &PipelineConfig) -> Self {
        Self {
            seed,
            clip_seed,
            config: config.clone(),
            frame_obs: None,
            frame_inter: None,
            gmm_components: None,
            contact_region_points: None,
            ransac_inliers: Vec::new(),
            annotator: None,
            annotated_at: None,
        }
    }
}

/// One `(image, description, contact heatmap, trajectory)` record. File
/// references are relative to the tuple's own directory, except `image`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetTuple {
    pub clip_id: String,
    pub image: String,
    pub description: String,
    pub heatmap: String,
    pub trajectory: String,
    pub interaction: InteractionLabel,
    pub width: usize,
    pub height: usize,
    /// Human contact keypoints, for annotation-derived tuples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<Vec<Point2>>,
    pub provenance: Provenance,
}

/// A tuple with the data its file references point at.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub tuple: DatasetTuple,
    pub heatmap: Heatmap,
    pub fit: TrajectoryFit,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum BuildOutcome {
    Built(DatasetTuple),
    Skipped(Skipped),
}

/// Rounds heatmap values to what a 32-bit PFM stores.
pub(crate) fn quantize(mut hm: Heatmap) -> Heatmap {
    hm.values_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
    hm
}

fn list_frames(dir: &Path) -> Result<Vec<PathBuf>, Skipped> {
    let rd = std::fs::read_dir(dir)
        .map_err(|e| Skipped::new(SkipReason::Io, format!("frames dir {}: {e}", dir.display())))?;
    let mut frames: Vec<PathBuf> = rd
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(Skipped::new(SkipReason::Io, format!("frames dir {} is empty", dir.display())));
    }
    Ok(frames)
}

/// Runs the full labelling chain for one clip without writing anything.
pub fn label_clip(m: &ClipManifest, config: &PipelineConfig, seed: u64) -> Result<LabeledClip, Skipped> {
    let clip_seed = derive_seed(seed, &m.clip_id, 0);
    let mut prov = Provenance::new(seed, clip_seed, config);

    let lexicon = config.lexicon();
    let interaction = resolve_interaction(m.interaction.as_ref(), &m.description, &m.prev_descriptions, &lexicon)
        .map_err(|e| Skipped::new(SkipReason::ManifestInvalid, e))?;

    let frames = list_frames(&m.frames_dir)?;
    let obs = m.obs_frame();
    let inter = m.inter_frame().max(obs);
    prov.frame_obs = Some(obs);
    prov.frame_inter = Some(inter);
    let image = usize::try_from(obs)
        .ok()
        .and_then(|i| frames.get(i))
        .ok_or_else(|| Skipped::new(SkipReason::Io, format!("frame {obs} not found in {}", m.frames_dir.display())))?;

    let mask = io::read_pgm_mask(&m.mask)?;
    let (width, height) = (mask.width(), mask.height());
    let detections: BTreeMap<i64, _> =
        io::read_detections(&m.detections)?.into_iter().map(|d| (d.frame, d.bboxes())).collect();
    let corr: BTreeMap<(i64, i64), CorrespondenceSet> = io::read_correspondences(&m.correspondences)?
        .into_iter()
        .map(|c| ((c.frame_src, c.frame_dst), c))
        .collect();
    let track_file: TrackFile = io::read_json(&m.tracks)?;
    let raw_tracks = TrackSet::from_fps(track_file.tracks, track_file.fps)?;

    // Forward links H_{k→k+1} from the observation frame to the last
    // tracked frame.
    let last = inter + raw_tracks.steps() as i64 - 1;
    let mut forward = Vec::new();
    for k in obs..last {
        let c = corr
            .get(&(k, k + 1))
            .ok_or_else(|| Skipped::new(SkipReason::MissingCorrespondences, format!("no correspondences for {k}->{}", k + 1)))?;
        let masks = detections.get(&k).map(Vec::as_slice).unwrap_or(&[]);
        let filtered = filter_correspondences(c, masks)?;
        let fit = ransac_homography(&filtered, config.ransac_thresh, config.ransac_iters, derive_seed(clip_seed, "ransac", k as u64))?;
        prov.ransac_inliers.push(fit.inliers.len());
        forward.push(fit.homography);
    }
    let split = (inter - obs) as usize;
    let obs_to_inter = forward[..split]
        .iter()
        .try_fold(Homography::identity(), |acc, h| h.compose(&acc))?;
    let inter_to_obs = obs_to_inter.inverse()?;

    // Contact region: mask ∩ object box in the interaction frame.
    let boxes = detections.get(&inter).map(Vec::as_slice).unwrap_or(&[]);
    let region = boxes
        .iter()
        .filter(|b| b.label == BoxLabel::Object)
        .filter_map(|b| b.clamped(width as f64, height as f64))
        .filter_map(|b| intersect_mask_bbox(&mask, &b).ok())
        .fold(None::<Vec<Point2>>, |best, pts| match best {
            Some(b) if b.len() >= pts.len() => Some(b),
            _ => Some(pts),
        });
    let region = match region {
        Some(r) => r,
        None if boxes.iter().any(|b| b.label == BoxLabel::Object) => return Err(ContactError::EmptyIntersection.into()),
        None => return Err(Skipped::new(SkipReason::NoObjectBox, format!("no object box in frame {inter}"))),
    };
    let projected = project_region(&region, &inter_to_obs, width, height)?;
    prov.contact_region_points = Some(projected.len());
    let k = config.gmm_k.min(projected.len()).max(1);
    prov.gmm_components = Some(k);
    let gmm = fit_gmm(&projected, k, config.gmm_max_iters, derive_seed(clip_seed, "gmm", 0))?;
    let samples = sample_contact_points(&gmm.mixture, config.samples.max(1), derive_seed(clip_seed, "sample", 0));
    let heatmap = quantize(rasterize_heatmap(&samples, width, height, config.sigma));

    // Trajectory: every tracked frame mapped into the observation frame.
    let mut chain = Vec::with_capacity(raw_tracks.steps());
    let mut inter_to_j = Homography::identity();
    for j in 0..raw_tracks.steps() {
        if j > 0 {
            inter_to_j = forward[split + j - 1].compose(&inter_to_j)?;
        }
        chain.push(inter_to_obs.compose(&inter_to_j.inverse()?)?);
    }
    let tracks = project_tracks(&raw_tracks, &chain)?;
    let fit = fit_trajectory(&tracks, derive_seed(clip_seed, "fit", 0))?;
    if fit.degenerate {
        return Err(Skipped::new(SkipReason::DegenerateTrack, "all tracked points coincide"));
    }

    let tuple = DatasetTuple {
        clip_id: m.clip_id.clone(),
        image: image.display().to_string(),
        description: m.description.clone(),
        heatmap: HEATMAP_FILE.into(),
        trajectory: TRAJECTORY_FILE.into(),
        interaction,
        width,
        height,
        keypoints: None,
        provenance: prov,
    };
    Ok(LabeledClip { tuple, heatmap, fit })
}

/// Writes `heatmap.pfm`, `trajectory.json`, `tuple.json` (and optionally
/// `heatmap.png`) into `dir`.
pub fn write_tuple(dir: &Path, clip: &LabeledClip) -> Result<(), io::IoError> {
    std::fs::create_dir_all(dir).map_err(|e| io::IoError::Io { path: dir.display().to_string(), source: e })?;
    io::write_pfm(&dir.join(&clip.tuple.heatmap), &clip.heatmap)?;
    if clip.tuple.provenance.config.png_preview {
        io::write_png_preview(&dir.join(HEATMAP_PREVIEW_FILE), &clip.heatmap)?;
    }
    io::write_json(&dir.join(&clip.tuple.trajectory), &TrajectoryRecord::from(&clip.fit))?;
    io::write_json(&dir.join(TUPLE_FILE), &clip.tuple)
}

pub fn load_tuple(dir: &Path) -> Result<LabeledClip, io::IoError> {
    let tuple: DatasetTuple = io::read_json(&dir.join(TUPLE_FILE))?;
    let heatmap = io::read_pfm(&dir.join(&tuple.heatmap))?;
    let rec: TrajectoryRecord = io::read_json(&dir.join(&tuple.trajectory))?;
    Ok(LabeledClip { tuple, heatmap, fit: TrajectoryFit::from(&rec) })
}

/// Validates, labels and stores one clip under `out_root/<clip_id>/`.
/// Labelling failures come back as [`BuildOutcome::Skipped`].
pub fn build_tuple(
    m: &ClipManifest,
    config: &PipelineConfig,
    seed: u64,
    out_root: &Path,
) -> Result<BuildOutcome, BuildError> {
    m.validate().map_err(BuildError::ManifestInvalid)?;
    let clip = match label_clip(m, config, seed) {
        Ok(c) => c,
        Err(s) => return Ok(BuildOutcome::Skipped(s)),
    };
    if let Err(e) = write_tuple(&out_root.join(sanitize_id(&m.clip_id)), &clip) {
        return Ok(BuildOutcome::Skipped(e.into()));
    }
    Ok(BuildOutcome::Built(clip.tuple))
}
