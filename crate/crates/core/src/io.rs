//! On-disk formats: perception inputs (correspondences, detections, masks,
//! tracks) and pipeline outputs (heatmaps, fitted trajectories).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{BinaryMask, Heatmap};
use crate::geometry::{BBox, BoxLabel, Correspondence, CorrespondenceSet, Point2};
use crate::trajectory::{TrajectoryFit, TrajectoryParams};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    fn format(path: &Path, msg: impl Into<String>) -> Self {
        Self::Format { path: path.display().to_string(), msg: msg.into() }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let f = File::open(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| IoError::Json { path: path.display().to_string(), source: e })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| IoError::Json { path: path.display().to_string(), source: e })?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| IoError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceRecord {
    pub frame_src: i64,
    pub frame_dst: i64,
    pub pairs: Vec<[f64; 4]>,
}

impl From<&CorrespondenceRecord> for CorrespondenceSet {
    fn from(r: &CorrespondenceRecord) -> Self {
        let pairs = r
            .pairs
            .iter()
            .map(|&[sx, sy, dx, dy]| Correspondence { src: Point2::new(sx, sy), dst: Point2::new(dx, dy) })
            .collect();
        CorrespondenceSet::new(r.frame_src, r.frame_dst, pairs)
    }
}

impl From<&CorrespondenceSet> for CorrespondenceRecord {
    fn from(c: &CorrespondenceSet) -> Self {
        Self {
            frame_src: c.frame_src,
            frame_dst: c.frame_dst,
            pairs: c.pairs.iter().map(|p| [p.src.x, p.src.y, p.dst.x, p.dst.y]).collect(),
        }
    }
}

pub fn read_correspondences(path: &Path) -> Result<Vec<CorrespondenceSet>, IoError> {
    let recs: Vec<CorrespondenceRecord> = read_json(path)?;
    Ok(recs.iter().map(CorrespondenceSet::from).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub label: BoxLabel,
    pub xyxy: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: i64,
    pub boxes: Vec<BoxRecord>,
}

impl DetectionRecord {
    pub fn bboxes(&self) -> Vec<BBox> {
        self.boxes
            .iter()
            .map(|b| BBox::new(b.xyxy[0], b.xyxy[1], b.xyxy[2], b.xyxy[3], b.label))
            .collect()
    }
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>, IoError> {
    read_json(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFile {
    pub fps: f64,
    pub tracks: Vec<Vec<Point2>>,
}

// Reads one whitespace-delimited header token, skipping `#` comments.
fn pnm_token(data: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

/// Binary PGM (P5), 8-bit. Non-zero samples are mask pixels.
pub fn read_pgm_mask(path: &Path) -> Result<BinaryMask, IoError> {
    let mut data = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| IoError::io(path, e))?;
    parse_pgm_mask(&data).map_err(|m| IoError::format(path, m))
}

pub fn parse_pgm_mask(data: &[u8]) -> Result<BinaryMask, String> {
    let mut pos = 0;
    if pnm_token(data, &mut pos).as_deref() != Some("P5") {
        return Err("not a binary PGM (P5)".into());
    }
    let mut num = |name: &str| -> Result<usize, String> {
        pnm_token(data, &mut pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format!("bad {name}"))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    pos += 1;
    let body = data.get(pos..pos + width * height).ok_or("truncated pixel data")?;
    let bits = body.iter().map(|&v| v != 0).collect();
    BinaryMask::new(width, height, bits).map_err(|e| e.to_string())
}

pub fn write_pgm_mask(path: &Path, mask: &BinaryMask) -> Result<(), IoError> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }));
    std::fs::write(path, out).map_err(|e| IoError::io(path, e))
}

/// Grayscale little-endian PFM. Rows are stored bottom to top.
pub fn write_pfm(path: &Path, hm: &Heatmap) -> Result<(), IoError> {
    let f = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(f);
    let mut write = || -> std::io::Result<()> {
        write!(w, "Pf\n{} {}\n-1.0\n", hm.width(), hm.height())?;
        for y in (0..hm.height()).rev() {
            for x in 0..hm.width() {
                w.write_all(&(hm.get(x, y) as f32).to_le_bytes())?;
            }
        }
        w.flush()
    };
    write().map_err(|e| IoError::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<Heatmap, IoError> {
    let mut data = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| IoError::io(path, e))?;
    let mut pos = 0;
    let bad = |m: &str| IoError::format(path, m);
    if pnm_token(&data, &mut pos).as_deref() != Some("Pf") {
        return Err(bad("not a grayscale PFM (Pf)"));
    }
    let width: usize = pnm_token(&data, &mut pos).and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad width"))?;
    let height: usize = pnm_token(&data, &mut pos).and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad height"))?;
    let scale: f64 = pnm_token(&data, &mut pos).and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad scale"))?;
    pos += 1;
    let body = data.get(pos..pos + 4 * width * height).ok_or_else(|| bad("truncated pixel data"))?;
    let mut hm = Heatmap::zeros(width, height);
    for (k, chunk) in body.chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().expect("chunk of 4");
        let v = if scale < 0.0 { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (x, row) = (k % width, k / width);
        hm.set(x, height - 1 - row, v as f64);
    }
    Ok(hm)
}

/// 8-bit grayscale preview of a heatmap.
pub fn write_png_preview(path: &Path, hm: &Heatmap) -> Result<(), IoError> {
    let px: Vec<u8> = hm.values().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let img = image::GrayImage::from_raw(hm.width() as u32, hm.height() as u32, px)
        .ok_or_else(|| IoError::format(path, "heatmap size overflow"))?;
    img.save(path).map_err(|e| IoError::format(path, e.to_string()))
}

/// Flat JSON form of a fitted trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub theta: f64,
    pub a: f64,
    pub psi: f64,
    pub b: f64,
    pub phi: f64,
    pub x0: Point2,
    pub residual: f64,
    pub degenerate: bool,
}

impl From<&TrajectoryFit> for TrajectoryRecord {
    fn from(f: &TrajectoryFit) -> Self {
        let p = f.params;
        Self { theta: p.theta, a: p.a, psi: p.psi, b: p.b, phi: p.phi, x0: p.x0, residual: f.residual, degenerate: f.degenerate }
    }
}

impl From<&TrajectoryRecord> for TrajectoryFit {
    fn from(r: &TrajectoryRecord) -> Self {
        TrajectoryFit {
            params: TrajectoryParams { theta: r.theta, a: r.a, psi: r.psi, b: r.b, phi: r.phi, x0: r.x0 },
            residual: r.residual,
            degenerate: r.degenerate,
        }
    }
}
