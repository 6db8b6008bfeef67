//! Synthetic clips with known camera motion, contact region and trajectory.
#![allow(dead_code)]

pub mod oracle;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use affpipe::contact::BinaryMask;
use affpipe::geometry::{chain_homographies, Homography, Point2};
use affpipe::io::{write_json, write_pgm_mask, BoxRecord, CorrespondenceRecord, DetectionRecord, TrackFile};
use affpipe::trajectory::{eval_trajectory, TrajectoryParams};
use affpipe::BoxLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WIDTH: usize = 128;
pub const HEIGHT: usize = 96;
pub const FPS: f64 = 10.0;
pub const OBS: usize = 0;
pub const INTER: usize = 5;
pub const TRACK_STEPS: usize = 11;
pub const N_FRAMES: usize = INTER + TRACK_STEPS;
/// Contact square in the interaction frame, pixel centres inclusive.
pub const MASK_X: (usize, usize) = (64, 75);
pub const MASK_Y: (usize, usize) = (44, 55);

#[derive(Debug, Clone, Default)]
pub struct SceneOptions {
    pub empty_mask: bool,
    pub empty_frames: bool,
    pub outliers_per_link: usize,
}

pub struct Scene {
    pub manifest: PathBuf,
    /// `links[k]` maps frame k to frame k+1.
    pub links: Vec<Homography>,
    pub truth: TrajectoryParams,
    pub clip_id: String,
}

impl Scene {
    pub fn inter_to_obs(&self) -> Homography {
        chain_homographies(&self.links[OBS..INTER]).unwrap().inverse().unwrap()
    }

    /// Mask-square centroid carried into the observation frame.
    pub fn projected_centroid(&self) -> Point2 {
        let c = Point2::new(
            (MASK_X.0 + MASK_X.1) as f64 / 2.0,
            (MASK_Y.0 + MASK_Y.1) as f64 / 2.0,
        );
        self.inter_to_obs().apply(c).unwrap()
    }
}

fn link(k: usize) -> Homography {
    // Small rotation about the image centre, drift, and a faint perspective term.
    let ang = 0.004 * (k as f64 + 1.0) * if k.is_multiple_of(2) { 1.0 } else { -0.7 };
    let (s, c) = ang.sin_cos();
    let (cx, cy) = (WIDTH as f64 / 2.0, HEIGHT as f64 / 2.0);
    let tx = 0.6 + 0.05 * k as f64;
    let ty = -0.3 + 0.02 * k as f64;
    Homography::from_rows([
        [c, -s, cx - c * cx + s * cy + tx],
        [s, c, cy - s * cx - c * cy + ty],
        [2e-6, -1e-6, 1.0],
    ])
    .unwrap()
}

pub fn truth() -> TrajectoryParams {
    TrajectoryParams { theta: PI / 3.0, a: 12.0, psi: 0.4, b: 9.0, phi: 2.2, x0: Point2::new(60.0, 50.0) }
}

pub fn write_scene(dir: &Path, clip_id: &str, opts: &SceneOptions) -> Scene {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC11D);
    let links: Vec<Homography> = (0..N_FRAMES - 1).map(link).collect();

    let frames = dir.join("frames");
    std::fs::create_dir_all(&frames).unwrap();
    if !opts.empty_frames {
        for i in 0..N_FRAMES {
            std::fs::write(frames.join(format!("{i:06}.png")), b"frame").unwrap();
        }
    }

    let hand = |k: usize| [10.0 + k as f64, 60.0, 40.0 + k as f64, 94.0];
    let object = [58.0, 38.0, 84.0, 62.0];

    let mut dets = Vec::new();
    for k in 0..N_FRAMES {
        let mut boxes = vec![BoxRecord { label: BoxLabel::HandRight, xyxy: hand(k) }];
        if k == INTER {
            boxes.push(BoxRecord { label: BoxLabel::Object, xyxy: object });
        }
        dets.push(DetectionRecord { frame: k as i64, boxes });
    }

    let mut corr = Vec::new();
    for (k, h) in links.iter().enumerate() {
        let mut pairs = Vec::new();
        for _ in 0..60 {
            let src = loop {
                let p = Point2::new(rng.random_range(0.0..WIDTH as f64), rng.random_range(0.0..HEIGHT as f64));
                let b = hand(k);
                if !(p.x >= b[0] && p.x < b[2] && p.y >= b[1] && p.y < b[3]) {
                    break p;
                }
            };
            let dst = h.apply(src).unwrap();
            pairs.push([src.x, src.y, dst.x, dst.y]);
        }
        // Moving hand: correspondences that do not follow the camera.
        for _ in 0..15 {
            let b = hand(k);
            let src = Point2::new(rng.random_range(b[0]..b[2]), rng.random_range(b[1]..b[3]));
            pairs.push([src.x, src.y, src.x + 7.0, src.y - 5.0]);
        }
        for _ in 0..opts.outliers_per_link {
            let src = Point2::new(rng.random_range(0.0..WIDTH as f64), rng.random_range(0.0..HEIGHT as f64));
            pairs.push([src.x, src.y, rng.random_range(0.0..WIDTH as f64), rng.random_range(0.0..HEIGHT as f64)]);
        }
        corr.push(CorrespondenceRecord { frame_src: k as i64, frame_dst: k as i64 + 1, pairs });
    }

    let mut mask = BinaryMask::filled(WIDTH, HEIGHT, false);
    if !opts.empty_mask {
        for y in MASK_Y.0..=MASK_Y.1 {
            for x in MASK_X.0..=MASK_X.1 {
                mask.set(x, y, true);
            }
        }
    }

    // Track point in frame INTER + j is the trajectory point seen through
    // the camera motion obs -> INTER + j.
    let truth = truth();
    let track: Vec<Point2> = (0..TRACK_STEPS)
        .map(|j| {
            let t = j as f64 / FPS;
            let p = eval_trajectory(&truth, t);
            let h = chain_homographies(&links[OBS..INTER + j]).unwrap();
            h.apply(p).unwrap()
        })
        .collect();

    write_json(&dir.join("detections.json"), &dets).unwrap();
    write_json(&dir.join("correspondences.json"), &corr).unwrap();
    write_pgm_mask(&dir.join("mask.pgm"), &mask).unwrap();
    write_json(&dir.join("tracks.json"), &TrackFile { fps: FPS, tracks: vec![track] }).unwrap();

    let manifest = serde_json::json!({
        "clip_id": clip_id,
        "frames_dir": "frames",
        "t_obs": OBS as f64 / FPS,
        "t_inter": INTER as f64 / FPS,
        "fps": FPS,
        "description": "turn the knob",
        "prev_descriptions": ["reach for the stove"],
        "detections": "detections.json",
        "correspondences": "correspondences.json",
        "mask": "mask.pgm",
        "tracks": "tracks.json"
    });
    let path = dir.join("manifest.json");
    write_json(&path, &manifest).unwrap();
    Scene { manifest: path, links, truth, clip_id: clip_id.to_string() }
}

/// All regular files under `root`, relative path and contents, sorted.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.push((p.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out
}
