//! Planar homographies between video frames.
//!
//! Correspondences between consecutive frames are fitted with a normalized
//! DLT inside a seeded RANSAC loop, chained across frames, and used to move
//! pixel coordinates from one frame into another.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum number of correspondences that determine a homography.
pub const MIN_PAIRS: usize = 4;

/// Default RANSAC iteration budget.
pub const DEFAULT_RANSAC_ITERATIONS: usize = 2000;

/// Default RANSAC reprojection threshold in pixels.
pub const DEFAULT_RANSAC_THRESHOLD: f64 = 3.0;

const DET_EPS: f64 = 1e-12;
const W_EPS: f64 = 1e-12;
// Ratio of the second-smallest to largest singular value below which the
// DLT system is treated as rank deficient.
const RANK_EPS: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least {MIN_PAIRS} correspondences, got {got}")]
    TooFewPairs { got: usize },
    #[error("only {remaining} correspondences survive masking (need {MIN_PAIRS})")]
    FilteredBelowMinimum { remaining: usize },
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
    #[error("no consensus: best model has {inliers} inliers")]
    NoConsensus { inliers: usize },
    #[error("cannot chain an empty list of homographies")]
    EmptyChain,
    #[error("point ({x}, {y}) maps to infinity")]
    PointAtInfinity { x: f64, y: f64 },
    #[error("matrix is not invertible")]
    Singular,
}

/// A pixel location. `x` grows to the right, `y` grows downwards.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// 3×3 projective transform, stored with `m[(2,2)] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self(Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0))
    }

    pub fn scaling(sx: f64, sy: f64) -> Self {
        Self(Matrix3::new(sx, 0.0, 0.0, 0.0, sy, 0.0, 0.0, 0.0, 1.0))
    }

    /// Builds a homography from an arbitrary-scale matrix, rescaling so the
    /// bottom-right entry is 1.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let s = m[(2, 2)];
        if !s.is_finite() || s.abs() < DET_EPS {
            return Err(GeometryError::DegenerateConfiguration);
        }
        let m = m / s;
        if !m.iter().all(|v| v.is_finite()) || m.determinant().abs() <= DET_EPS {
            return Err(GeometryError::Singular);
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let inv = self.0.try_inverse().ok_or(GeometryError::Singular)?;
        Self::from_matrix(inv)
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Result<Self, GeometryError> {
        Self::from_matrix(self.0 * first.0)
    }

    pub fn apply(&self, p: Point2) -> Result<Point2, GeometryError> {
        let v = self.0 * Vector3::new(p.x, p.y, 1.0);
        if v.z.abs() < W_EPS {
            return Err(GeometryError::PointAtInfinity { x: p.x, y: p.y });
        }
        let out = Point2::new(v.x / v.z, v.y / v.z);
        if !out.is_finite() {
            return Err(GeometryError::PointAtInfinity { x: p.x, y: p.y });
        }
        Ok(out)
    }

    pub fn reprojection_error(&self, src: Point2, dst: Point2) -> f64 {
        match self.apply(src) {
            Ok(p) => p.dist(&dst),
            Err(_) => f64::INFINITY,
        }
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.0 - other.0).amax()
    }
}

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}

impl Serialize for Homography {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Homography::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxLabel {
    HandLeft,
    HandRight,
    Object,
    Tool,
}

/// Axis-aligned box. Containment is half-open: `x_min <= x < x_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub label: BoxLabel,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, label: BoxLabel) -> Self {
        Self { x_min, y_min, x_max, y_max, label }
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x < self.x_max && p.y >= self.y_min && p.y < self.y_max
    }

    /// Clamps the box to `[0, width] × [0, height]`. Returns `None` when
    /// nothing is left.
    pub fn clamped(&self, width: f64, height: f64) -> Option<BBox> {
        let b = BBox {
            x_min: self.x_min.clamp(0.0, width),
            y_min: self.y_min.clamp(0.0, height),
            x_max: self.x_max.clamp(0.0, width),
            y_max: self.y_max.clamp(0.0, height),
            label: self.label,
        };
        b.is_valid().then_some(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub src: Point2,
    pub dst: Point2,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet {
    pub frame_src: i64,
    pub frame_dst: i64,
    pub pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(frame_src: i64, frame_dst: i64, pairs: Vec<Correspondence>) -> Self {
        Self { frame_src, frame_dst, pairs }
    }

    pub fn from_points(src: &[Point2], dst: &[Point2]) -> Self {
        let pairs = src.iter().zip(dst).map(|(&s, &d)| Correspondence { src: s, dst: d }).collect();
        Self { frame_src: 0, frame_dst: 1, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Drops every pair whose source point falls inside any of `masks`.
pub fn filter_correspondences(
    c: &CorrespondenceSet,
    masks: &[BBox],
) -> Result<CorrespondenceSet, GeometryError> {
    let pairs: Vec<_> = c
        .pairs
        .iter()
        .filter(|p| !masks.iter().any(|b| b.contains(p.src)))
        .copied()
        .collect();
    if pairs.len() < MIN_PAIRS {
        return Err(GeometryError::FilteredBelowMinimum { remaining: pairs.len() });
    }
    Ok(CorrespondenceSet { frame_src: c.frame_src, frame_dst: c.frame_dst, pairs })
}

// Similarity transform moving the centroid to the origin with mean distance √2.
fn normalizing_transform<'a>(pts: impl Iterator<Item = &'a Point2> + Clone) -> Option<Matrix3<f64>> {
    let n = pts.clone().count() as f64;
    let (sx, sy) = pts.clone().fold((0.0, 0.0), |(ax, ay), p| (ax + p.x, ay + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = pts.map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn dlt_pairs<'a>(pairs: impl Iterator<Item = &'a Correspondence> + Clone) -> Result<Homography, GeometryError> {
    let n = pairs.clone().count();
    if n < MIN_PAIRS {
        return Err(GeometryError::TooFewPairs { got: n });
    }
    let t_src = normalizing_transform(pairs.clone().map(|p| &p.src))
        .ok_or(GeometryError::DegenerateConfiguration)?;
    let t_dst = normalizing_transform(pairs.clone().map(|p| &p.dst))
        .ok_or(GeometryError::DegenerateConfiguration)?;

    // Pad to at least 9 rows so the SVD exposes the full right null space.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, p) in pairs.enumerate() {
        let s = t_src * Vector3::new(p.src.x, p.src.y, 1.0);
        let d = t_dst * Vector3::new(p.dst.x, p.dst.y, 1.0);
        let (x, y) = (s.x, s.y);
        let (u, v) = (d.x, d.y);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::DegenerateConfiguration)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let largest = sv[order[0]];
    let second_smallest = sv[order[order.len() - 2]];
    if !(largest > 0.0) || second_smallest / largest < RANK_EPS {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let h = v_t.row(order[order.len() - 1]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst.try_inverse().ok_or(GeometryError::DegenerateConfiguration)?;
    Homography::from_matrix(t_dst_inv * hn * t_src).map_err(|_| GeometryError::DegenerateConfiguration)
}

/// Direct linear transform on all pairs, with coordinate normalization.
pub fn estimate_homography_dlt(c: &CorrespondenceSet) -> Result<Homography, GeometryError> {
    dlt_pairs(c.pairs.iter())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub homography: Homography,
    pub inliers: Vec<usize>,
}

fn inlier_set(h: &Homography, pairs: &[Correspondence], threshold: f64) -> (Vec<usize>, f64) {
    let mut idx = Vec::new();
    let mut err_sum = 0.0;
    for (i, p) in pairs.iter().enumerate() {
        let e = h.reprojection_error(p.src, p.dst);
        if e < threshold {
            idx.push(i);
            err_sum += e;
        }
    }
    (idx, err_sum)
}

/// Seeded RANSAC over minimal 4-point samples followed by a DLT refit on
/// the consensus set.
pub fn ransac_homography(
    c: &CorrespondenceSet,
    threshold: f64,
    iterations: usize,
    seed: u64,
) -> Result<RansacResult, GeometryError> {
    let n = c.pairs.len();
    if n < MIN_PAIRS {
        return Err(GeometryError::TooFewPairs { got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..iterations.max(1) {
        let picked = sample(&mut rng, n, MIN_PAIRS);
        let Ok(h) = dlt_pairs(picked.iter().map(|i| &c.pairs[i]).collect::<Vec<_>>().into_iter())
        else {
            continue;
        };
        let (inl, err) = inlier_set(&h, &c.pairs, threshold);
        let better = match &best {
            None => true,
            Some((b, be)) => inl.len() > b.len() || (inl.len() == b.len() && err < *be),
        };
        if better {
            let all = inl.len() == n;
            best = Some((inl, err));
            if all {
                break;
            }
        }
    }
    let (inliers, _) = best.ok_or(GeometryError::NoConsensus { inliers: 0 })?;
    if inliers.len() < MIN_PAIRS {
        return Err(GeometryError::NoConsensus { inliers: inliers.len() });
    }
    let refit = dlt_pairs(inliers.iter().map(|&i| &c.pairs[i]))?;
    let (refit_inliers, _) = inlier_set(&refit, &c.pairs, threshold);
    let inliers = if refit_inliers.len() >= inliers.len() { refit_inliers } else { inliers };
    Ok(RansacResult { homography: refit, inliers })
}

/// Composes per-link homographies given in frame order:
/// `links[n-1] · … · links[0]`.
pub fn chain_homographies(links: &[Homography]) -> Result<Homography, GeometryError> {
    let (first, rest) = links.split_first().ok_or(GeometryError::EmptyChain)?;
    rest.iter().try_fold(*first, |acc, h| h.compose(&acc))
}

pub fn project_points(h: &Homography, pts: &[Point2]) -> Result<Vec<Point2>, GeometryError> {
    pts.iter().map(|&p| h.apply(p)).collect()
}
