//! Parametric manipulation trajectories.
//!
//! A trajectory is a rotation of radius `a` about a centre offset from the
//! anchor `x0`, combined with a straight translation:
//!
//! ```text
//! f(t) = x0 + a (R(θ t) − I) [cos ψ, sin ψ]ᵀ + b [cos φ, sin φ]ᵀ t,   t ∈ [0, 1]
//! ```
//!
//! For a fixed `θ` the model is linear in `u = a [cos ψ, sin ψ]` and
//! `w = b [cos φ, sin φ]`, so fitting profiles out those four unknowns with
//! a linear solve, scans `θ`, and finishes with a damped Gauss-Newton polish
//! over all five parameters.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix5, Vector5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Homography, Point2};

/// Largest rotation magnitude a fit may return (exclusive).
pub const THETA_LIMIT: f64 = TAU;
/// Number of multi-start candidates refined per fit.
pub const FIT_STARTS: usize = 16;
/// Default number of samples for evaluation-time normalization.
pub const EVAL_SAMPLES: usize = 32;

const PROFILE_GRID: usize = 256;
const DEGENERATE_EXTENT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("track set needs at least {needed} time steps, got {got}")]
    TooFewSteps { needed: usize, got: usize },
    #[error("track set has no tracks")]
    NoTracks,
    #[error("track {track} has {got} points, expected {expected}")]
    TrackLength { track: usize, got: usize, expected: usize },
    #[error("timestamps must start at 0, increase strictly and stay within [0, 1]")]
    BadTimestamps,
    #[error("non-finite coordinate in track {track}")]
    NonFinite { track: usize },
    #[error("homography chain has {got} entries, expected {expected}")]
    ChainLength { got: usize, expected: usize },
    #[error("{field} = {value} is outside [0, {limit}]")]
    OutOfRange { field: &'static str, value: f64, limit: f64 },
    #[error("image diagonal must be positive")]
    BadDiagonal,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-point pixel tracks sharing one set of normalized timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSet {
    tracks: Vec<Vec<Point2>>,
    timestamps: Vec<f64>,
}

impl TrackSet {
    pub fn new(tracks: Vec<Vec<Point2>>, timestamps: Vec<f64>) -> Result<Self, TrajectoryError> {
        if tracks.is_empty() {
            return Err(TrajectoryError::NoTracks);
        }
        if timestamps.first() != Some(&0.0)
            || timestamps.windows(2).any(|w| !(w[1] > w[0]))
            || timestamps.iter().any(|t| !(0.0..=1.0).contains(t))
        {
            return Err(TrajectoryError::BadTimestamps);
        }
        for (i, tr) in tracks.iter().enumerate() {
            if tr.len() != timestamps.len() {
                return Err(TrajectoryError::TrackLength {
                    track: i,
                    got: tr.len(),
                    expected: timestamps.len(),
                });
            }
            if tr.iter().any(|p| !p.is_finite()) {
                return Err(TrajectoryError::NonFinite { track: i });
            }
        }
        Ok(Self { tracks, timestamps })
    }

    /// Timestamps spread evenly over `[0, 1]`.
    pub fn uniform(tracks: Vec<Vec<Point2>>) -> Result<Self, TrajectoryError> {
        let n = tracks.first().map_or(0, Vec::len);
        if n < 2 {
            return Err(TrajectoryError::TooFewSteps { needed: 2, got: n });
        }
        let ts = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Self::new(tracks, ts)
    }

    /// Timestamps `i / fps` seconds, keeping only the frames inside a
    /// one-second window.
    pub fn from_fps(tracks: Vec<Vec<Point2>>, fps: f64) -> Result<Self, TrajectoryError> {
        if !(fps > 0.0) {
            return Err(TrajectoryError::BadTimestamps);
        }
        let n = tracks.first().map_or(0, Vec::len);
        let keep = (0..n).take_while(|&i| i as f64 / fps <= 1.0 + 1e-9).count();
        let ts: Vec<f64> = (0..keep).map(|i| (i as f64 / fps).min(1.0)).collect();
        let tracks = tracks
            .into_iter()
            .map(|mut t| {
                t.truncate(keep);
                t
            })
            .collect();
        Self::new(tracks, ts)
    }

    pub fn tracks(&self) -> &[Vec<Point2>] {
        &self.tracks
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn steps(&self) -> usize {
        self.timestamps.len()
    }
}

/// The five motion parameters plus the anchor point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    pub theta: f64,
    pub a: f64,
    pub psi: f64,
    pub b: f64,
    pub phi: f64,
    pub x0: Point2,
}

impl TrajectoryParams {
    pub fn still(x0: Point2) -> Self {
        Self { theta: 0.0, a: 0.0, psi: 0.0, b: 0.0, phi: 0.0, x0 }
    }

    pub fn translation(x0: Point2, b: f64, phi: f64) -> Self {
        Self { theta: 0.0, a: 0.0, psi: 0.0, b, phi, x0 }
    }

    pub fn rotation(x0: Point2, theta: f64, a: f64, psi: f64) -> Self {
        Self { theta, a, psi, b: 0.0, phi: 0.0, x0 }
    }

    /// Centre of the rotation component.
    pub fn rotation_center(&self) -> Point2 {
        self.x0 - Point2::new(self.psi.cos(), self.psi.sin()) * self.a
    }

    /// Flips negative lengths into the direction angles and wraps both
    /// direction angles into `[0, 2π)`.
    pub fn canonical(mut self) -> Self {
        if self.a < 0.0 {
            self.a = -self.a;
            self.psi += PI;
        }
        if self.b < 0.0 {
            self.b = -self.b;
            self.phi += PI;
        }
        self.psi = wrap_angle(self.psi);
        self.phi = wrap_angle(self.phi);
        self
    }

    fn offset(&self, t: f64) -> (f64, f64) {
        let (s, c) = (self.theta * t).sin_cos();
        let (ux, uy) = (self.a * self.psi.cos(), self.a * self.psi.sin());
        let (wx, wy) = (self.b * self.phi.cos(), self.b * self.phi.sin());
        ((c - 1.0) * ux - s * uy + wx * t, s * ux + (c - 1.0) * uy + wy * t)
    }
}

/// Wraps into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Smallest absolute difference between two angles.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

pub fn eval_trajectory(p: &TrajectoryParams, t: f64) -> Point2 {
    let (dx, dy) = p.offset(t);
    Point2::new(p.x0.x + dx, p.x0.y + dy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFit {
    pub params: TrajectoryParams,
    /// RMS point-to-curve distance over every track sample, in pixels.
    pub residual: f64,
    /// Set when every input point coincides; `params` is then motionless.
    pub degenerate: bool,
}

/// Displacements of the mean track from `x0`, paired with timestamps.
struct FitTarget {
    ts: Vec<f64>,
    disp: Vec<(f64, f64)>,
}

impl FitTarget {
    fn residuals(&self, q: &Vector5<f64>, out: &mut [f64]) {
        let p = TrajectoryParams { theta: q[0], a: q[1], psi: q[2], b: q[3], phi: q[4], x0: Point2::default() };
        for (i, (&t, &(dx, dy))) in self.ts.iter().zip(&self.disp).enumerate() {
            let (fx, fy) = p.offset(t);
            out[2 * i] = fx - dx;
            out[2 * i + 1] = fy - dy;
        }
    }

    fn cost(&self, q: &Vector5<f64>, buf: &mut [f64]) -> f64 {
        self.residuals(q, buf);
        buf.iter().map(|r| r * r).sum()
    }

    /// Optimal `(u, w)` for a fixed rotation, as polar parameters, and the
    /// resulting squared error.
    fn profile(&self, theta: f64) -> (Vector5<f64>, f64) {
        let n = self.ts.len();
        let mut m = DMatrix::<f64>::zeros(2 * n, 4);
        let mut rhs = DVector::<f64>::zeros(2 * n);
        for (i, (&t, &(dx, dy))) in self.ts.iter().zip(&self.disp).enumerate() {
            let (s, c) = (theta * t).sin_cos();
            m[(2 * i, 0)] = c - 1.0;
            m[(2 * i, 1)] = -s;
            m[(2 * i, 2)] = t;
            m[(2 * i + 1, 0)] = s;
            m[(2 * i + 1, 1)] = c - 1.0;
            m[(2 * i + 1, 3)] = t;
            rhs[2 * i] = dx;
            rhs[2 * i + 1] = dy;
        }
        let svd = m.svd(true, true);
        let eps = 1e-9 * svd.singular_values.max();
        let sol = svd.solve(&rhs, eps).unwrap_or_else(|_| DVector::zeros(4));
        let (ux, uy, wx, wy) = (sol[0], sol[1], sol[2], sol[3]);
        let q = Vector5::new(theta, ux.hypot(uy), uy.atan2(ux), wx.hypot(wy), wy.atan2(wx));
        let mut buf = vec![0.0; 2 * n];
        let cost = self.cost(&q, &mut buf);
        (q, cost)
    }

    /// Golden-section search of the profiled cost on `[lo, hi]`.
    fn refine_theta(&self, lo: f64, hi: f64) -> (Vector5<f64>, f64) {
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let (mut lo, mut hi) = (lo, hi);
        let mut x1 = hi - INV_PHI * (hi - lo);
        let mut x2 = lo + INV_PHI * (hi - lo);
        let mut f1 = self.profile(x1).1;
        let mut f2 = self.profile(x2).1;
        for _ in 0..80 {
            if hi - lo < 1e-12 {
                break;
            }
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - INV_PHI * (hi - lo);
                f1 = self.profile(x1).1;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + INV_PHI * (hi - lo);
                f2 = self.profile(x2).1;
            }
        }
        self.profile(0.5 * (lo + hi))
    }

    /// Levenberg-style damped Gauss-Newton with central-difference Jacobian.
    fn polish(&self, start: Vector5<f64>) -> (Vector5<f64>, f64) {
        let m = 2 * self.ts.len();
        let mut r = vec![0.0; m];
        let mut rp = vec![0.0; m];
        let mut rm = vec![0.0; m];
        let mut q = start;
        let mut cost = self.cost(&q, &mut r);
        let mut lambda = 1e-3;
        let mut jac = DMatrix::<f64>::zeros(m, 5);
        for _ in 0..100 {
            if cost < 1e-28 {
                break;
            }
            self.residuals(&q, &mut r);
            for k in 0..5 {
                let h = 1e-7 * q[k].abs().max(1.0);
                let mut qp = q;
                let mut qm = q;
                qp[k] += h;
                qm[k] -= h;
                self.residuals(&qp, &mut rp);
                self.residuals(&qm, &mut rm);
                for i in 0..m {
                    jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let jt = jac.transpose();
            let jtj: Matrix5<f64> = (&jt * &jac).fixed_view::<5, 5>(0, 0).into_owned();
            let g: Vector5<f64> = (&jt * DVector::from_column_slice(&r)).fixed_view::<5, 1>(0, 0).into_owned();
            let mut improved = false;
            for _ in 0..12 {
                let mut a = jtj;
                for k in 0..5 {
                    a[(k, k)] += lambda * (jtj[(k, k)] + 1e-12);
                }
                let Some(step) = a.lu().solve(&(-g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let mut cand = q + step;
                cand[0] = cand[0].clamp(-THETA_LIMIT + 1e-9, THETA_LIMIT - 1e-9);
                let c = self.cost(&cand, &mut rp);
                if c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    q = cand;
                    cost = c;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        (q, cost)
    }
}

/// Least-squares fit of the motion model to every track at once, with the
/// anchor fixed to the mean first point.
///
/// The rotation angle is scanned on a lattice over `(−2π, 2π)` whose
/// offset is derived from `seed`; the best [`FIT_STARTS`] local minima of
/// the profiled cost are refined and polished.
pub fn fit_trajectory(tracks: &TrackSet, seed: u64) -> Result<TrajectoryFit, TrajectoryError> {
    let n = tracks.steps();
    if n < 2 {
        return Err(TrajectoryError::TooFewSteps { needed: 2, got: n });
    }
    let k = tracks.tracks.len() as f64;
    let x0 = tracks.tracks.iter().fold(Point2::default(), |a, t| a + t[0]) * (1.0 / k);

    let extent = tracks
        .tracks
        .iter()
        .flatten()
        .map(|p| p.dist(&x0))
        .fold(0.0, f64::max);
    if extent < DEGENERATE_EXTENT {
        return Ok(TrajectoryFit { params: TrajectoryParams::still(x0), residual: rms(tracks, &TrajectoryParams::still(x0)), degenerate: true });
    }

    let mean: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let s = tracks.tracks.iter().fold(Point2::default(), |a, t| a + t[i]) * (1.0 / k);
            (s.x - x0.x, s.y - x0.y)
        })
        .collect();
    let target = FitTarget { ts: tracks.timestamps.clone(), disp: mean };

    // Lattice over (−2π, 2π), shifted by a seed-derived fraction of a step,
    // always including θ = 0.
    let step = 2.0 * THETA_LIMIT / PROFILE_GRID as f64;
    let shift = (splitmix(seed) >> 11) as f64 / (1u64 << 53) as f64;
    let mut grid: Vec<f64> = (0..PROFILE_GRID)
        .map(|i| -THETA_LIMIT + (i as f64 + 0.5 * (shift + 0.5)) * step)
        .filter(|t| t.abs() < THETA_LIMIT)
        .collect();
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);
    let costs: Vec<f64> = grid.iter().map(|&t| target.profile(t).1).collect();

    let mut minima: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let left = i == 0 || costs[i] <= costs[i - 1];
            let right = i + 1 == grid.len() || costs[i] <= costs[i + 1];
            left && right
        })
        .collect();
    minima.sort_by(|&i, &j| costs[i].total_cmp(&costs[j]).then(grid[i].abs().total_cmp(&grid[j].abs())));
    minima.truncate(FIT_STARTS);

    let mut best: Option<(Vector5<f64>, f64)> = None;
    for &i in &minima {
        let lo = if i == 0 { -THETA_LIMIT + 1e-9 } else { grid[i - 1] };
        let hi = if i + 1 == grid.len() { THETA_LIMIT - 1e-9 } else { grid[i + 1] };
        let mut cand = target.refine_theta(lo, hi);
        let at_grid = target.profile(grid[i]);
        if at_grid.1 <= cand.1 {
            cand = at_grid;
        }
        let polished = target.polish(cand.0);
        if polished.1 < cand.1 {
            cand = polished;
        }
        let better = match &best {
            None => true,
            Some((bq, bc)) => {
                let tol = 1e-12 * bc.max(1e-30);
                cand.1 < bc - tol || ((cand.1 - bc).abs() <= tol && cand.0[0].abs() < bq[0].abs())
            }
        };
        if better {
            best = Some(cand);
        }
    }
    let (q, _) = best.expect("profile grid is never empty");
    let params = TrajectoryParams { theta: q[0], a: q[1], psi: q[2], b: q[3], phi: q[4], x0 }.canonical();
    Ok(TrajectoryFit { params, residual: rms(tracks, &params), degenerate: false })
}

fn rms(tracks: &TrackSet, p: &TrajectoryParams) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for tr in &tracks.tracks {
        for (pt, &t) in tr.iter().zip(&tracks.timestamps) {
            let f = eval_trajectory(p, t);
            let d = pt.dist(&f);
            sum += d * d;
            count += 1;
        }
    }
    (sum / count as f64).sqrt()
}

fn splitmix(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Moves every track point into the observation frame. `chain[i]` maps
/// frame `i` of the track set into that frame.
pub fn project_tracks(raw: &TrackSet, chain: &[Homography]) -> Result<TrackSet, TrajectoryError> {
    if chain.len() != raw.steps() {
        return Err(TrajectoryError::ChainLength { got: chain.len(), expected: raw.steps() });
    }
    let tracks = raw
        .tracks
        .iter()
        .map(|tr| tr.iter().zip(chain).map(|(&p, h)| h.apply(p)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    TrackSet::new(tracks, raw.timestamps.clone())
}

/// Continuous, unit-range encoding of [`TrajectoryParams`]:
/// `[cos θ, sin θ, cos ψ, sin ψ, cos φ, sin φ]` mapped from `[−1, 1]` to
/// `[0, 1]`, then `a` and `b` as fractions of the image diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodedParams(pub [f64; 8]);

fn to_unit(v: f64) -> f64 {
    ((v + 1.0) * 0.5).clamp(0.0, 1.0)
}

fn from_pair(c: f64, s: f64) -> f64 {
    (2.0 * s - 1.0).atan2(2.0 * c - 1.0)
}

pub fn encode_params(p: &TrajectoryParams, diag: f64) -> Result<EncodedParams, TrajectoryError> {
    if !(diag > 0.0) || !diag.is_finite() {
        return Err(TrajectoryError::BadDiagonal);
    }
    for (field, value) in [("a", p.a), ("b", p.b)] {
        if !(0.0..=diag).contains(&value) {
            return Err(TrajectoryError::OutOfRange { field, value, limit: diag });
        }
    }
    let mut e = [0.0; 8];
    for (i, ang) in [p.theta, p.psi, p.phi].into_iter().enumerate() {
        let (s, c) = ang.sin_cos();
        e[2 * i] = to_unit(c);
        e[2 * i + 1] = to_unit(s);
    }
    e[6] = p.a / diag;
    e[7] = p.b / diag;
    Ok(EncodedParams(e))
}

/// Inverse of [`encode_params`]. Angles come back in `(−π, π]`; the anchor
/// is not part of the encoding and is set to the origin.
pub fn decode_params(e: &EncodedParams, diag: f64) -> Result<TrajectoryParams, TrajectoryError> {
    if !(diag > 0.0) || !diag.is_finite() {
        return Err(TrajectoryError::BadDiagonal);
    }
    let v = e.0;
    Ok(TrajectoryParams {
        theta: from_pair(v[0], v[1]),
        psi: from_pair(v[2], v[3]),
        phi: from_pair(v[4], v[5]),
        a: v[6].clamp(0.0, 1.0) * diag,
        b: v[7].clamp(0.0, 1.0) * diag,
        x0: Point2::default(),
    })
}

/// Samples the curve at `samples` uniform times, moves its start to the
/// origin and scales it so the farthest sample is at distance 1.
pub fn normalize_for_eval(p: &TrajectoryParams, samples: usize) -> Vec<Point2> {
    let samples = samples.max(2);
    let start = eval_trajectory(p, 0.0);
    let raw: Vec<Point2> = (0..samples)
        .map(|j| eval_trajectory(p, j as f64 / (samples - 1) as f64) - start)
        .collect();
    let scale = raw.iter().map(Point2::norm).fold(0.0, f64::max);
    if scale <= 1e-12 {
        return vec![Point2::default(); samples];
    }
    raw.into_iter().map(|q| q * (1.0 / scale)).collect()
}
