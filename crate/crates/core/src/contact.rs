//! Contact-point heatmaps.
//!
//! The contact region in the interaction frame is the set of mask pixels
//! inside the object box. It is projected into the observation frame,
//! summarized by a 2-D Gaussian mixture, resampled, and blurred into a
//! peak-normalized heatmap.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, GeometryError, Homography, Point2};

pub const DEFAULT_GMM_COMPONENTS: usize = 3;
pub const DEFAULT_SAMPLES: usize = 30;
pub const DEFAULT_SIGMA: f64 = 4.0;
pub const DEFAULT_GMM_MAX_ITERS: usize = 200;

/// Smallest eigenvalue allowed in a mixture covariance, in px².
pub const COVARIANCE_FLOOR: f64 = 1e-4;
const LL_TOLERANCE: f64 = 1e-6;
const MIN_RESPONSIBILITY: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("mask and box do not intersect")]
    EmptyIntersection,
    #[error("all projected points fall outside the frame")]
    AllPointsOutOfFrame,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("mask data length {len} does not match {width}x{height}")]
    MaskShape { width: usize, height: usize, len: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ContactError> {
        if bits.len() != width * height {
            return Err(ContactError::MaskShape { width, height, len: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, bits: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Row-major float grid. Pixel `(i, j)` is centred at `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == width * height).then_some(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// First pixel (row-major) holding the maximum value.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| (i % self.width, i / self.width))
    }
}

/// Pixel centres where the mask is set and that lie inside `bbox`.
pub fn intersect_mask_bbox(mask: &BinaryMask, bbox: &BBox) -> Result<Vec<Point2>, ContactError> {
    let mut pts = Vec::new();
    for y in 0..mask.height {
        for x in 0..mask.width {
            let p = Point2::new(x as f64, y as f64);
            if mask.get(x, y) && bbox.contains(p) {
                pts.push(p);
            }
        }
    }
    if pts.is_empty() {
        return Err(ContactError::EmptyIntersection);
    }
    Ok(pts)
}

/// Projects points through `h`, keeping those inside `[0, width) × [0, height)`.
pub fn project_region(
    pts: &[Point2],
    h: &Homography,
    width: usize,
    height: usize,
) -> Result<Vec<Point2>, ContactError> {
    let (w, hgt) = (width as f64, height as f64);
    let mut out = Vec::with_capacity(pts.len());
    for &p in pts {
        let q = h.apply(p)?;
        if q.x >= 0.0 && q.x < w && q.y >= 0.0 && q.y < hgt {
            out.push(q);
        }
    }
    if out.is_empty() {
        return Err(ContactError::AllPointsOutOfFrame);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Point2>,
    /// Each covariance as `[[sxx, sxy], [sxy, syy]]`.
    pub covariances: Vec<[[f64; 2]; 2]>,
}

impl GaussianMixture {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    fn cov(&self, j: usize) -> Matrix2<f64> {
        let c = self.covariances[j];
        Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1])
    }

    /// Per-component log density plus log weight at `p`.
    fn component_log_terms(&self, p: Point2, cache: &[ComponentCache], out: &mut [f64]) {
        for (j, c) in cache.iter().enumerate() {
            let d = Vector2::new(p.x - self.means[j].x, p.y - self.means[j].y);
            let m = d.dot(&(c.inv * d));
            out[j] = c.log_weight - c.log_norm - 0.5 * m;
        }
    }

    fn cache(&self) -> Vec<ComponentCache> {
        (0..self.k())
            .map(|j| {
                let cov = self.cov(j);
                let det = cov.determinant();
                ComponentCache {
                    inv: cov.try_inverse().unwrap_or_else(Matrix2::identity),
                    log_norm: (2.0 * std::f64::consts::PI).ln() + 0.5 * det.ln(),
                    log_weight: self.weights[j].ln(),
                }
            })
            .collect()
    }

    /// Total log-likelihood of `pts`.
    pub fn log_likelihood(&self, pts: &[Point2]) -> f64 {
        let cache = self.cache();
        let mut terms = vec![0.0; self.k()];
        pts.iter()
            .map(|&p| {
                self.component_log_terms(p, &cache, &mut terms);
                log_sum_exp(&terms)
            })
            .sum()
    }
}

struct ComponentCache {
    inv: Matrix2<f64>,
    log_norm: f64,
    log_weight: f64,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Clamps eigenvalues of a symmetric 2×2 matrix from below.
fn floor_covariance(c: Matrix2<f64>) -> Matrix2<f64> {
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| v.max(COVARIANCE_FLOOR));
    let q = eig.eigenvectors;
    let out = q * Matrix2::from_diagonal(&vals) * q.transpose();
    (out + out.transpose()) * 0.5
}

fn to_rows(c: Matrix2<f64>) -> [[f64; 2]; 2] {
    [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub mixture: GaussianMixture,
    /// Log-likelihood evaluated after every EM step, starting with the
    /// initial model.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

// k-means++ seeding over distinct points.
fn seed_means(pts: &[Point2], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let mut means = vec![pts[rng.random_range(0..pts.len())]];
    let mut d2: Vec<f64> = pts.iter().map(|p| sq_dist(p, &means[0])).collect();
    while means.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = pts.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            rng.random_range(0..pts.len())
        };
        let m = pts[next];
        for (d, p) in d2.iter_mut().zip(pts) {
            *d = d.min(sq_dist(p, &m));
        }
        means.push(m);
    }
    means
}

fn sq_dist(a: &Point2, b: &Point2) -> f64 {
    let (dx, dy) = (a.x - b.x, a.y - b.y);
    dx * dx + dy * dy
}

/// Full-covariance EM. Covariance eigenvalues are floored at
/// [`COVARIANCE_FLOOR`]; iteration stops when the log-likelihood gain drops
/// below 1e-6 or after `max_iters` steps.
pub fn fit_gmm(pts: &[Point2], k: usize, max_iters: usize, seed: u64) -> Result<GmmFit, ContactError> {
    if k == 0 || pts.len() < k {
        return Err(ContactError::TooFewPoints { needed: k.max(1), got: pts.len() });
    }
    let n = pts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = seed_means(pts, k, &mut rng);

    // Initial covariance: pooled spread of the data.
    let mean_all = pts.iter().fold(Point2::default(), |a, &p| a + p) * (1.0 / n as f64);
    let mut pooled = Matrix2::zeros();
    for p in pts {
        let d = Vector2::new(p.x - mean_all.x, p.y - mean_all.y);
        pooled += d * d.transpose();
    }
    let pooled = floor_covariance(pooled / n as f64);

    let mut gmm = GaussianMixture {
        weights: vec![1.0 / k as f64; k],
        means,
        covariances: vec![to_rows(pooled); k],
    };

    let mut resp = vec![0.0; n * k];
    let mut terms = vec![0.0; k];
    let mut lls = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let e_step = |gmm: &GaussianMixture, resp: &mut [f64], terms: &mut [f64]| -> f64 {
        let cache = gmm.cache();
        let mut ll = 0.0;
        for (i, &p) in pts.iter().enumerate() {
            gmm.component_log_terms(p, &cache, terms);
            let lse = log_sum_exp(terms);
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (terms[j] - lse).exp();
            }
        }
        ll
    };

    let mut ll = e_step(&gmm, &mut resp, &mut terms);
    lls.push(ll);
    while iterations < max_iters {
        iterations += 1;
        // M step
        for j in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            gmm.weights[j] = nk / n as f64;
            if nk < MIN_RESPONSIBILITY {
                // Component carries no mass; its parameters do not affect
                // the likelihood, so leave them in place.
                continue;
            }
            let mut mx = 0.0;
            let mut my = 0.0;
            for (i, p) in pts.iter().enumerate() {
                let r = resp[i * k + j];
                mx += r * p.x;
                my += r * p.y;
            }
            let mu = Point2::new(mx / nk, my / nk);
            let mut s = Matrix2::zeros();
            for (i, p) in pts.iter().enumerate() {
                let d = Vector2::new(p.x - mu.x, p.y - mu.y);
                s += d * d.transpose() * resp[i * k + j];
            }
            gmm.means[j] = mu;
            gmm.covariances[j] = to_rows(floor_covariance(s / nk));
        }
        let wsum: f64 = gmm.weights.iter().sum();
        gmm.weights.iter_mut().for_each(|w| *w /= wsum);

        let next = e_step(&gmm, &mut resp, &mut terms);
        lls.push(next);
        let gain = next - ll;
        ll = next;
        if gain.abs() < LL_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(GmmFit { mixture: gmm, log_likelihoods: lls, iterations, converged })
}

/// Draws `n` i.i.d. samples: a component by weight, then a point from it.
pub fn sample_contact_points(g: &GaussianMixture, n: usize, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chol: Vec<Matrix2<f64>> = (0..g.k())
        .map(|j| {
            g.cov(j)
                .cholesky()
                .map(|c| c.l())
                .unwrap_or_else(|| Matrix2::identity() * COVARIANCE_FLOOR.sqrt())
        })
        .collect();
    let total: f64 = g.weights.iter().sum();
    (0..n)
        .map(|_| {
            let mut r = rng.random::<f64>() * total;
            let mut comp = g.k() - 1;
            for (j, &w) in g.weights.iter().enumerate() {
                if r < w {
                    comp = j;
                    break;
                }
                r -= w;
            }
            let z = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let d = chol[comp] * z;
            Point2::new(g.means[comp].x + d.x, g.means[comp].y + d.y)
        })
        .collect()
}

/// Sum of isotropic Gaussians truncated at 3σ, scaled to peak 1.
pub fn rasterize_heatmap(pts: &[Point2], width: usize, height: usize, sigma: f64) -> Heatmap {
    let mut hm = Heatmap::zeros(width, height);
    if width == 0 || height == 0 || !(sigma > 0.0) {
        return hm;
    }
    let radius = 3.0 * sigma;
    let inv = 1.0 / (2.0 * sigma * sigma);
    for p in pts.iter().filter(|p| p.is_finite()) {
        let x0 = (p.x - radius).ceil().max(0.0);
        let x1 = (p.x + radius).floor().min(width as f64 - 1.0);
        let y0 = (p.y - radius).ceil().max(0.0);
        let y1 = (p.y + radius).floor().min(height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for y in y0 as usize..=y1 as usize {
            let dy = y as f64 - p.y;
            for x in x0 as usize..=x1 as usize {
                let dx = x as f64 - p.x;
                let r2 = dx * dx + dy * dy;
                if r2 <= radius * radius {
                    hm.values[y * width + x] += (-r2 * inv).exp();
                }
            }
        }
    }
    let peak = hm.max();
    if peak > 0.0 {
        hm.values.iter_mut().for_each(|v| *v = (*v / peak).clamp(0.0, 1.0));
    }
    hm
}
