//! Heatmap and trajectory evaluation metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::Heatmap;
use crate::geometry::Point2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("maps differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("map has no positive mass")]
    ZeroMassMap,
    #[error("map has zero variance")]
    ZeroVarianceMap,
    #[error("no fixations inside the frame")]
    EmptyFixations,
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty sequence")]
    EmptySequence,
}

/// Ground-truth keypoints for AUC-Judd.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationSet {
    pub points: Vec<Point2>,
    pub width: usize,
    pub height: usize,
}

impl FixationSet {
    pub fn new(points: Vec<Point2>, width: usize, height: usize) -> Self {
        Self { points, width, height }
    }

    /// Distinct in-frame pixel indices, nearest pixel centre.
    pub fn pixel_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .points
            .iter()
            .filter(|p| p.is_finite())
            .map(|p| (p.x.round(), p.y.round()))
            .filter(|&(x, y)| x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64)
            .map(|(x, y)| y as usize * self.width + x as usize)
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auc_j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ade: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dtw: Option<f64>,
    /// DTW divided by the optimal warping path length.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dtw_normalized: Option<f64>,
}

fn check_dims(a: &Heatmap, b: &Heatmap) -> Result<(), MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

fn mass_normalized(h: &Heatmap) -> Result<Vec<f64>, MetricError> {
    let total: f64 = h.values().iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(MetricError::ZeroMassMap);
    }
    Ok(h.values().iter().map(|v| v / total).collect())
}

/// Histogram intersection of the two maps after normalizing each to unit mass.
pub fn sim(pred: &Heatmap, gt: &Heatmap) -> Result<f64, MetricError> {
    check_dims(pred, gt)?;
    let p = mass_normalized(pred)?;
    let q = mass_normalized(gt)?;
    Ok(p.iter().zip(&q).map(|(a, b)| a.min(*b)).sum::<f64>().clamp(0.0, 1.0))
}

fn standardized(v: &[f64]) -> Result<Vec<f64>, MetricError> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return Err(MetricError::ZeroVarianceMap);
    }
    let sd = var.sqrt();
    Ok(v.iter().map(|x| (x - mean) / sd).collect())
}

/// Pearson correlation of the flattened maps.
pub fn cc(pred: &Heatmap, gt: &Heatmap) -> Result<f64, MetricError> {
    check_dims(pred, gt)?;
    let p = standardized(pred.values())?;
    let q = standardized(gt.values())?;
    let n = p.len() as f64;
    Ok((p.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / n).clamp(-1.0, 1.0))
}

/// AUC-Judd: ROC thresholds are the predicted values at the fixation
/// pixels; true positives are fixations at or above the threshold, false
/// positives are the remaining pixels at or above it.
pub fn auc_judd(pred: &Heatmap, fix: &FixationSet) -> Result<f64, MetricError> {
    let fixations = FixationSet { width: pred.width(), height: pred.height(), ..fix.clone() }.pixel_indices();
    if fixations.is_empty() {
        return Err(MetricError::EmptyFixations);
    }
    let values = pred.values();
    let n_fix = fixations.len();
    let n_other = values.len() - n_fix;

    let mut is_fix = vec![false; values.len()];
    for &i in &fixations {
        is_fix[i] = true;
    }
    let mut thresholds: Vec<f64> = fixations.iter().map(|&i| values[i]).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut others: Vec<f64> = values.iter().zip(&is_fix).filter(|(_, f)| !**f).map(|(v, _)| *v).collect();
    others.sort_by(|a, b| b.total_cmp(a));
    let mut fix_vals: Vec<f64> = fixations.iter().map(|&i| values[i]).collect();
    fix_vals.sort_by(|a, b| b.total_cmp(a));

    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let (mut fi, mut oi) = (0, 0);
    for th in thresholds {
        while fi < fix_vals.len() && fix_vals[fi] >= th {
            fi += 1;
        }
        while oi < others.len() && others[oi] >= th {
            oi += 1;
        }
        tpr.push(fi as f64 / n_fix as f64);
        fpr.push(if n_other == 0 { 0.0 } else { oi as f64 / n_other as f64 });
    }
    tpr.push(1.0);
    fpr.push(1.0);

    let area = fpr
        .windows(2)
        .zip(tpr.windows(2))
        .map(|(f, t)| (f[1] - f[0]) * (t[1] + t[0]) * 0.5)
        .sum::<f64>();
    Ok(area.clamp(0.0, 1.0))
}

/// Mean pointwise Euclidean distance between equal-length sequences.
pub fn ade(a: &[Point2], b: &[Point2]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricError::EmptySequence);
    }
    Ok(a.iter().zip(b).map(|(p, q)| p.dist(q)).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtwResult {
    pub cost: f64,
    /// Number of cells on the optimal warping path.
    pub path_len: usize,
}

impl DtwResult {
    pub fn normalized(&self) -> f64 {
        self.cost / self.path_len as f64
    }
}

/// Unconstrained DTW with Euclidean local cost. Ties between equal-cost
/// predecessors resolve to the shorter path.
pub fn dtw_full(a: &[Point2], b: &[Point2]) -> Result<DtwResult, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySequence);
    }
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut cost = vec![f64::INFINITY; (n + 1) * w];
    let mut len = vec![0usize; (n + 1) * w];
    cost[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let d = a[i - 1].dist(&b[j - 1]);
            let cands = [((i - 1) * w + j - 1), ((i - 1) * w + j), (i * w + j - 1)];
            let best = cands
                .into_iter()
                .min_by(|&x, &y| cost[x].total_cmp(&cost[y]).then(len[x].cmp(&len[y])))
                .expect("three candidates");
            cost[i * w + j] = d + cost[best];
            len[i * w + j] = len[best] + 1;
        }
    }
    Ok(DtwResult { cost: cost[n * w + m], path_len: len[n * w + m] })
}

pub fn dtw(a: &[Point2], b: &[Point2]) -> Result<f64, MetricError> {
    dtw_full(a, b).map(|r| r.cost)
}

/// Resamples a polyline to `n` points, uniformly in its index parameter.
pub fn resample(pts: &[Point2], n: usize) -> Result<Vec<Point2>, MetricError> {
    match pts.len() {
        0 => Err(MetricError::EmptySequence),
        1 => Ok(vec![pts[0]; n]),
        len => Ok((0..n)
            .map(|j| {
                let s = if n == 1 { 0.0 } else { j as f64 * (len - 1) as f64 / (n - 1) as f64 };
                let i = (s.floor() as usize).min(len - 2);
                let f = s - i as f64;
                pts[i] * (1.0 - f) + pts[i + 1] * f
            })
            .collect()),
    }
}
