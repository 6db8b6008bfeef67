//! Slow reference implementations used only to check the library.
#![allow(dead_code)]

use affpipe::geometry::Point2;

/// Closed form written as "rotate about the centre, then translate".
pub fn curve(q: &[f64; 5], x0: (f64, f64), t: f64) -> (f64, f64) {
    let [theta, a, psi, b, phi] = *q;
    let (cx, cy) = (x0.0 - a * psi.cos(), x0.1 - a * psi.sin());
    let (rx, ry) = (x0.0 - cx, x0.1 - cy);
    let ang = theta * t;
    let x = cx + ang.cos() * rx - ang.sin() * ry + b * phi.cos() * t;
    let y = cy + ang.sin() * rx + ang.cos() * ry + b * phi.sin() * t;
    (x, y)
}

pub fn sse(q: &[f64; 5], x0: (f64, f64), pts: &[(f64, f64)], ts: &[f64]) -> f64 {
    pts.iter()
        .zip(ts)
        .map(|(p, &t)| {
            let f = curve(q, x0, t);
            (p.0 - f.0).powi(2) + (p.1 - f.1).powi(2)
        })
        .sum()
}

/// Coarse 5-D grid over the parameter box followed by Hooke-Jeeves
/// pattern search from the best few grid cells. Returns `(params, rms)`.
pub fn grid_fit(pts: &[(f64, f64)], ts: &[f64], extent: f64) -> ([f64; 5], f64) {
    let x0 = pts[0];
    let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> { (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect() };
    let thetas = lin(-6.0, 6.0, 25);
    let lengths = lin(0.0, 2.0 * extent, 9);
    let angles: Vec<f64> = (0..12).map(|i| i as f64 * std::f64::consts::TAU / 12.0).collect();

    let mut cells: Vec<([f64; 5], f64)> = Vec::new();
    for &th in &thetas {
        for &a in &lengths {
            for &psi in &angles {
                for &b in &lengths {
                    for &phi in &angles {
                        let q = [th, a, psi, b, phi];
                        cells.push((q, sse(&q, x0, pts, ts)));
                    }
                }
            }
        }
    }
    cells.sort_by(|x, y| x.1.total_cmp(&y.1));

    let mut best = cells[0];
    for &(start, _) in cells.iter().take(8) {
        let r = pattern_search(start, x0, pts, ts, extent);
        if r.1 < best.1 {
            best = r;
        }
    }
    (best.0, (best.1 / pts.len() as f64).sqrt())
}

fn pattern_search(mut q: [f64; 5], x0: (f64, f64), pts: &[(f64, f64)], ts: &[f64], extent: f64) -> ([f64; 5], f64) {
    let mut f = sse(&q, x0, pts, ts);
    let mut step = [0.25, extent / 8.0, 0.25, extent / 8.0, 0.25];
    for _ in 0..20_000 {
        let mut moved = false;
        for i in 0..5 {
            for dir in [1.0, -1.0] {
                let mut c = q;
                c[i] += dir * step[i];
                let fc = sse(&c, x0, pts, ts);
                if fc < f {
                    q = c;
                    f = fc;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            step.iter_mut().for_each(|s| *s *= 0.5);
            if step.iter().all(|&s| s < 1e-10) {
                break;
            }
        }
    }
    (q, f)
}

pub fn to_tuples(p: &[Point2]) -> Vec<(f64, f64)> {
    p.iter().map(|p| (p.x, p.y)).collect()
}

/// Minimal DTW cost by enumerating every monotone alignment path.
pub fn dtw_brute(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    fn go(a: &[(f64, f64)], b: &[(f64, f64)], i: usize, j: usize) -> f64 {
        let d = ((a[i].0 - b[j].0).powi(2) + (a[i].1 - b[j].1).powi(2)).sqrt();
        if i + 1 == a.len() && j + 1 == b.len() {
            return d;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() {
            best = best.min(go(a, b, i + 1, j));
        }
        if j + 1 < b.len() {
            best = best.min(go(a, b, i, j + 1));
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(go(a, b, i + 1, j + 1));
        }
        d + best
    }
    go(a, b, 0, 0)
}

/// ROC area by sweeping every distinct prediction value as a threshold.
pub fn auc_sweep(pred: &[f64], fix: &[usize]) -> f64 {
    let mut is_fix = vec![false; pred.len()];
    for &i in fix {
        is_fix[i] = true;
    }
    let nf = is_fix.iter().filter(|&&f| f).count() as f64;
    let nn = pred.len() as f64 - nf;
    let mut th: Vec<f64> = fix.iter().map(|&i| pred[i]).collect();
    th.sort_by(|a, b| b.total_cmp(a));
    th.dedup();
    let mut roc = vec![(0.0, 0.0)];
    for &t in &th {
        let tp = (0..pred.len()).filter(|&i| is_fix[i] && pred[i] >= t).count() as f64;
        let fp = (0..pred.len()).filter(|&i| !is_fix[i] && pred[i] >= t).count() as f64;
        roc.push((fp / nn, tp / nf));
    }
    roc.push((1.0, 1.0));
    roc.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}
