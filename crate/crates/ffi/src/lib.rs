//! C interface to the affpipe geometry, trajectory, heatmap and metric
//! routines.
//!
//! Every function returns an [`AffStatus`]; on failure a message is
//! available from [`aff_last_error_message`] on the same thread. Objects
//! handed out as pointers are owned by the caller and released with the
//! matching `*_free` function.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use affpipe::contact::{rasterize_heatmap, Heatmap};
use affpipe::geometry::{
    chain_homographies, estimate_homography_dlt, project_points, ransac_homography, CorrespondenceSet, GeometryError,
    Homography, Point2,
};
use affpipe::metrics::{self, FixationSet, MetricError};
use affpipe::trajectory::{eval_trajectory, fit_trajectory, TrackSet, TrajectoryError, TrajectoryParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    TooFewPairs = 3,
    DegenerateConfiguration = 4,
    NoConsensus = 5,
    PointAtInfinity = 6,
    Singular = 7,
    DimensionMismatch = 8,
    ZeroMassMap = 9,
    ZeroVarianceMap = 10,
    EmptyInput = 11,
    Panic = 99,
}

/// Opaque 3×3 homography.
pub struct AffHomography(Homography);

/// Opaque row-major heatmap.
pub struct AffHeatmap(Heatmap);

/// Motion parameters. Angles in radians, lengths in pixels.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AffTrajectoryParams {
    pub theta: f64,
    pub a: f64,
    pub psi: f64,
    pub b: f64,
    pub phi: f64,
    pub x0: f64,
    pub y0: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AffTrajectoryFit {
    pub params: AffTrajectoryParams,
    /// RMS distance from the track points to the fitted curve.
    pub residual: f64,
    /// Non-zero when all input points coincide.
    pub degenerate: u8,
}

impl From<AffTrajectoryParams> for TrajectoryParams {
    fn from(p: AffTrajectoryParams) -> Self {
        TrajectoryParams { theta: p.theta, a: p.a, psi: p.psi, b: p.b, phi: p.phi, x0: Point2::new(p.x0, p.y0) }
    }
}

impl From<TrajectoryParams> for AffTrajectoryParams {
    fn from(p: TrajectoryParams) -> Self {
        AffTrajectoryParams { theta: p.theta, a: p.a, psi: p.psi, b: p.b, phi: p.phi, x0: p.x0.x, y0: p.x0.y }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(AffStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(AffStatus::NullPointer, format!("{what} is null"))
    }

    fn arg(msg: impl Into<String>) -> Self {
        Failure(AffStatus::InvalidArgument, msg.into())
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        let code = match e {
            GeometryError::TooFewPairs { .. } | GeometryError::FilteredBelowMinimum { .. } => AffStatus::TooFewPairs,
            GeometryError::DegenerateConfiguration => AffStatus::DegenerateConfiguration,
            GeometryError::NoConsensus { .. } => AffStatus::NoConsensus,
            GeometryError::PointAtInfinity { .. } => AffStatus::PointAtInfinity,
            GeometryError::Singular => AffStatus::Singular,
            GeometryError::EmptyChain => AffStatus::EmptyInput,
        };
        Failure(code, e.to_string())
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        let code = match e {
            MetricError::DimensionMismatch(..) | MetricError::LengthMismatch(..) => AffStatus::DimensionMismatch,
            MetricError::ZeroMassMap => AffStatus::ZeroMassMap,
            MetricError::ZeroVarianceMap => AffStatus::ZeroVarianceMap,
            MetricError::EmptyFixations | MetricError::EmptySequence => AffStatus::EmptyInput,
        };
        Failure(code, e.to_string())
    }
}

impl From<TrajectoryError> for Failure {
    fn from(e: TrajectoryError) -> Self {
        match e {
            TrajectoryError::Geometry(g) => g.into(),
            other => Failure(AffStatus::InvalidArgument, other.to_string()),
        }
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AffStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AffStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            AffStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn points(xy: *const f64, n: usize, what: &str) -> Result<Vec<Point2>, Failure> {
    let n2 = n.checked_mul(2).ok_or_else(|| Failure::arg("point count overflows"))?;
    Ok(slice(xy, n2, what)?.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect())
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

fn correspondences(pairs: &[f64]) -> CorrespondenceSet {
    let src: Vec<Point2> = pairs.chunks_exact(4).map(|c| Point2::new(c[0], c[1])).collect();
    let dst: Vec<Point2> = pairs.chunks_exact(4).map(|c| Point2::new(c[2], c[3])).collect();
    CorrespondenceSet::from_points(&src, &dst)
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn aff_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aff_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a homography from 9 row-major entries; the result is scaled so
/// the bottom-right entry is 1.
///
/// # Safety
/// `rows` must point to 9 doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_homography_from_rows(rows: *const f64, out: *mut *mut AffHomography) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let r = slice(rows, 9, "rows")?;
        let h = Homography::from_rows([[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]])?;
        *out = Box::into_raw(Box::new(AffHomography(h)));
        Ok(())
    })
}

/// Writes the 9 row-major entries of `h`.
///
/// # Safety
/// `h` must be a live handle and `rows` must have room for 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn aff_homography_rows(h: *const AffHomography, rows: *mut f64) -> AffStatus {
    guard(|| {
        let h = handle(h, "h")?;
        let out = slice_mut(rows, 9, "rows")?;
        for (o, v) in out.iter_mut().zip(h.0.to_rows().iter().flatten()) {
            *o = *v;
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aff_homography_free(h: *mut AffHomography) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Normalized DLT over `n` pairs laid out as `[sx, sy, dx, dy]`.
///
/// # Safety
/// `pairs` must hold `4 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_homography_dlt(pairs: *const f64, n: usize, out: *mut *mut AffHomography) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let n4 = n.checked_mul(4).ok_or_else(|| Failure::arg("pair count overflows"))?;
        let h = estimate_homography_dlt(&correspondences(slice(pairs, n4, "pairs")?))?;
        *out = Box::into_raw(Box::new(AffHomography(h)));
        Ok(())
    })
}

/// Seeded RANSAC with a DLT refit on the inliers. `inliers` may be null.
///
/// # Safety
/// `pairs` must hold `4 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_homography_ransac(
    pairs: *const f64,
    n: usize,
    threshold: f64,
    iterations: usize,
    seed: u64,
    out: *mut *mut AffHomography,
    inliers: *mut usize,
) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if !(threshold > 0.0) {
            return Err(Failure::arg("threshold must be positive"));
        }
        let n4 = n.checked_mul(4).ok_or_else(|| Failure::arg("pair count overflows"))?;
        let r = ransac_homography(&correspondences(slice(pairs, n4, "pairs")?), threshold, iterations, seed)?;
        if let Some(c) = inliers.as_mut() {
            *c = r.inliers.len();
        }
        *out = Box::into_raw(Box::new(AffHomography(r.homography)));
        Ok(())
    })
}

/// Composes `links[n-1] · … · links[0]`.
///
/// # Safety
/// `links` must hold `n` live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_homography_chain(
    links: *const *const AffHomography,
    n: usize,
    out: *mut *mut AffHomography,
) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let hs = slice(links, n, "links")?
            .iter()
            .map(|&p| handle(p, "link").map(|h| h.0))
            .collect::<Result<Vec<_>, _>>()?;
        *out = Box::into_raw(Box::new(AffHomography(chain_homographies(&hs)?)));
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_homography_inverse(h: *const AffHomography, out: *mut *mut AffHomography) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let inv = handle(h, "h")?.0.inverse()?;
        *out = Box::into_raw(Box::new(AffHomography(inv)));
        Ok(())
    })
}

/// Projects `n` points (`[x, y]` pairs) through `h` into `out_xy`.
///
/// # Safety
/// `xy` and `out_xy` must each hold `2 * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn aff_project_points(
    h: *const AffHomography,
    xy: *const f64,
    n: usize,
    out_xy: *mut f64,
) -> AffStatus {
    guard(|| {
        let h = handle(h, "h")?;
        let pts = points(xy, n, "xy")?;
        let projected = project_points(&h.0, &pts)?;
        let out = slice_mut(out_xy, 2 * n, "out_xy")?;
        for (o, p) in out.chunks_exact_mut(2).zip(&projected) {
            o[0] = p.x;
            o[1] = p.y;
        }
        Ok(())
    })
}

/// Evaluates the motion model at normalized time `t`.
///
/// # Safety
/// `p` must be readable and `out_xy` must hold 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn aff_trajectory_eval(p: *const AffTrajectoryParams, t: f64, out_xy: *mut f64) -> AffStatus {
    guard(|| {
        let p: TrajectoryParams = (*handle(p, "p")?).into();
        let out = slice_mut(out_xy, 2, "out_xy")?;
        let q = eval_trajectory(&p, t);
        out[0] = q.x;
        out[1] = q.y;
        Ok(())
    })
}

/// Fits the motion model to `n_tracks` tracks of `n_steps` points each,
/// stored track-major as `[x, y]` pairs. With `timestamps` null the steps
/// are spread evenly over `[0, 1]`.
///
/// # Safety
/// `xy` must hold `2 * n_tracks * n_steps` doubles, `timestamps` (if not
/// null) `n_steps` doubles, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_trajectory_fit(
    xy: *const f64,
    n_tracks: usize,
    n_steps: usize,
    timestamps: *const f64,
    seed: u64,
    out: *mut AffTrajectoryFit,
) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let total = n_tracks.checked_mul(n_steps).ok_or_else(|| Failure::arg("track size overflows"))?;
        let pts = points(xy, total, "xy")?;
        let tracks: Vec<Vec<Point2>> = pts.chunks(n_steps.max(1)).map(<[Point2]>::to_vec).collect();
        let set = if timestamps.is_null() {
            TrackSet::uniform(tracks)?
        } else {
            TrackSet::new(tracks, slice(timestamps, n_steps, "timestamps")?.to_vec())?
        };
        let fit = fit_trajectory(&set, seed)?;
        *out = AffTrajectoryFit { params: fit.params.into(), residual: fit.residual, degenerate: fit.degenerate as u8 };
        Ok(())
    })
}

/// Heatmap from `width * height` row-major values.
///
/// # Safety
/// `values` must hold `width * height` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_heatmap_new(
    width: usize,
    height: usize,
    values: *const f64,
    out: *mut *mut AffHeatmap,
) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let n = width.checked_mul(height).ok_or_else(|| Failure::arg("size overflows"))?;
        let v = slice(values, n, "values")?.to_vec();
        let hm = Heatmap::new(width, height, v).ok_or_else(|| Failure::arg("value count does not match size"))?;
        *out = Box::into_raw(Box::new(AffHeatmap(hm)));
        Ok(())
    })
}

/// Sum of Gaussians (σ pixels, truncated at 3σ) at `n` points, scaled to
/// peak 1.
///
/// # Safety
/// `xy` must hold `2 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_heatmap_rasterize(
    xy: *const f64,
    n: usize,
    width: usize,
    height: usize,
    sigma: f64,
    out: *mut *mut AffHeatmap,
) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if !(sigma > 0.0) {
            return Err(Failure::arg("sigma must be positive"));
        }
        let hm = rasterize_heatmap(&points(xy, n, "xy")?, width, height, sigma);
        *out = Box::into_raw(Box::new(AffHeatmap(hm)));
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn aff_heatmap_width(h: *const AffHeatmap) -> usize {
    h.as_ref().map_or(0, |h| h.0.width())
}

/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn aff_heatmap_height(h: *const AffHeatmap) -> usize {
    h.as_ref().map_or(0, |h| h.0.height())
}

/// Copies the row-major values into `out`, which must hold `len` doubles
/// with `len` equal to width × height.
///
/// # Safety
/// `h` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aff_heatmap_values(h: *const AffHeatmap, out: *mut f64, len: usize) -> AffStatus {
    guard(|| {
        let h = handle(h, "h")?;
        if len != h.0.values().len() {
            return Err(Failure(AffStatus::DimensionMismatch, format!("expected {} values, got room for {len}", h.0.values().len())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(h.0.values());
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aff_heatmap_free(h: *mut AffHeatmap) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

unsafe fn heatmap_metric(
    a: *const AffHeatmap,
    b: *const AffHeatmap,
    out: *mut f64,
    f: fn(&Heatmap, &Heatmap) -> Result<f64, MetricError>,
) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = f(&handle(a, "pred")?.0, &handle(b, "gt")?.0)?;
        Ok(())
    })
}

/// Histogram intersection of the two sum-normalized maps.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_metric_sim(pred: *const AffHeatmap, gt: *const AffHeatmap, out: *mut f64) -> AffStatus {
    heatmap_metric(pred, gt, out, metrics::sim)
}

/// Pearson correlation of the two maps.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_metric_cc(pred: *const AffHeatmap, gt: *const AffHeatmap, out: *mut f64) -> AffStatus {
    heatmap_metric(pred, gt, out, metrics::cc)
}

/// AUC-Judd of `pred` against `n` fixation points (`[x, y]` pairs).
///
/// # Safety
/// `pred` must be live, `fix_xy` must hold `2 * n` doubles and `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_metric_auc_judd(
    pred: *const AffHeatmap,
    fix_xy: *const f64,
    n: usize,
    out: *mut f64,
) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let pred = handle(pred, "pred")?;
        let fix = FixationSet::new(points(fix_xy, n, "fix_xy")?, pred.0.width(), pred.0.height());
        *out = metrics::auc_judd(&pred.0, &fix)?;
        Ok(())
    })
}

/// Mean pointwise distance between two sequences of `n` points.
///
/// # Safety
/// `a` and `b` must each hold `2 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_metric_ade(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = metrics::ade(&points(a, n, "a")?, &points(b, n, "b")?)?;
        Ok(())
    })
}

/// Dynamic time warping cost. `path_len` may be null.
///
/// # Safety
/// `a` must hold `2 * na` doubles, `b` `2 * nb`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aff_metric_dtw(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut f64,
    path_len: *mut usize,
) -> AffStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let r = metrics::dtw_full(&points(a, na, "a")?, &points(b, nb, "b")?)?;
        *out = r.cost;
        if let Some(l) = path_len.as_mut() {
            *l = r.path_len;
        }
        Ok(())
    })
}
