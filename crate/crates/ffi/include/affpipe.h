#ifndef AFFPIPE_H
#define AFFPIPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AffStatus {
  AFF_STATUS_OK = 0,
  AFF_STATUS_NULL_POINTER = 1,
  AFF_STATUS_INVALID_ARGUMENT = 2,
  AFF_STATUS_TOO_FEW_PAIRS = 3,
  AFF_STATUS_DEGENERATE_CONFIGURATION = 4,
  AFF_STATUS_NO_CONSENSUS = 5,
  AFF_STATUS_POINT_AT_INFINITY = 6,
  AFF_STATUS_SINGULAR = 7,
  AFF_STATUS_DIMENSION_MISMATCH = 8,
  AFF_STATUS_ZERO_MASS_MAP = 9,
  AFF_STATUS_ZERO_VARIANCE_MAP = 10,
  AFF_STATUS_EMPTY_INPUT = 11,
  AFF_STATUS_PANIC = 99,
} AffStatus;

/**
 * Opaque row-major heatmap.
 */
typedef struct AffHeatmap AffHeatmap;

/**
 * Opaque 3×3 homography.
 */
typedef struct AffHomography AffHomography;

/**
 * Motion parameters. Angles in radians, lengths in pixels.
 */
typedef struct AffTrajectoryParams {
  double theta;
  double a;
  double psi;
  double b;
  double phi;
  double x0;
  double y0;
} AffTrajectoryParams;

typedef struct AffTrajectoryFit {
  struct AffTrajectoryParams params;
  /**
   * RMS distance from the track points to the fitted curve.
   */
  double residual;
  /**
   * Non-zero when all input points coincide.
   */
  uint8_t degenerate;
} AffTrajectoryFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *aff_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aff_version(void);

/**
 * Builds a homography from 9 row-major entries; the result is scaled so
 * the bottom-right entry is 1.
 *
 * # Safety
 * `rows` must point to 9 doubles and `out` must be writable.
 */
enum AffStatus aff_homography_from_rows(const double *rows, struct AffHomography **out);

/**
 * Writes the 9 row-major entries of `h`.
 *
 * # Safety
 * `h` must be a live handle and `rows` must have room for 9 doubles.
 */
enum AffStatus aff_homography_rows(const struct AffHomography *h, double *rows);

/**
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void aff_homography_free(struct AffHomography *h);

/**
 * Normalized DLT over `n` pairs laid out as `[sx, sy, dx, dy]`.
 *
 * # Safety
 * `pairs` must hold `4 * n` doubles; `out` must be writable.
 */
enum AffStatus aff_homography_dlt(const double *pairs, size_t n, struct AffHomography **out);

/**
 * Seeded RANSAC with a DLT refit on the inliers. `inliers` may be null.
 *
 * # Safety
 * `pairs` must hold `4 * n` doubles; `out` must be writable.
 */
enum AffStatus aff_homography_ransac(const double *pairs,
                                     size_t n,
                                     double threshold,
                                     size_t iterations,
                                     uint64_t seed,
                                     struct AffHomography **out,
                                     size_t *inliers);

/**
 * Composes `links[n-1] · … · links[0]`.
 *
 * # Safety
 * `links` must hold `n` live handles; `out` must be writable.
 */
enum AffStatus aff_homography_chain(const struct AffHomography *const *links,
                                    size_t n,
                                    struct AffHomography **out);

/**
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum AffStatus aff_homography_inverse(const struct AffHomography *h, struct AffHomography **out);

/**
 * Projects `n` points (`[x, y]` pairs) through `h` into `out_xy`.
 *
 * # Safety
 * `xy` and `out_xy` must each hold `2 * n` doubles.
 */
enum AffStatus aff_project_points(const struct AffHomography *h,
                                  const double *xy,
                                  size_t n,
                                  double *out_xy);

/**
 * Evaluates the motion model at normalized time `t`.
 *
 * # Safety
 * `p` must be readable and `out_xy` must hold 2 doubles.
 */
enum AffStatus aff_trajectory_eval(const struct AffTrajectoryParams *p, double t, double *out_xy);

/**
 * Fits the motion model to `n_tracks` tracks of `n_steps` points each,
 * stored track-major as `[x, y]` pairs. With `timestamps` null the steps
 * are spread evenly over `[0, 1]`.
 *
 * # Safety
 * `xy` must hold `2 * n_tracks * n_steps` doubles, `timestamps` (if not
 * null) `n_steps` doubles, and `out` must be writable.
 */
enum AffStatus aff_trajectory_fit(const double *xy,
                                  size_t n_tracks,
                                  size_t n_steps,
                                  const double *timestamps,
                                  uint64_t seed,
                                  struct AffTrajectoryFit *out);

/**
 * Heatmap from `width * height` row-major values.
 *
 * # Safety
 * `values` must hold `width * height` doubles; `out` must be writable.
 */
enum AffStatus aff_heatmap_new(size_t width,
                               size_t height,
                               const double *values,
                               struct AffHeatmap **out);

/**
 * Sum of Gaussians (σ pixels, truncated at 3σ) at `n` points, scaled to
 * peak 1.
 *
 * # Safety
 * `xy` must hold `2 * n` doubles; `out` must be writable.
 */
enum AffStatus aff_heatmap_rasterize(const double *xy,
                                     size_t n,
                                     size_t width,
                                     size_t height,
                                     double sigma,
                                     struct AffHeatmap **out);

/**
 * # Safety
 * `h` must be a live handle.
 */
size_t aff_heatmap_width(const struct AffHeatmap *h);

/**
 * # Safety
 * `h` must be a live handle.
 */
size_t aff_heatmap_height(const struct AffHeatmap *h);

/**
 * Copies the row-major values into `out`, which must hold `len` doubles
 * with `len` equal to width × height.
 *
 * # Safety
 * `h` must be a live handle; `out` must hold `len` doubles.
 */
enum AffStatus aff_heatmap_values(const struct AffHeatmap *h, double *out, size_t len);

/**
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void aff_heatmap_free(struct AffHeatmap *h);

/**
 * Histogram intersection of the two sum-normalized maps.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum AffStatus aff_metric_sim(const struct AffHeatmap *pred,
                              const struct AffHeatmap *gt,
                              double *out);

/**
 * Pearson correlation of the two maps.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum AffStatus aff_metric_cc(const struct AffHeatmap *pred,
                             const struct AffHeatmap *gt,
                             double *out);

/**
 * AUC-Judd of `pred` against `n` fixation points (`[x, y]` pairs).
 *
 * # Safety
 * `pred` must be live, `fix_xy` must hold `2 * n` doubles and `out` must
 * be writable.
 */
enum AffStatus aff_metric_auc_judd(const struct AffHeatmap *pred,
                                   const double *fix_xy,
                                   size_t n,
                                   double *out);

/**
 * Mean pointwise distance between two sequences of `n` points.
 *
 * # Safety
 * `a` and `b` must each hold `2 * n` doubles; `out` must be writable.
 */
enum AffStatus aff_metric_ade(const double *a, const double *b, size_t n, double *out);

/**
 * Dynamic time warping cost. `path_len` may be null.
 *
 * # Safety
 * `a` must hold `2 * na` doubles, `b` `2 * nb`; `out` must be writable.
 */
enum AffStatus aff_metric_dtw(const double *a,
                              size_t na,
                              const double *b,
                              size_t nb,
                              double *out,
                              size_t *path_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AFFPIPE_H */
