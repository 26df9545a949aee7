#ifndef FACEFLOW_H
#define FACEFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FfStatus {
  FF_STATUS_OK = 0,
  FF_STATUS_SHAPE = 1,
  FF_STATUS_DOMAIN = 2,
  FF_STATUS_FORMAT = 3,
  FF_STATUS_RANK = 4,
  FF_STATUS_IO = 5,
  FF_STATUS_NULL_ARGUMENT = 6,
  FF_STATUS_INVALID_UTF8 = 7,
  FF_STATUS_PANIC = 8,
} FfStatus;

/**
 * Parametric head motion model used by [`ff_decompose`].
 */
typedef enum FfMotionKind {
  FF_MOTION_KIND_TRANSLATION = 0,
  FF_MOTION_KIND_SIMILARITY = 1,
  FF_MOTION_KIND_AFFINE = 2,
} FfMotionKind;

/**
 * Opaque face model asset.
 */
typedef struct FfAsset FfAsset;

/**
 * Opaque dense flow field.
 */
typedef struct FfFlow FfFlow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *ff_last_error(void);

/**
 * Builds a synthetic face model asset.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum FfStatus ff_asset_synthesize(uint64_t seed,
                                  size_t num_vertices,
                                  size_t num_shape,
                                  size_t num_expression,
                                  struct FfAsset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FfStatus ff_asset_load(const char *path, struct FfAsset **out);

/**
 * # Safety
 * `asset` must come from this library; `path` must be a NUL-terminated string.
 */
enum FfStatus ff_asset_save(const struct FfAsset *asset, const char *path);

/**
 * # Safety
 * `asset` must be null or a handle from this library not freed before.
 */
void ff_asset_free(struct FfAsset *asset);

/**
 * Writes vertex, triangle, shape, expression and joint counts to `dims[0..5]`.
 *
 * # Safety
 * `asset` must be a live handle; `dims` must point to 5 writable `size_t`.
 */
enum FfStatus ff_asset_dimensions(const struct FfAsset *asset, size_t *dims);

/**
 * Zero flow of the given size.
 *
 * # Safety
 * `out` must be writable.
 */
enum FfStatus ff_flow_new(size_t width, size_t height, struct FfFlow **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FfStatus ff_flow_read(const char *path, struct FfFlow **out);

/**
 * # Safety
 * `flow` must be a live handle; `path` must be a NUL-terminated string.
 */
enum FfStatus ff_flow_write(const struct FfFlow *flow, const char *path);

/**
 * # Safety
 * `flow` must be null or a handle from this library not freed before.
 */
void ff_flow_free(struct FfFlow *flow);

/**
 * Width in pixels, or 0 for a null handle.
 *
 * # Safety
 * `flow` must be null or a live handle.
 */
size_t ff_flow_width(const struct FfFlow *flow);

/**
 * Height in pixels, or 0 for a null handle.
 *
 * # Safety
 * `flow` must be null or a live handle.
 */
size_t ff_flow_height(const struct FfFlow *flow);

/**
 * Row-major interleaved `(u, v)` values, `2 * width * height` floats.
 * Invalid pixels hold `1e10`. Valid while the handle lives.
 *
 * # Safety
 * `flow` must be null or a live handle.
 */
const float *ff_flow_data(const struct FfFlow *flow);

/**
 * Copies `2 * width * height` interleaved values into the flow. Components
 * above `1e9` in magnitude or non-finite mark the pixel invalid.
 *
 * # Safety
 * `flow` must be a live handle; `values` must hold `len` floats.
 */
enum FfStatus ff_flow_set_data(struct FfFlow *flow, const float *values, size_t len);

/**
 * Mean endpoint error over pixels where `mask` is nonzero and both flows are
 * valid. A null `mask` selects every pixel.
 *
 * # Safety
 * Handles must be live; `mask` must be null or hold `mask_len` bytes;
 * `out_epe` and `out_count` must be writable.
 */
enum FfStatus ff_masked_epe(const struct FfFlow *pred,
                            const struct FfFlow *gt,
                            const uint8_t *mask,
                            size_t mask_len,
                            double *out_epe,
                            size_t *out_count);

/**
 * Ground-truth facial, head and expression flow for pair `t` of an
 * `n`-frame sequence toward `target`, rendered with the default head camera.
 * Any `n >= 2` is accepted.
 *
 * # Safety
 * `asset` must be live; each parameter array must hold its stated length;
 * the three output pointers must be writable.
 */
enum FfStatus ff_generate_pair(const struct FfAsset *asset,
                               const double *beta,
                               size_t beta_len,
                               const double *psi,
                               size_t psi_len,
                               const double *theta,
                               size_t theta_len,
                               size_t n,
                               size_t t,
                               size_t width,
                               size_t height,
                               struct FfFlow **out_facial,
                               struct FfFlow **out_head,
                               struct FfFlow **out_expression);

/**
 * Fits a head motion model to `flow` on `mask` with Tukey IRLS and splits the
 * flow into head and expression parts. `coefficients` receives up to 6
 * model coefficients (2, 4 or 6 by kind). A null `mask` selects every pixel.
 *
 * # Safety
 * `flow` must be live; `mask` must be null or hold `mask_len` bytes;
 * `coefficients` must hold 6 doubles; the output handles must be writable.
 */
enum FfStatus ff_decompose(const struct FfFlow *flow,
                           const uint8_t *mask,
                           size_t mask_len,
                           enum FfMotionKind kind,
                           double *coefficients,
                           struct FfFlow **out_head,
                           struct FfFlow **out_expression);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FACEFLOW_H */
