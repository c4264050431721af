#ifndef PADMIX_H
#define PADMIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PadmixStatus {
  PADMIX_STATUS_OK = 0,
  PADMIX_STATUS_NULL_POINTER = 1,
  PADMIX_STATUS_INVALID_ARGUMENT = 2,
  PADMIX_STATUS_NOT_STEREO = 3,
  PADMIX_STATUS_DIAL_OUT_OF_RANGE = 4,
  PADMIX_STATUS_TOO_SHORT = 5,
  PADMIX_STATUS_SILENT = 6,
  PADMIX_STATUS_NUMERIC = 7,
  PADMIX_STATUS_PANIC = 99,
} PadmixStatus;

typedef enum PadmixStem {
  PADMIX_STEM_PRIMARY = 0,
  PADMIX_STEM_AMBIENT = 1,
} PadmixStem;

/**
 * Decomposed stereo item. Opaque to C.
 */
typedef struct PadmixDecomposition PadmixDecomposition;

/**
 * Analysis parameters. Start from [`padmix_config_default`].
 */
typedef struct PadmixConfig {
  uint32_t frame_len;
  uint32_t hop;
  uint32_t cov_smooth_frames;
  uint32_t unmix_smooth_frames;
} PadmixConfig;

/**
 * Measurements of one normalized render.
 */
typedef struct PadmixMetrics {
  double rfr_db;
  double loudness_lufs;
  double norm_gain_db;
  uint32_t dial_index;
} PadmixMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next padmix call on the same thread.
 */
const char *padmix_last_error(void);

struct PadmixConfig padmix_config_default(void);

/**
 * Decompose a stereo signal into primary and ambient parts.
 *
 * `config` may be null for defaults. On success `*out` owns a new handle.
 *
 * # Safety
 * `left` and `right` must point to `len` doubles; `out` must be writable.
 */
enum PadmixStatus padmix_decompose(const double *left,
                                   const double *right,
                                   size_t len,
                                   uint32_t sample_rate,
                                   const struct PadmixConfig *config,
                                   struct PadmixDecomposition **out);

/**
 * # Safety
 * `handle` must come from [`padmix_decompose`] and not be freed yet, or be null.
 */
void padmix_decomposition_free(struct PadmixDecomposition *handle);

/**
 * Number of samples per channel, 0 for a null handle.
 *
 * # Safety
 * `handle` must be a live handle or null.
 */
size_t padmix_decomposition_len(const struct PadmixDecomposition *handle);

/**
 * Integrated loudness of the input, LUFS.
 *
 * # Safety
 * `handle` must be a live handle; `out` must be writable.
 */
enum PadmixStatus padmix_decomposition_input_loudness(const struct PadmixDecomposition *handle,
                                                      double *out);

/**
 * Copy one stem into planar `left` and `right` buffers of `len` samples.
 *
 * # Safety
 * `handle` must be live; `left` and `right` must hold `len` doubles.
 */
enum PadmixStatus padmix_decomposition_copy_stem(const struct PadmixDecomposition *handle,
                                                 enum PadmixStem stem,
                                                 double *left,
                                                 double *right,
                                                 size_t len);

/**
 * Render dial position `dial` (0 to 30) as planar FL, FR, SL, SR.
 *
 * `quad` receives `4 * len` doubles, one channel after another. A NaN
 * `target_lufs` matches the loudness of the input. `metrics` may be null.
 *
 * # Safety
 * `handle` must be live; `quad` must hold `4 * len` doubles.
 */
enum PadmixStatus padmix_render(const struct PadmixDecomposition *handle,
                                int32_t dial,
                                double target_lufs,
                                double *quad,
                                size_t len,
                                struct PadmixMetrics *metrics);

/**
 * Ambient and primary un-mixing matrices for one covariance tile, each as
 * row-major `[a11, a12, a21, a22]`. Either output may be null.
 *
 * # Safety
 * Non-null outputs must hold 4 doubles.
 */
enum PadmixStatus padmix_pad_unmix(double c_ll,
                                   double c_rr,
                                   double c_lr,
                                   double *ambient,
                                   double *primary);

/**
 * Center-extraction matrix for one tile, row-major 3×2
 * (rows l, r, c; columns x_L, x_R).
 *
 * # Safety
 * `g` must hold 6 doubles.
 */
enum PadmixStatus padmix_ce_unmix(double c_ll, double c_rr, double c_lr, double *g);

/**
 * Rear-to-front ratio in dB of four channels; `-inf` for silent rears.
 *
 * # Safety
 * The four inputs must hold `len` doubles each; `out` must be writable.
 */
enum PadmixStatus padmix_rfr(const double *fl,
                             const double *fr,
                             const double *sl,
                             const double *sr,
                             size_t len,
                             double *out);

/**
 * Integrated loudness in LUFS of `num_channels` planar channels.
 *
 * Channel order follows the usual layouts: 1 mono, 2 L R, 4 FL FR SL SR,
 * 6 FL FR C LFE SL SR. `-inf` for digital silence.
 *
 * # Safety
 * `channels` must hold `num_channels` pointers to `len` doubles each.
 */
enum PadmixStatus padmix_integrated_loudness(const double *const *channels,
                                             size_t num_channels,
                                             size_t len,
                                             uint32_t sample_rate,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PADMIX_H */
