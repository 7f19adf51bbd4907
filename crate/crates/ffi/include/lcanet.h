#ifndef LCANET_H
#define LCANET_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum LcaStatus {
  LCA_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  LCA_STATUS_NULL_POINTER = 1,
  /**
   * Bad sizes, parameters, or non-UTF-8 paths.
   */
  LCA_STATUS_INVALID_ARGUMENT = 2,
  LCA_STATUS_IO = 3,
  /**
   * The checkpoint file is corrupt or of the wrong layout.
   */
  LCA_STATUS_CHECKPOINT = 4,
  /**
   * The image file could not be decoded or has an unsupported format.
   */
  LCA_STATUS_IMAGE = 5,
  /**
   * A NaN or infinity showed up in the computation.
   */
  LCA_STATUS_NON_FINITE = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  LCA_STATUS_PANIC = 7,
} LcaStatus;

/**
 * Opaque handle to a trained or freshly initialised network.
 */
typedef struct LcaModel LcaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next `lca_*` call on the same thread.
 */
const char *lca_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lca_version(void);

/**
 * Creates a freshly initialised network from `seed`.
 *
 * # Safety
 * `out` must be NULL or point to writable storage for one pointer.
 */
enum LcaStatus lca_model_init(uint64_t seed, struct LcaModel **out);

/**
 * Loads a checkpoint. On failure `*out` is left untouched.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` as for `lca_model_init`.
 */
enum LcaStatus lca_model_load(const char *path, struct LcaModel **out);

/**
 * Writes the model's checkpoint to `path`.
 *
 * # Safety
 * `model` must be NULL or a live handle; `path` NULL or NUL-terminated.
 */
enum LcaStatus lca_model_save(const struct LcaModel *model, const char *path);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void lca_model_free(struct LcaModel *model);

/**
 * Number of trainable parameters, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
uintptr_t lca_model_param_count(const struct LcaModel *model);

/**
 * Dehazes an image into `out` (same size as the input, clamped to `[0, 1]`).
 * `resolution_px` 0 runs at the input size rounded down to a multiple of 4;
 * otherwise it is the square working size and must be a multiple of 4.
 * If `seconds` is not NULL it receives the network time.
 *
 * # Safety
 * `hazy` and `out` must each hold `height * width * 3` floats.
 */
enum LcaStatus lca_dehaze(const struct LcaModel *model,
                          const float *hazy,
                          uintptr_t height,
                          uintptr_t width,
                          uintptr_t resolution_px,
                          float *out,
                          double *seconds);

/**
 * Reads `input` (PPM or PNG), dehazes it, and writes `output` in the format
 * named by its extension.
 *
 * # Safety
 * `model` must be a live handle; paths NUL-terminated.
 */
enum LcaStatus lca_dehaze_file(const struct LcaModel *model,
                               const char *input,
                               const char *output,
                               uintptr_t resolution_px);

/**
 * PSNR in dB for peak 1.0; identical images give +infinity.
 *
 * # Safety
 * `a` and `b` must each hold `height * width * 3` floats; `out` one double.
 */
enum LcaStatus lca_psnr(const float *a,
                        const float *b,
                        uintptr_t height,
                        uintptr_t width,
                        double *out);

/**
 * SSIM on luma with an 11x11 Gaussian window. Both sides must be at least 11.
 *
 * # Safety
 * As for `lca_psnr`.
 */
enum LcaStatus lca_ssim(const float *a,
                        const float *b,
                        uintptr_t height,
                        uintptr_t width,
                        double *out);

/**
 * Applies uniform haze `I = J t + A (1 - t)` with grey airlight `A`.
 * `clear` must lie in `[0, 1]`; `airlight` in `(0, 1]`, `transmission` in `(0, 1]`.
 *
 * # Safety
 * `clear` and `out` must each hold `height * width * 3` floats.
 */
enum LcaStatus lca_synthesize(const float *clear,
                              uintptr_t height,
                              uintptr_t width,
                              double airlight,
                              double transmission,
                              float *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LCANET_H */
