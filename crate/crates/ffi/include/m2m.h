#ifndef M2M_H
#define M2M_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define M2M_DIRECTION_FORWARD 0

#define M2M_DIRECTION_INVERSE 1

typedef enum {
  M2M_STATUS_OK = 0,
  M2M_STATUS_NULL_POINTER = 1,
  M2M_STATUS_INVALID_ARGUMENT = 2,
  M2M_STATUS_IO = 3,
  M2M_STATUS_FORMAT = 4,
  M2M_STATUS_SHAPE = 5,
  M2M_STATUS_PANIC = 6,
} M2mStatus;

/**
 * Opaque streaming dataset reader.
 */
typedef struct M2mDatasetReader M2mDatasetReader;

/**
 * Opaque transfer-function handle.
 */
typedef struct M2mTransferFunction M2mTransferFunction;

typedef struct {
  uint32_t n_frames;
  uint32_t axial_len;
  uint32_t lateral_len;
  double sample_rate_hz;
  uint8_t machine_id;
  uint8_t phantom_id;
  uint8_t acquisition;
} M2mDatasetInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *m2m_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *m2m_version(void);

/**
 * Estimates a transfer function from two stable calibration datasets.
 *
 * `direction` is `M2M_DIRECTION_FORWARD` or `M2M_DIRECTION_INVERSE`; `snr`
 * is the Wiener regularization parameter. Uses the default patch grid.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be writable.
 */
M2mStatus m2m_tf_build(const char *train_path,
                       const char *test_path,
                       uint32_t direction,
                       double snr,
                       M2mTransferFunction **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
M2mStatus m2m_tf_load(const char *path, M2mTransferFunction **out);

/**
 * # Safety
 * `tf` must be a live handle; `path` a NUL-terminated string.
 */
M2mStatus m2m_tf_save(const M2mTransferFunction *tf, const char *path);

/**
 * Number of depth segments, or 0 for a null handle.
 *
 * # Safety
 * `tf` must be NULL or a live handle.
 */
size_t m2m_tf_n_segments(const M2mTransferFunction *tf);

/**
 * Number of gain bins per segment, or 0 for a null handle.
 *
 * # Safety
 * `tf` must be NULL or a live handle.
 */
size_t m2m_tf_n_bins(const M2mTransferFunction *tf);

/**
 * Copies the gains of one segment into `out`, which holds `len` floats.
 *
 * # Safety
 * `tf` must be a live handle; `out` must point to `len` writable floats.
 */
M2mStatus m2m_tf_gains(const M2mTransferFunction *tf, size_t segment, float *out, size_t len);

/**
 * Filters a column-major `axial_len x lateral_len` patch with the gains of
 * `segment`, writing the result to `out` (same size; may not alias `samples`).
 *
 * # Safety
 * `samples` and `out` must each point to `axial_len * lateral_len` floats.
 */
M2mStatus m2m_tf_apply(const M2mTransferFunction *tf,
                       const float *samples,
                       size_t axial_len,
                       size_t lateral_len,
                       size_t segment,
                       float *out);

/**
 * # Safety
 * `tf` must be NULL or a handle not yet freed.
 */
void m2m_tf_free(M2mTransferFunction *tf);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
M2mStatus m2m_dataset_open(const char *path, M2mDatasetReader **out);

/**
 * # Safety
 * `reader` must be a live handle; `out` must be writable.
 */
M2mStatus m2m_dataset_info(const M2mDatasetReader *reader, M2mDatasetInfo *out);

/**
 * Reads the next frame's column-major samples into `out` (`len` floats,
 * which must equal `axial_len * lateral_len`). Sets `*has_frame` to false
 * once the dataset is exhausted.
 *
 * # Safety
 * `reader` must be a live handle; `out` must point to `len` writable floats.
 */
M2mStatus m2m_dataset_next(M2mDatasetReader *reader, float *out, size_t len, bool *has_frame);

/**
 * # Safety
 * `reader` must be NULL or a handle not yet freed.
 */
void m2m_dataset_free(M2mDatasetReader *reader);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* M2M_H */
