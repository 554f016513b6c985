#ifndef ARMT_H
#define ARMT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum ArmtStatus {
  ARMT_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ARMT_STATUS_NULL_POINTER = 1,
  ARMT_STATUS_INPUT = 2,
  ARMT_STATUS_DIMENSION = 3,
  ARMT_STATUS_SCHEDULE = 4,
  ARMT_STATUS_IO = 5,
  ARMT_STATUS_FORMAT = 6,
  /**
   * The engine panicked; the handle involved should be discarded.
   */
  ARMT_STATUS_PANIC = 7,
} ArmtStatus;

typedef enum ArmtSchedule {
  ARMT_SCHEDULE_SEQUENTIAL = 0,
  ARMT_SCHEDULE_DIAGONAL = 1,
} ArmtSchedule;

typedef enum ArmtPrecision {
  ARMT_PRECISION_F32 = 0,
  ARMT_PRECISION_F64 = 1,
} ArmtPrecision;

/**
 * Loaded weights in both precisions.
 */
typedef struct ArmtModel ArmtModel;

/**
 * Result of one forward pass.
 */
typedef struct ArmtRun ArmtRun;

/**
 * Model hyperparameters. `eps_assoc <= 0` selects the per-precision
 * default.
 */
typedef struct ArmtConfig {
  size_t n_layers;
  size_t d_model;
  size_t n_heads;
  size_t d_ff;
  size_t vocab_size;
  size_t segment_size;
  size_t num_mem_tokens;
  size_t d_mem;
  size_t dpfp_nu;
  double eps_assoc;
  double eps_norm;
  uint64_t seed;
} ArmtConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on this thread.
 */
const char *armt_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *armt_version(void);

/**
 * Fill `out` with the default configuration.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum ArmtStatus armt_config_default(struct ArmtConfig *out);

/**
 * Generate seeded random weights for `cfg`.
 *
 * # Safety
 * `cfg` must be null or point to a valid config; `out` must be null or
 * valid for writes.
 */
enum ArmtStatus armt_model_new(const struct ArmtConfig *cfg, struct ArmtModel **out);

/**
 * Load a weight container.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` must be null or
 * valid for writes.
 */
enum ArmtStatus armt_model_load(const char *path, struct ArmtModel **out);

/**
 * Write the model as a weight container.
 *
 * # Safety
 * `model` must be null or a live handle; `path` must be null or a
 * NUL-terminated string.
 */
enum ArmtStatus armt_model_save(const struct ArmtModel *model, const char *path);

/**
 * Copy the model's configuration into `out`.
 *
 * # Safety
 * `model` must be null or a live handle; `out` must be null or valid for
 * writes.
 */
enum ArmtStatus armt_model_config(const struct ArmtModel *model, struct ArmtConfig *out);

/**
 * Release a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void armt_model_free(struct ArmtModel *model);

/**
 * Run a forward pass over `n_tokens` token ids. `threads == 0` uses all
 * available cores.
 *
 * # Safety
 * `model` must be null or a live handle; `tokens` must be null or valid
 * for `n_tokens` reads; `out` must be null or valid for writes.
 */
enum ArmtStatus armt_run(const struct ArmtModel *model,
                         const uint32_t *tokens,
                         size_t n_tokens,
                         enum ArmtSchedule schedule,
                         enum ArmtPrecision precision,
                         size_t threads,
                         struct ArmtRun **out);

/**
 * Borrow the logits, row-major `[rows, cols]`. The pointer lives as long
 * as `run`. Returns null if `run` is null.
 *
 * # Safety
 * `run` must be null or a live handle; `rows` and `cols` must each be null
 * or valid for writes.
 */
const double *armt_run_logits(const struct ArmtRun *run, size_t *rows, size_t *cols);

/**
 * Number of executed steps (groups) in the run.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t armt_run_steps(const struct ArmtRun *run);

/**
 * Execution trace as JSON, owned by `run`.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
const char *armt_run_trace_json(const struct ArmtRun *run);

/**
 * Release a run. Null is ignored.
 *
 * # Safety
 * `run` must be null or a handle not yet freed.
 */
void armt_run_free(struct ArmtRun *run);

/**
 * `‖a − b‖_F / ‖b‖_F` over `n` values, `b` the baseline.
 *
 * # Safety
 * `a` and `b` must be null or valid for `n` reads; `out` must be null or
 * valid for writes.
 */
enum ArmtStatus armt_relative_error(const double *a, const double *b, size_t n, double *out);

/**
 * Number of groups in the diagonal schedule of a `segments × layers` grid.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum ArmtStatus armt_schedule_group_count(size_t segments, size_t layers, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARMT_H */
