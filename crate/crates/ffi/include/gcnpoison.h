#ifndef GCNPOISON_H
#define GCNPOISON_H

#pragma once

/* Generated with cbindgen:0.27.0 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Training-set selection method.
 */
typedef enum GpMethod {
  GP_METHOD_RANDOM = 0,
  GP_METHOD_STRAT_DEGREE = 1,
  GP_METHOD_GREEDY_COVER = 2,
} GpMethod;

/**
 * Result of every fallible call.
 */
typedef enum GpStatus {
  GP_STATUS_OK = 0,
  GP_STATUS_NULL_POINTER = 1,
  GP_STATUS_INVALID_ARGUMENT = 2,
  GP_STATUS_DIMENSION_MISMATCH = 3,
  GP_STATUS_IO = 4,
  GP_STATUS_PARSE = 5,
  GP_STATUS_ATTACK = 6,
  GP_STATUS_PANIC = 7,
} GpStatus;

/**
 * Opaque dataset handle.
 */
typedef struct GpDataset GpDataset;

/**
 * Opaque split handle.
 */
typedef struct GpSplit GpSplit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gp_version(void);

/**
 * Copies the calling thread's last error message into `buf` (always
 * NUL-terminated when `cap > 0`) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t gp_last_error(char *buf, size_t cap);

/**
 * Generates a blockmodel dataset with one block per class.
 *
 * # Safety
 * `blocks` must point to `n_blocks` sizes; `out` must be writable.
 */
enum GpStatus gp_sbm_generate(const size_t *blocks,
                              size_t n_blocks,
                              double inprob,
                              size_t n_features,
                              size_t class_features,
                              double p_on,
                              double p_off,
                              uint64_t seed,
                              struct GpDataset **out);

/**
 * Loads a dataset directory.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum GpStatus gp_dataset_load(const char *dir, struct GpDataset **out);

/**
 * Writes a dataset directory.
 *
 * # Safety
 * `ds` must come from this library; `dir` must be NUL-terminated.
 */
enum GpStatus gp_dataset_save(const struct GpDataset *ds, const char *dir);

/**
 * Node, undirected edge and class counts; any output may be null.
 *
 * # Safety
 * `ds` must come from this library.
 */
enum GpStatus gp_dataset_shape(const struct GpDataset *ds,
                               size_t *n_nodes,
                               size_t *n_edges,
                               size_t *n_classes);

/**
 * # Safety
 * `ds` must be null or come from this library, and not be used afterwards.
 */
void gp_dataset_free(struct GpDataset *ds);

/**
 * Chooses training, validation and test nodes.
 *
 * # Safety
 * `ds` must come from this library; `out` must be writable.
 */
enum GpStatus gp_split_select(const struct GpDataset *ds,
                              enum GpMethod method,
                              double train_frac,
                              double val_frac,
                              uint64_t seed,
                              struct GpSplit **out);

/**
 * Loads a split written by the command-line tool.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum GpStatus gp_split_load(const char *path, struct GpSplit **out);

/**
 * # Safety
 * `split` must come from this library; `path` must be NUL-terminated.
 */
enum GpStatus gp_split_save(const struct GpSplit *split, const char *path);

/**
 * Copies up to `cap` training node ids into `buf` and stores the total
 * count in `len`. Call with `cap = 0` to query the count.
 *
 * # Safety
 * `split` must come from this library; `buf` must hold `cap` values.
 */
enum GpStatus gp_split_train(const struct GpSplit *split, size_t *buf, size_t cap, size_t *len);

/**
 * Mean number of training nodes adjacent to a non-training node.
 *
 * # Safety
 * Both handles must come from this library; `out` must be writable.
 */
enum GpStatus gp_split_avg_training_neighbors(const struct GpDataset *ds,
                                              const struct GpSplit *split,
                                              double *out);

/**
 * # Safety
 * `split` must be null or come from this library, and not be used afterwards.
 */
void gp_split_free(struct GpSplit *split);

/**
 * Trains the GCN with default hyperparameters and reports the macro-F1
 * on the test nodes.
 *
 * # Safety
 * Both handles must come from this library; `macro_f1` must be writable.
 */
enum GpStatus gp_train_macro_f1(const struct GpDataset *ds,
                                const struct GpSplit *split,
                                uint64_t seed,
                                double *macro_f1);

/**
 * Runs a full experiment from a JSON configuration (null for the
 * defaults) and writes its tables to `out_dir`.
 *
 * # Safety
 * `config_json` must be null or NUL-terminated; `out_dir` NUL-terminated.
 */
enum GpStatus gp_experiment_run(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GCNPOISON_H */
