/* privscore C API */

#ifndef PRIVSCORE_H
#define PRIVSCORE_H

/* Generated by cbindgen from privscore-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_ARGUMENT = 1,
  PS_STATUS_INVALID_UTF8 = 2,
  PS_STATUS_IO = 3,
  PS_STATUS_PARSE = 4,
  PS_STATUS_INVALID_INPUT = 5,
  PS_STATUS_NON_CONVERGED = 6,
  PS_STATUS_OUT_OF_RANGE = 7,
  PS_STATUS_BUFFER_TOO_SMALL = 8,
  PS_STATUS_INTERNAL = 9,
} PsStatus;

// Opaque dataset handle.
typedef struct PsDataset PsDataset;

// Opaque score-vector handle.
typedef struct PsScores PsScores;

// Scoring knobs; get defaults from [`ps_score_options_default`].
typedef struct PsScoreOptions {
  // Damping factor for PageRank-style fixed points, in [0, 1).
  double damping;
  // Maximum granularity level for the graded models.
  uint8_t max_level;
  // Seed for fit initialization.
  uint64_t seed;
} PsScoreOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message for this thread, or NULL when no error occurred.
// The pointer stays valid until the next failing call on this thread.
const char *ps_last_error_message(void);

// Crate version as a static string.
const char *ps_version(void);

// Opens an existing bundle directory.
//
// # Safety
// `dir` must be a valid NUL-terminated string; `out` must be a valid
// pointer. On success `*out` owns a dataset that must be released with
// [`ps_dataset_free`].
enum PsStatus ps_dataset_open(const char *dir, struct PsDataset **out);

// Ingests raw CSV files. Exactly one of `granularity_path` /
// `responses_path` must be non-NULL.
//
// # Safety
// All non-NULL pointers must be valid NUL-terminated strings; `out` must
// be a valid pointer. On success `*out` must be released with
// [`ps_dataset_free`].
enum PsStatus ps_dataset_from_csv(const char *edges_path,
                                  const char *granularity_path,
                                  const char *responses_path,
                                  struct PsDataset **out);

// # Safety
// `dataset` must be NULL or a pointer from a `ps_dataset_*` constructor;
// it is invalid after this call.
void ps_dataset_free(struct PsDataset *dataset);

// # Safety
// `dataset` must be NULL or a live dataset handle.
uintptr_t ps_dataset_user_count(const struct PsDataset *dataset);

// # Safety
// `dataset` must be NULL or a live dataset handle.
uintptr_t ps_dataset_item_count(const struct PsDataset *dataset);

// # Safety
// `dataset` must be NULL or a live dataset handle.
uintptr_t ps_dataset_edge_count(const struct PsDataset *dataset);

// Copies the user identifier at `index` into `buffer` (NUL-terminated).
//
// # Safety
// `dataset` must be a live handle; `buffer` must be valid for
// `buffer_len` writable bytes.
enum PsStatus ps_dataset_user_id(const struct PsDataset *dataset,
                                 uintptr_t index,
                                 char *buffer,
                                 uintptr_t buffer_len);

// Default scoring options: damping 0.85, three levels, seed 0.
struct PsScoreOptions ps_score_options_default(void);

// Computes one scoring model over the dataset. `model` accepts the same
// names as the command line (`psn`, `psi`, `psgn`, `psgi`, `psc:prc`,
// `psc:evc`, `psc:cc`, `psc:bc`, `psna`). Returns `NonConverged` (with
// the scores still written to `*out`) when an iterative fit hit its
// iteration cap.
//
// # Safety
// `dataset` must be a live handle, `model` a valid NUL-terminated
// string, `options` NULL or valid, `out` valid. On success (or
// `NonConverged`) `*out` must be released with [`ps_scores_free`].
enum PsStatus ps_score(const struct PsDataset *dataset,
                       const char *model,
                       const struct PsScoreOptions *options,
                       struct PsScores **out);

// # Safety
// `scores` must be NULL or a pointer from [`ps_score`]; it is invalid
// after this call.
void ps_scores_free(struct PsScores *scores);

// # Safety
// `scores` must be NULL or a live scores handle.
uintptr_t ps_scores_len(const struct PsScores *scores);

// Reads the score value at `index` (registry order).
//
// # Safety
// `scores` must be a live handle; `value` must be a valid pointer.
enum PsStatus ps_scores_value(const struct PsScores *scores, uintptr_t index, double *value);

// Copies the user identifier the score at `index` belongs to.
//
// # Safety
// `scores` must be a live handle; `buffer` must be valid for
// `buffer_len` writable bytes.
enum PsStatus ps_scores_user_id(const struct PsScores *scores,
                                uintptr_t index,
                                char *buffer,
                                uintptr_t buffer_len);

// Copies the model label of the scores (e.g. `PSC-PRC`).
//
// # Safety
// `scores` must be a live handle; `buffer` must be valid for
// `buffer_len` writable bytes.
enum PsStatus ps_scores_model(const struct PsScores *scores, char *buffer, uintptr_t buffer_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRIVSCORE_H */
