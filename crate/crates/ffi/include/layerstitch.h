#ifndef LAYERSTITCH_H
#define LAYERSTITCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_ARGUMENT = 1,
  LS_STATUS_INVALID_UTF8 = 2,
  LS_STATUS_CONFIG = 3,
  LS_STATUS_IO = 4,
  LS_STATUS_PARSE = 5,
  LS_STATUS_INTEGRITY = 6,
  LS_STATUS_SHAPE = 7,
  LS_STATUS_INVALID_CONFIG = 8,
  LS_STATUS_CAP_EXCEEDED = 9,
  LS_STATUS_EVALUATION = 10,
  LS_STATUS_SEARCH = 11,
  LS_STATUS_INTERRUPTED = 12,
  LS_STATUS_OUT_OF_RANGE = 13,
  LS_STATUS_PANIC = 14,
} LsStatus;

// Opaque handle to a loaded model.
typedef struct LsModel LsModel;

// Opaque handle to a budget schedule.
typedef struct LsSchedule LsSchedule;

// Opaque handle to a finished search.
typedef struct LsSearchResult LsSearchResult;

// Model dimensions.
typedef struct LsModelShape {
  size_t input_dim;
  size_t hidden_dim;
  size_t num_layers;
  size_t num_classes;
} LsModelShape;

// One successive-halving stage: `count` configurations at `budget`.
typedef struct LsStage {
  size_t count;
  size_t budget;
} LsStage;

// Summary of the best trial of a search.
typedef struct LsBest {
  // False when no trial reached the maximum budget; the other fields are then zero.
  bool found;
  uint64_t trial;
  double scalarized;
  double mean_error;
  size_t num_objectives;
} LsBest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next call into this library from the same thread.
const char *ls_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ls_version(void);

// Loads a model checkpoint.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum LsStatus ls_model_load(const char *path, struct LsModel **out);

// Releases a model; null is ignored.
//
// # Safety
// `model` must come from [`ls_model_load`] and not be used afterwards.
void ls_model_free(struct LsModel *model);

// # Safety
// `model` must be a live handle; `out` must be writable.
enum LsStatus ls_model_shape(const struct LsModel *model, struct LsModelShape *out);

// Forward pass over `rows` row-major inputs of width `cols`, writing
// `rows × num_classes` logits into `logits` (capacity `logits_len`).
//
// # Safety
// `inputs` must hold `rows·cols` values and `logits` `logits_len` slots.
enum LsStatus ls_model_forward(const struct LsModel *model,
                               const double *inputs,
                               size_t rows,
                               size_t cols,
                               double *logits,
                               size_t logits_len);

// `max_i λ_i f_i + α Σ_i λ_i f_i` over `m` objectives.
//
// # Safety
// `objectives` and `lambda` must hold `m` values; `out` must be writable.
enum LsStatus ls_parego_scalarize(const double *objectives,
                                  const double *lambda,
                                  size_t m,
                                  double alpha,
                                  double *out);

// Builds the bracket schedule for budgets `[b_min, b_max]` and factor `eta`.
//
// # Safety
// `out` must be writable.
enum LsStatus ls_schedule_new(size_t b_min, size_t b_max, size_t eta, struct LsSchedule **out);

// # Safety
// `schedule` must come from [`ls_schedule_new`] and not be used afterwards.
void ls_schedule_free(struct LsSchedule *schedule);

// Copies up to `cap` ladder budgets into `out` and stores the full length in
// `len`. Pass `cap = 0` to query the length.
//
// # Safety
// `out` must have `cap` slots; `len` must be writable.
enum LsStatus ls_schedule_ladder(const struct LsSchedule *schedule,
                                 size_t *out,
                                 size_t cap,
                                 size_t *len);

// Number of brackets (`s_max + 1`).
//
// # Safety
// `schedule` must be live; `out` writable.
enum LsStatus ls_schedule_num_brackets(const struct LsSchedule *schedule, size_t *out);

// Number of stages in bracket `bracket` (brackets ordered from `s_max` down).
//
// # Safety
// `schedule` must be live; `out` writable.
enum LsStatus ls_schedule_num_stages(const struct LsSchedule *schedule,
                                     size_t bracket,
                                     size_t *out);

// # Safety
// `schedule` must be live; `out` writable.
enum LsStatus ls_schedule_stage(const struct LsSchedule *schedule,
                                size_t bracket,
                                size_t stage,
                                struct LsStage *out);

// Runs the search described by a run config file, writing its journal and
// exports to the configured output directory. `resume` continues from an
// existing journal. `threads = 0` keeps the config's value.
//
// # Safety
// `config_path` must be a NUL-terminated string; `out` must be writable.
enum LsStatus ls_search_run(const char *config_path,
                            bool resume,
                            size_t threads,
                            struct LsSearchResult **out);

// # Safety
// `result` must come from [`ls_search_run`] and not be used afterwards.
void ls_search_result_free(struct LsSearchResult *result);

// Trials run and Pareto-front size.
//
// # Safety
// `result` must be live; both outputs writable.
enum LsStatus ls_search_result_counts(const struct LsSearchResult *result,
                                      size_t *trials,
                                      size_t *front_size);

// Summary of the best trial; objectives go to `objectives` (capacity `cap`).
//
// # Safety
// `result` must be live; `out` writable; `objectives` must have `cap` slots.
enum LsStatus ls_search_result_best(const struct LsSearchResult *result,
                                    struct LsBest *out,
                                    double *objectives,
                                    size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAYERSTITCH_H */
