#ifndef CIKF_H
#define CIKF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum CikfStatus {
  CIKF_STATUS_OK = 0,
  CIKF_STATUS_NULL_POINTER = 1,
  CIKF_STATUS_INVALID_STRING = 2,
  CIKF_STATUS_DIMENSION = 3,
  CIKF_STATUS_PARAMETER = 4,
  CIKF_STATUS_MODEL = 5,
  CIKF_STATUS_GENERATION = 6,
  CIKF_STATUS_SEQUENCING = 7,
  CIKF_STATUS_CONFIG = 8,
  CIKF_STATUS_NUMERICAL = 9,
  CIKF_STATUS_IO = 10,
  CIKF_STATUS_FORMAT = 11,
  CIKF_STATUS_BUFFER_TOO_SMALL = 12,
  CIKF_STATUS_PANIC = 13,
} CikfStatus;

// A running network of filters.
typedef struct CikfFilter CikfFilter;

// A model: dynamics, sensing and communication graph.
typedef struct CikfModel CikfModel;

// A precomputed gain schedule.
typedef struct CikfSchedule CikfSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cikf_version(void);

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *cikf_last_error(void);

// Generates a model from the `"desk"` or `"paper"` preset.
//
// # Safety
// `preset` must be a NUL-terminated string and `out` a valid pointer.
enum CikfStatus cikf_model_generate(const char *preset, uint64_t seed, struct CikfModel **out);

// Loads a model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CikfStatus cikf_model_load(const char *path, struct CikfModel **out);

// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum CikfStatus cikf_model_save(const struct CikfModel *model, const char *path);

// Writes the state dimension and the number of agents.
//
// # Safety
// `model` must be a live handle; the output pointers must be valid.
enum CikfStatus cikf_model_dims(const struct CikfModel *model, size_t *state_dim, size_t *agents);

// Number of scalar observations of one agent.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum CikfStatus cikf_model_obs_dim(const struct CikfModel *model, size_t agent, size_t *out);

// # Safety
// `model` must be a handle from this library or NULL; it is invalid afterwards.
void cikf_model_free(struct CikfModel *model);

// Designs the optimal gains for `horizon` steps.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum CikfStatus cikf_schedule_design(const struct CikfModel *model,
                                     size_t horizon,
                                     struct CikfSchedule **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CikfStatus cikf_schedule_load(const char *path, struct CikfSchedule **out);

// # Safety
// `schedule` must be a live handle and `path` a NUL-terminated string.
enum CikfStatus cikf_schedule_save(const struct CikfSchedule *schedule, const char *path);

// # Safety
// `schedule` must be a live handle and `out` a valid pointer.
enum CikfStatus cikf_schedule_horizon(const struct CikfSchedule *schedule, size_t *out);

// Per-agent theoretical prediction MSE, one value per step.
//
// # Safety
// `schedule` must be a live handle and `buf` must hold `len` doubles.
enum CikfStatus cikf_schedule_theory_mse(const struct CikfSchedule *schedule,
                                         double *buf,
                                         size_t len);

// # Safety
// `schedule` must be a handle from this library or NULL; it is invalid afterwards.
void cikf_schedule_free(struct CikfSchedule *schedule);

// Starts a network of filters at the prior mean. The schedule is copied.
//
// # Safety
// `model` and `schedule` must be live handles and `out` a valid pointer.
enum CikfStatus cikf_filter_new(const struct CikfModel *model,
                                const struct CikfSchedule *schedule,
                                struct CikfFilter **out);

// Processes one step of observations: all agents' measurements
// concatenated in agent order.
//
// # Safety
// `filter` must be a live handle and `obs` must hold `len` doubles.
enum CikfStatus cikf_filter_step(struct CikfFilter *filter, const double *obs, size_t len);

// Number of steps processed so far.
//
// # Safety
// `filter` must be a live handle and `out` a valid pointer.
enum CikfStatus cikf_filter_steps(const struct CikfFilter *filter, size_t *out);

// One agent's state prediction for the next step.
//
// # Safety
// `filter` must be a live handle and `buf` must hold `len` doubles.
enum CikfStatus cikf_filter_prediction(const struct CikfFilter *filter,
                                       size_t agent,
                                       double *buf,
                                       size_t len);

// One agent's filtered state estimate of the last processed step.
//
// # Safety
// `filter` must be a live handle and `buf` must hold `len` doubles.
enum CikfStatus cikf_filter_estimate(const struct CikfFilter *filter,
                                     size_t agent,
                                     double *buf,
                                     size_t len);

// # Safety
// `filter` must be a handle from this library or NULL; it is invalid afterwards.
void cikf_filter_free(struct CikfFilter *filter);

// Monte-Carlo MSE per step: distributed filter (per agent) and centralized
// filter. Both buffers must hold `horizon` doubles.
//
// # Safety
// Handles must be live; `cikf_mse` and `ckf_mse` must hold `horizon` doubles.
enum CikfStatus cikf_montecarlo(const struct CikfModel *model,
                                const struct CikfSchedule *schedule,
                                size_t runs,
                                size_t horizon,
                                uint64_t seed,
                                double *cikf_mse,
                                double *ckf_mse);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIKF_H */
