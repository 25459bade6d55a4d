#ifndef OFFLINE_CO_H
#define OFFLINE_CO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes; the numeric values match the command-line exit codes.
typedef enum OcStatus {
  OC_STATUS_OK = 0,
  OC_STATUS_INVALID_ARGUMENT = 2,
  OC_STATUS_IO = 3,
  OC_STATUS_INVALID_DATA = 4,
  OC_STATUS_NUMERICAL = 5,
  OC_STATUS_PANIC = 6,
} OcStatus;

// Cost used by [`oc_optimize`].
typedef enum OcMode {
  // Negated surrogate score only.
  OC_MODE_BASELINE = 0,
  // Negated score plus the out-of-distribution penalty stored in the model.
  OC_MODE_PROPOSED = 1,
} OcMode;

// Opaque handle to a loaded ranking model.
typedef struct OcModel OcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *oc_last_error_message(void);

// Loads a model file. On success `*out` owns a handle to release with
// [`oc_model_free`].
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
enum OcStatus oc_model_load(const char *path, struct OcModel **out);

// Releases a handle from [`oc_model_load`]. Null is ignored.
//
// # Safety
// `model` must be null or a handle not yet freed.
void oc_model_free(struct OcModel *model);

// Whether the model carries Gaussian statistics and cost parameters.
//
// # Safety
// `model` must be null or a live handle.
bool oc_model_is_calibrated(const struct OcModel *model);

// Closed tour length of `route` over the given cities.
//
// # Safety
// `coords` must hold `2 * n_cities` values, `route` `n_cities` values,
// and `out` must be a valid pointer.
enum OcStatus oc_tour_length(const double *coords,
                             size_t n_cities,
                             const size_t *route,
                             double *out);

// Surrogate score of `route`; higher means a shorter predicted tour.
//
// # Safety
// Same buffer requirements as [`oc_tour_length`]; `model` must be live.
enum OcStatus oc_model_score(const struct OcModel *model,
                             const double *coords,
                             size_t n_cities,
                             const size_t *route,
                             double *out);

// Anneals a tour against the surrogate with default schedule settings,
// `iterations` steps and RNG `seed`. Writes the best route to `out_route`
// (`n_cities` entries) and its true length to `out_length`.
//
// # Safety
// Same buffer requirements as [`oc_tour_length`]; `out_route` must have
// room for `n_cities` values and `model` must be live.
enum OcStatus oc_optimize(const struct OcModel *model,
                          const double *coords,
                          size_t n_cities,
                          enum OcMode mode,
                          size_t iterations,
                          uint64_t seed,
                          size_t *out_route,
                          double *out_length);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OFFLINE_CO_H */
