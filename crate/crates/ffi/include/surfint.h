#ifndef SURFINT_H
#define SURFINT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SurfintStatus {
  SURFINT_STATUS_OK = 0,
  /**
   * A residual was at or above tolerance.
   */
  SURFINT_STATUS_RESIDUAL_FAILURE = 1,
  SURFINT_STATUS_NULL_POINTER = 2,
  SURFINT_STATUS_INVALID_UTF8 = 3,
  SURFINT_STATUS_PARSE = 4,
  SURFINT_STATUS_SCHEMA = 5,
  SURFINT_STATUS_INVALID = 6,
  SURFINT_STATUS_NOT_REAL = 7,
  SURFINT_STATUS_NOT_PROPER = 8,
  SURFINT_STATUS_NOT_FLAT_GAUGE = 9,
  SURFINT_STATUS_DOMAIN = 10,
  SURFINT_STATUS_TOO_MANY_EXCLUSIONS = 11,
  SURFINT_STATUS_STEP_FAILURE = 12,
  SURFINT_STATUS_DOMAIN_EXIT = 13,
  SURFINT_STATUS_SEED_OBSTRUCTION = 14,
  SURFINT_STATUS_NORTH_POLE = 15,
  SURFINT_STATUS_SINGULAR_DENOMINATOR = 16,
  SURFINT_STATUS_PANIC = 17,
} SurfintStatus;

/**
 * A scalar field in `z`, `z̄`.
 */
typedef struct SurfintField SurfintField;

/**
 * A system: chart, optional structure functions, potential and integrals.
 */
typedef struct SurfintSystem SurfintSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last non-`Ok` status on this thread. Valid until the next call.
 */
const char *surfint_last_error(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void surfint_string_free(char *s);

/**
 * Build a system from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SurfintStatus surfint_system_from_json(const char *json, struct SurfintSystem **out);

/**
 * Look up a named catalog system.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SurfintStatus surfint_system_from_catalog(const char *name, struct SurfintSystem **out);

/**
 * # Safety
 * `sys` must come from a `surfint_system_*` constructor or be null.
 */
void surfint_system_free(struct SurfintSystem *sys);

/**
 * Evaluate residual registries. `registries` is a comma-separated list, or null for the
 * system's default set. Writes the largest residual and, if `report_json` is non-null,
 * a JSON report. Returns `ResidualFailure` when any residual reaches `tolerance`.
 *
 * # Safety
 * `sys` must be a live handle; `max_residual` valid; `registries` null or a string;
 * `report_json` null or valid.
 */
enum SurfintStatus surfint_verify(const struct SurfintSystem *sys,
                                  const char *registries,
                                  double tolerance,
                                  double *max_residual,
                                  char **report_json);

/**
 * Parse a field such as `"z*zbar + exp(z)"`.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SurfintStatus surfint_field_parse(const char *text, struct SurfintField **out);

/**
 * # Safety
 * `f` must come from this library or be null.
 */
void surfint_field_free(struct SurfintField *f);

/**
 * Value at `x + iy`.
 *
 * # Safety
 * `f` must be a live handle and `re`, `im` valid pointers.
 */
enum SurfintStatus surfint_field_eval(const struct SurfintField *f,
                                      double x,
                                      double y,
                                      double *re,
                                      double *im);

/**
 * Wirtinger derivative: `wrt_zbar == 0` for `∂_z`, otherwise `∂_z̄`.
 *
 * # Safety
 * `f` must be a live handle and `out` a valid pointer.
 */
enum SurfintStatus surfint_field_diff(const struct SurfintField *f,
                                      int32_t wrt_zbar,
                                      struct SurfintField **out);

/**
 * Canonical text of a field.
 *
 * # Safety
 * `f` must be a live handle and `out` a valid pointer.
 */
enum SurfintStatus surfint_field_to_string(const struct SurfintField *f, char **out);

/**
 * Sphere obstruction `|Remn|/φ³` for the pair of trace-free tensors given as
 * `xx, xy, xz, yy, yz, zz`, at chart point `x + iy`.
 *
 * # Safety
 * `l1`, `l2` must point to 6 doubles and `out` be valid.
 */
enum SurfintStatus surfint_sphere_residual(const double *l1,
                                           const double *l2,
                                           double x,
                                           double y,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFINT_H */
