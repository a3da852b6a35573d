#ifndef NMK_H
#define NMK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum NmkStatus {
  NMK_STATUS_OK = 0,
  /**
   * File or serialisation failure.
   */
  NMK_STATUS_IO = 1,
  /**
   * Invalid configuration, state or search.
   */
  NMK_STATUS_INVALID = 2,
  /**
   * Numerical non-convergence.
   */
  NMK_STATUS_NUMERICS = 3,
  NMK_STATUS_NULL_POINTER = 4,
  /**
   * A string argument was not valid UTF-8.
   */
  NMK_STATUS_UTF8 = 5,
  /**
   * Internal panic caught at the boundary.
   */
  NMK_STATUS_PANIC = 6,
} NmkStatus;

/**
 * Opaque run configuration.
 */
typedef struct NmkConfig NmkConfig;

/**
 * Opaque result of one measure run.
 */
typedef struct NmkResult NmkResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *nmk_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *nmk_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer returned by this library and not yet freed.
 */
void nmk_string_free(char *s);

/**
 * New configuration with default settings.
 */
struct NmkConfig *nmk_config_new(void);

/**
 * Parses a key/value configuration text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NmkStatus nmk_config_from_str(const char *text, struct NmkConfig **out);

/**
 * Reads a key/value configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NmkStatus nmk_config_from_file(const char *path, struct NmkConfig **out);

/**
 * Sets one `section.key` entry, as in a configuration file.
 *
 * # Safety
 * `cfg` must be a live handle and the strings NUL-terminated.
 */
enum NmkStatus nmk_config_set(struct NmkConfig *cfg,
                              const char *section,
                              const char *key,
                              const char *value);

/**
 * Validates the configuration.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum NmkStatus nmk_config_validate(const struct NmkConfig *cfg);

/**
 * Canonical hash of the configuration as a new string.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum NmkStatus nmk_config_hash(const struct NmkConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be null or a live handle; it is invalid afterwards.
 */
void nmk_config_free(struct NmkConfig *cfg);

/**
 * Runs the configured measure.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum NmkStatus nmk_run_measure(const struct NmkConfig *cfg, struct NmkResult **out);

/**
 * Runs one reference table and writes its rows as a JSON array.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum NmkStatus nmk_run_table_json(const struct NmkConfig *cfg,
                                  uint8_t which,
                                  bool timing,
                                  char **out);

/**
 * Measure value, or NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
double nmk_result_value(const struct NmkResult *res);

/**
 * Horizon the value was taken on, or NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
double nmk_result_horizon(const struct NmkResult *res);

/**
 * Whether horizon doubling settled; false for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
bool nmk_result_converged(const struct NmkResult *res);

/**
 * The full record as JSON. With `timing` false the wall time is zeroed.
 *
 * # Safety
 * `res` must be a live handle and `out` a valid pointer.
 */
enum NmkStatus nmk_result_to_json(const struct NmkResult *res, bool timing, char **out);

/**
 * Label of the optimal input as a new string.
 *
 * # Safety
 * `res` must be a live handle and `out` a valid pointer.
 */
enum NmkStatus nmk_result_argmax_label(const struct NmkResult *res, char **out);

/**
 * # Safety
 * `res` must be null or a live handle; it is invalid afterwards.
 */
void nmk_result_free(struct NmkResult *res);

/**
 * Single-qubit coherence factor `r(t)` of ohmic-like pure dephasing.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NmkStatus nmk_dephasing_factor(double t, double s, double eta, double omega_c, double *out);

/**
 * Excited-state survival `p(t)` of Lorentzian amplitude damping.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NmkStatus nmk_damping_parameter(double t, double gamma0, double lambda, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NMK_H */
