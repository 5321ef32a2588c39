#ifndef CHARPOLY_H
#define CHARPOLY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CharpolyStatus {
  CHARPOLY_STATUS_OK = 0,
  CHARPOLY_STATUS_INVALID_ARGUMENT = 1,
  CHARPOLY_STATUS_DIMENSION = 2,
  CHARPOLY_STATUS_NOT_SKEW_SYMMETRIC = 3,
  CHARPOLY_STATUS_CONDITIONS_VIOLATED = 4,
  CHARPOLY_STATUS_ESTIMATION = 5,
  CHARPOLY_STATUS_VERIFICATION = 6,
  CHARPOLY_STATUS_IO = 7,
  CHARPOLY_STATUS_JSON = 8,
  CHARPOLY_STATUS_NULL_POINTER = 9,
  CHARPOLY_STATUS_PANIC = 10,
} CharpolyStatus;

typedef enum CharpolyRegime {
  CHARPOLY_REGIME_COMPLEX_EXACT = 0,
  CHARPOLY_REGIME_INTERPOLATING = 1,
  CHARPOLY_REGIME_EXCLUDED = 2,
} CharpolyRegime;

/**
 * Opaque run configuration.
 */
typedef struct CharpolyConfig CharpolyConfig;

/**
 * Opaque result of an estimation run.
 */
typedef struct CharpolyRecord CharpolyRecord;

typedef struct CharpolyPrediction {
  double log_ratio_mod_constant;
  double kernel_det_ratio;
  double d_value;
  /**
   * A [`CharpolyRegime`] value.
   */
  int32_t regime;
} CharpolyPrediction;

typedef struct CharpolyEntry {
  size_t n;
  size_t zeta_config_id;
  double log_ratio;
  double std_error;
  /**
   * NaN when no prediction was available (forced runs).
   */
  double predicted_log_mod_constant;
  /**
   * NaN when no prediction was available.
   */
  double residual;
} CharpolyEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on the same thread.
 */
const char *charpoly_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *charpoly_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void charpoly_string_free(char *s);

/**
 * Parses a JSON run configuration. A missing seed takes the default.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` writable.
 */
enum CharpolyStatus charpoly_config_from_json(const char *json, struct CharpolyConfig **out);

/**
 * Serialises a configuration; free the result with `charpoly_string_free`.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum CharpolyStatus charpoly_config_to_json(const struct CharpolyConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be null or a handle from `charpoly_config_from_json`.
 */
void charpoly_config_free(struct CharpolyConfig *cfg);

/**
 * Large-n prediction for shifts `z0 + zeta_j / sqrt(n)`.
 *
 * # Safety
 * `zeta_re`/`zeta_im` must hold `m` doubles each; `out` must be writable.
 */
enum CharpolyStatus charpoly_predict(double kappa20_re,
                                     double kappa20_im,
                                     double kappa22,
                                     double z0_re,
                                     double z0_im,
                                     const double *zeta_re,
                                     const double *zeta_im,
                                     size_t m,
                                     size_t n,
                                     struct CharpolyPrediction *out);

/**
 * Runs the Monte Carlo estimate described by `cfg`. On an estimation
 * diagnostic the partial record is still returned through `out` together
 * with `CHARPOLY_STATUS_ESTIMATION`.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum CharpolyStatus charpoly_estimate(const struct CharpolyConfig *cfg,
                                      struct CharpolyRecord **out);

/**
 * # Safety
 * `rec` must be null or a handle from `charpoly_estimate`.
 */
void charpoly_record_free(struct CharpolyRecord *rec);

/**
 * Number of `(n, configuration)` entries; 0 for a null handle.
 *
 * # Safety
 * `rec` must be null or a live handle.
 */
size_t charpoly_record_len(const struct CharpolyRecord *rec);

/**
 * Whether the record is complete (1) or partial (0); -1 for null.
 *
 * # Safety
 * `rec` must be null or a live handle.
 */
int32_t charpoly_record_is_complete(const struct CharpolyRecord *rec);

/**
 * # Safety
 * `rec` must be a live handle and `out` writable.
 */
enum CharpolyStatus charpoly_record_entry(const struct CharpolyRecord *rec,
                                          size_t index,
                                          struct CharpolyEntry *out);

/**
 * Full record as JSON; free the result with `charpoly_string_free`.
 *
 * # Safety
 * `rec` must be a live handle and `out` writable.
 */
enum CharpolyStatus charpoly_record_to_json(const struct CharpolyRecord *rec, char **out);

/**
 * Pfaffian of a `dim x dim` skew-symmetric matrix given row-major as split
 * real and imaginary parts.
 *
 * # Safety
 * `re`/`im` must hold `dim * dim` doubles; `out_re`/`out_im` writable.
 */
enum CharpolyStatus charpoly_pfaffian(size_t dim,
                                      const double *re,
                                      const double *im,
                                      double *out_re,
                                      double *out_im);

/**
 * Closed form of the unitary-group integral `int exp(z tr(A U B U*)) dU`
 * for diagonal `A`, `B` with `d` eigenvalues each.
 *
 * # Safety
 * All input arrays must hold `d` doubles; `out_re`/`out_im` writable.
 */
enum CharpolyStatus charpoly_hciz(size_t d,
                                  const double *a_re,
                                  const double *a_im,
                                  const double *b_re,
                                  const double *b_im,
                                  double z_re,
                                  double z_im,
                                  double *out_re,
                                  double *out_im);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHARPOLY_H */
