#ifndef ISAC_DETECT_H
#define ISAC_DETECT_H

/* Generated by cbindgen from isac-detect-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this API.
 */
typedef enum IsacStatus {
  /**
   * The call succeeded and all output parameters are valid.
   */
  ISAC_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ISAC_STATUS_NULL_POINTER = 1,
  /**
   * A scalar or buffer argument was outside its documented domain.
   */
  ISAC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The configuration failed to parse or validate.
   */
  ISAC_STATUS_CONFIG_ERROR = 3,
  /**
   * A numerical routine could not complete (e.g. an indefinite
   * covariance or an unattainable false-alarm target).
   */
  ISAC_STATUS_MATH_ERROR = 4,
  /**
   * An internal invariant failed; the library caught a panic.
   */
  ISAC_STATUS_INTERNAL = 5,
} IsacStatus;

/**
 * Opaque system configuration handle.
 */
typedef struct IsacConfig IsacConfig;

/**
 * Opaque detector handle: a configuration together with the scenario,
 * transmit plan, and null-hypothesis model deterministically derived from
 * the configuration's seed.
 */
typedef struct IsacDetector IsacDetector;

/**
 * One detector verdict on a frame.
 */
typedef struct IsacDetection {
  /**
   * Value of the detection statistic.
   */
  double statistic;
  /**
   * Real part of the estimated target amplitude.
   */
  double alpha_re;
  /**
   * Imaginary part of the estimated target amplitude.
   */
  double alpha_im;
  /**
   * Log-domain threshold calibrated for the requested false-alarm rate.
   */
  double threshold;
  /**
   * True when the statistic exceeds the threshold.
   */
  bool detected;
} IsacDetection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the library version as a static NUL-terminated string.
 */
const char *isac_version(void);

/**
 * Allocates a configuration with the reference operating point.
 *
 * Returns null only if allocation fails.  Release with
 * [`isac_config_free`].
 */
struct IsacConfig *isac_config_default(void);

/**
 * Parses and validates a TOML configuration document.
 *
 * # Safety
 *
 * `text` must point to a NUL-terminated string; `out` must be a valid
 * pointer to a handle slot.
 */
enum IsacStatus isac_config_from_toml(const char *text, struct IsacConfig **out);

/**
 * Replaces the configuration's master seed.
 *
 * # Safety
 *
 * `cfg` must be a live handle from this library.
 */
enum IsacStatus isac_config_set_seed(struct IsacConfig *cfg, uint64_t seed);

/**
 * Resizes the frame, preserving the configured pilot fraction.
 *
 * # Safety
 *
 * `cfg` must be a live handle from this library.
 */
enum IsacStatus isac_config_set_frame_len(struct IsacConfig *cfg, uintptr_t frame_len);

/**
 * Writes the configuration's canonical hash as a NUL-terminated string.
 *
 * `cap` is the capacity of `out` in bytes and must be at least 17.
 *
 * # Safety
 *
 * `cfg` must be a live handle; `out` must point to at least `cap` writable
 * bytes.
 */
enum IsacStatus isac_config_hash(const struct IsacConfig *cfg, char *out, uintptr_t cap);

/**
 * Releases a configuration handle.  Null is ignored.
 *
 * # Safety
 *
 * `cfg` must be a handle from this library that has not been freed.
 */
void isac_config_free(struct IsacConfig *cfg);

/**
 * Builds a detector from a configuration.
 *
 * The scenario (channels, clutter, target) and transmit plan are derived
 * deterministically from the configuration's seed, so equal configurations
 * produce detectors with identical behavior.
 *
 * # Safety
 *
 * `cfg` must be a live handle; `out` must be a valid pointer to a handle
 * slot.
 */
enum IsacStatus isac_detector_new(const struct IsacConfig *cfg, struct IsacDetector **out);

/**
 * Releases a detector handle.  Null is ignored.
 *
 * # Safety
 *
 * `det` must be a handle from this library that has not been freed.
 */
void isac_detector_free(struct IsacDetector *det);

/**
 * Reports the frame dimensions the detector expects: `rows` receive
 * antennas by `cols` time samples.
 *
 * # Safety
 *
 * `det` must be a live handle; `rows` and `cols` must be valid pointers.
 */
enum IsacStatus isac_detector_dims(const struct IsacDetector *det,
                                   uintptr_t *rows,
                                   uintptr_t *cols);

/**
 * Reports the payload-to-pilot gain ratio used by threshold calibration.
 *
 * # Safety
 *
 * `det` must be a live handle; `out` must be a valid pointer.
 */
enum IsacStatus isac_detector_ratio(const struct IsacDetector *det, double *out);

/**
 * Computes the log-domain threshold delivering false-alarm probability
 * `p_fa` for this detector.  `p_fa` must lie strictly in (0, 1).
 *
 * # Safety
 *
 * `det` must be a live handle; `out` must be a valid pointer.
 */
enum IsacStatus isac_detector_threshold(const struct IsacDetector *det, double p_fa, double *out);

/**
 * Draws one frame from the detector's statistical model into `samples`
 * (layout as documented at the top; `len` must equal `2 * rows * cols`).
 * `target_present` selects the hypothesis; `trial_index` selects an
 * independent reproducible random stream.
 *
 * # Safety
 *
 * `det` must be a live handle; `samples` must point to `len` writable
 * doubles.
 */
enum IsacStatus isac_detector_synthesize(const struct IsacDetector *det,
                                         bool target_present,
                                         uint64_t trial_index,
                                         double *samples,
                                         uintptr_t len);

/**
 * Runs the GLRT on a caller-supplied frame and calibrates the decision
 * threshold for false-alarm probability `p_fa`.
 *
 * `len` must equal `2 * rows * cols` for the detector's dimensions.
 *
 * # Safety
 *
 * `det` must be a live handle; `samples` must point to `len` readable
 * doubles; `out` must be a valid pointer.
 */
enum IsacStatus isac_detector_evaluate(const struct IsacDetector *det,
                                       const double *samples,
                                       uintptr_t len,
                                       double p_fa,
                                       struct IsacDetection *out);

/**
 * Closed-form false-alarm probability at log-domain threshold `log_eta`
 * for frame length `l` and payload-to-pilot gain ratio `ratio`.
 *
 * # Safety
 *
 * `out` must be a valid pointer.
 */
enum IsacStatus isac_fap_closed_form(double log_eta, uintptr_t l, double ratio, double *out);

/**
 * Log-domain threshold delivering false-alarm probability `p_fa` for
 * frame length `l` and payload-to-pilot gain ratio `ratio`.
 *
 * # Safety
 *
 * `out` must be a valid pointer.
 */
enum IsacStatus isac_fap_threshold(double p_fa, uintptr_t l, double ratio, double *out);

/**
 * First-order Marcum Q function `Q1(a, b)`.
 *
 * # Safety
 *
 * `out` must be a valid pointer.
 */
enum IsacStatus isac_marcum_q1(double a, double b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISAC_DETECT_H */
