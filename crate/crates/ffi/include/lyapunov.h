#ifndef LYAPUNOV_H
#define LYAPUNOV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call.
 */
typedef enum LyapStatus {
  LYAP_STATUS_OK = 0,
  /**
   * The computation ran but the family has a heteroclinic connection or a
   * singular matrix, so no certified value exists. Result structs are
   * still filled in.
   */
  LYAP_STATUS_NOT_CERTIFIABLE = 1,
  /**
   * Null pointer, bad length, invalid weights and the like.
   */
  LYAP_STATUS_INVALID_ARGUMENT = 2,
  LYAP_STATUS_PRECONDITION = 3,
  LYAP_STATUS_NOT_CONTRACTING = 4,
  LYAP_STATUS_ARC_FAILED = 5,
  LYAP_STATUS_POSITIVITY_FAILED = 6,
  LYAP_STATUS_NUMERICAL = 7,
  LYAP_STATUS_BUDGET_EXCEEDED = 8,
  LYAP_STATUS_INTERNAL = 9,
} LyapStatus;

/**
 * How the family was brought into the kernel's domain.
 */
typedef enum LyapPipeline {
  LYAP_PIPELINE_POSITIVE = 0,
  LYAP_PIPELINE_CONJUGATED = 1,
  LYAP_PIPELINE_GHC_DETECTED = 2,
  LYAP_PIPELINE_DEGENERATE = 3,
} LyapPipeline;

/**
 * Opaque weighted family of real 2×2 matrices.
 */
typedef struct LyapFamily LyapFamily;

/**
 * Certified value. Fields are NaN / 0 when `pipeline` is not certifiable.
 */
typedef struct LyapResult {
  double estimate;
  double truncation_bound;
  size_t n;
  size_t m;
  double r;
  enum LyapPipeline pipeline;
} LyapResult;

typedef struct LyapCensusRow {
  uint32_t b;
  uint64_t all_pairs;
  uint64_t degenerate;
  uint64_t no_ghc;
} LyapCensusRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a family from `n` matrices (`4n` doubles) and optional weights.
 * With `weights` null the weights are uniform; otherwise they must be
 * positive and sum to 1 up to 1e-6, and are renormalized.
 *
 * # Safety
 * `entries` must point to `4n` doubles, `weights` to `n` doubles or be null,
 * and `out` must be writable.
 */
enum LyapStatus lyap_family_new(const double *entries,
                                const double *weights,
                                size_t n,
                                struct LyapFamily **out_family);

/**
 * Frees a family. Null is ignored.
 *
 * # Safety
 * `family` must come from [`lyap_family_new`] and not be used afterwards.
 */
void lyap_family_free(struct LyapFamily *family);

/**
 * Certified top Lyapunov exponent of a non-negative family to accuracy `eps`.
 *
 * # Safety
 * `family` must be a live handle and `result` writable.
 */
enum LyapStatus lyap_compute(const struct LyapFamily *family,
                             double eps,
                             struct LyapResult *result);

/**
 * Positivization status and conjugator. `p_out` receives the four entries of
 * `P` (identity when already positive, untouched otherwise).
 *
 * # Safety
 * `family` must be a live handle, `pipeline` writable, `p_out` null or
 * writable for four doubles.
 */
enum LyapStatus lyap_positivize(const struct LyapFamily *family,
                                enum LyapPipeline *pipeline,
                                double *p_out);

/**
 * Dimension of the intersection of two base-`b` Cantor sets with digit sets
 * `d1` and `d2`. `dimension` is NaN when not certifiable.
 *
 * # Safety
 * Digit arrays must hold `n1` and `n2` entries; outputs must be writable.
 */
enum LyapStatus lyap_cantor_dimension(uint32_t b,
                                      const uint32_t *d1,
                                      size_t n1,
                                      const uint32_t *d2,
                                      size_t n2,
                                      double eps,
                                      struct LyapResult *result,
                                      double *dimension);

/**
 * Exact census of all digit-set pairs in base `b` (at most 16). Cost grows
 * like 4^b.
 *
 * # Safety
 * `row` must be writable.
 */
enum LyapStatus lyap_census(uint32_t b, struct LyapCensusRow *row);

/**
 * Growth rate of `x_{n+1} = a x_n + b x_{n-1}` with `(a_i, b_i)` drawn with
 * probability `weights[i]` (uniform when null). Coefficients must be positive.
 *
 * # Safety
 * Arrays must hold `n` entries; outputs must be writable.
 */
enum LyapStatus lyap_recurrence_growth(const double *a,
                                       const double *b,
                                       const double *weights,
                                       size_t n,
                                       double eps,
                                       double *growth,
                                       double *bound);

/**
 * Monte Carlo estimate, valid for any invertible real family.
 *
 * # Safety
 * `family` must be a live handle and outputs writable.
 */
enum LyapStatus lyap_mc(const struct LyapFamily *family,
                        size_t steps,
                        size_t trials,
                        uint64_t seed,
                        double *mean,
                        double *std_error);

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *lyap_last_error(void);

/**
 * Library version, a static string.
 */
const char *lyap_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LYAPUNOV_H */
