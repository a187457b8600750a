#ifndef MESOCOV_H
#define MESOCOV_H

#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum MesocovStatus {
  MESOCOV_STATUS_OK = 0,
  MESOCOV_STATUS_NULL_POINTER = 1,
  MESOCOV_STATUS_INVALID_UTF8 = 2,
  MESOCOV_STATUS_CONFIG = 3,
  MESOCOV_STATUS_DOMAIN = 4,
  MESOCOV_STATUS_NUMERICAL = 5,
  MESOCOV_STATUS_PARSE = 6,
  MESOCOV_STATUS_BUFFER_TOO_SMALL = 7,
  MESOCOV_STATUS_PANIC = 8,
} MesocovStatus;

/**
 * Opaque ensemble handle.
 */
typedef struct MesocovEnsemble MesocovEnsemble;

typedef struct MesocovCumulantSums {
  double sum_c4;
  double sum_c3_diag;
  double sum_c22;
} MesocovCumulantSums;

typedef struct MesocovExponents {
  uint32_t nu[6];
  uint32_t n;
  double t;
  double b0;
  double b1;
  double b;
  double bstar;
  double chi;
  double chi_tilde;
} MesocovExponents;

typedef struct MesocovSineKernel {
  double u;
  double s;
  double y1;
  double y2;
  /**
   * NaN at u = 0.
   */
  double y1_avg_asym;
} MesocovSineKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *mesocov_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mesocov_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void mesocov_string_free(char *s);

/**
 * Builds an ensemble from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MesocovStatus mesocov_ensemble_from_json(const char *json, struct MesocovEnsemble **out);

/**
 * GOE (`beta` 1) or GUE (`beta` 2) of dimension `n`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MesocovStatus mesocov_ensemble_gaussian(uint8_t beta, size_t n, struct MesocovEnsemble **out);

/**
 * Releases an ensemble handle. Null is ignored.
 *
 * # Safety
 * `h` must come from a constructor above and not have been freed.
 */
void mesocov_ensemble_free(struct MesocovEnsemble *h);

/**
 * Matrix dimension, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t mesocov_ensemble_dim(const struct MesocovEnsemble *h);

/**
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum MesocovStatus mesocov_ensemble_cumulant_sums(const struct MesocovEnsemble *h,
                                                  struct MesocovCumulantSums *out);

/**
 * Samples one matrix from stream (`master_seed`, `sample_index`) and writes
 * its ascending eigenvalues to `out`, which must hold at least `len` values.
 *
 * # Safety
 * `h` must be a live handle; `out` must point to `len` writable doubles.
 */
enum MesocovStatus mesocov_ensemble_sample_eigenvalues(const struct MesocovEnsemble *h,
                                                       uint64_t master_seed,
                                                       uint64_t sample_index,
                                                       double *out,
                                                       size_t len);

/**
 * Stieltjes transform of the semicircle at `re + i im`, `im > 0`.
 *
 * # Safety
 * `out_re` and `out_im` must be writable.
 */
enum MesocovStatus mesocov_msc(double re, double im, double *out_re, double *out_im);

/**
 * Predicted Cov(Tr G(E1 + iη), conj Tr G(E2 + iη)) including all correction terms.
 *
 * # Safety
 * `h` must be a live handle; `out_re` and `out_im` must be writable.
 */
enum MesocovStatus mesocov_cov_green_conjugate(const struct MesocovEnsemble *h,
                                               double e1,
                                               double e2,
                                               double eta,
                                               double *out_re,
                                               double *out_im);

/**
 * Leading-order conjugate covariance without cumulant or zeta corrections.
 *
 * # Safety
 * `h` must be a live handle; `out_re` and `out_im` must be writable.
 */
enum MesocovStatus mesocov_cov_green_conjugate_gaussian(const struct MesocovEnsemble *h,
                                                        double e1,
                                                        double e2,
                                                        double eta,
                                                        double *out_re,
                                                        double *out_im);

/**
 * Parses one formal monomial and evaluates its exponents.
 *
 * # Safety
 * `monomial` must be a NUL-terminated string; `out` must be writable.
 */
enum MesocovStatus mesocov_formal_exponents(const char *monomial,
                                            double alpha,
                                            double beta,
                                            struct MesocovExponents *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum MesocovStatus mesocov_sine_kernel(double u, struct MesocovSineKernel *out);

/**
 * Takes `{"spec": ..., "observables": [...]}` and writes a JSON array of
 * predictions to `*out`; release it with [`mesocov_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 */
enum MesocovStatus mesocov_predict_json(const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MESOCOV_H */
