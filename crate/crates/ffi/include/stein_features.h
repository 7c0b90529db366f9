#ifndef STEIN_FEATURES_H
#define STEIN_FEATURES_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every call.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_NUMERICAL = 3,
  SF_STATUS_IO = 4,
  SF_STATUS_PARSE = 5,
  SF_STATUS_PANIC = 6,
} SfStatus;

/**
 * Frequency samplers accepted by [`sf_sample_frequencies`].
 */
typedef enum SfSampler {
  SF_SAMPLER_MC = 0,
  SF_SAMPLER_QMC = 1,
  SF_SAMPLER_ORF = 2,
  SF_SAMPLER_SVGD = 3,
} SfSampler;

/**
 * Opaque mixture of frequency matrices.
 */
typedef struct SfMixture SfMixture;

/**
 * Training options for [`sf_mixture_fit`].
 */
typedef struct SfFitOptions {
  size_t iterations;
  double step_size;
  /**
   * Non-zero selects the adaptive (adagrad) step rule.
   */
  int32_t adaptive;
  /**
   * Non-zero learns the noise variance.
   */
  int32_t learn_noise;
} SfFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *sf_last_error_message(void);

/**
 * Draws `rows × dims` frequencies for an isotropic RBF kernel into `out`
 * (row-major). `sampler` is an [`SfSampler`] value; the SVGD sampler uses
 * 200 steps of size 0.05.
 *
 * # Safety
 * `out` must be valid for `rows * dims` writes.
 */
enum SfStatus sf_sample_frequencies(uint32_t sampler,
                                    double lengthscale,
                                    size_t rows,
                                    size_t dims,
                                    uint64_t seed,
                                    double *out);

/**
 * Random Fourier features of `n × d` inputs `x` for `rows × d` frequencies
 * `omega`; writes the `2·rows × n` feature matrix row-major into `out`.
 *
 * # Safety
 * Buffers must be valid for the stated sizes.
 */
enum SfStatus sf_rff_features(const double *x,
                              size_t n,
                              size_t d,
                              const double *omega,
                              size_t rows,
                              double *out);

/**
 * Builds a mixture from a row-major `components × rows × dims` tensor.
 *
 * # Safety
 * `tensor` must hold `components * rows * dims` values; `out` must be valid.
 */
enum SfStatus sf_mixture_new(size_t components,
                             size_t rows,
                             size_t dims,
                             const double *tensor,
                             double noise_variance,
                             double alpha,
                             double prior_scale,
                             struct SfMixture **out);

/**
 * Initial mixture for `n × d` data: independent MC draws per component
 * around the median input distance, default prior.
 *
 * # Safety
 * `x` holds `n * d` values, `y` holds `n`; `out` must be valid.
 */
enum SfStatus sf_mixture_init(const double *x,
                              const double *y,
                              size_t n,
                              size_t d,
                              size_t rows,
                              size_t components,
                              double alpha,
                              uint64_t seed,
                              struct SfMixture **out);

/**
 * Releases a mixture. Null is ignored.
 *
 * # Safety
 * `mixture` must come from this library and not be used afterwards.
 */
void sf_mixture_free(struct SfMixture *mixture);

/**
 * Reports the mixture's components `M`, frequencies `R` and input dimension `d`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum SfStatus sf_mixture_dims(const struct SfMixture *mixture,
                              size_t *components,
                              size_t *rows,
                              size_t *dims);

/**
 * Copies the frequency tensor (row-major `M × R × d`) and the noise variance.
 *
 * # Safety
 * `tensor` must be valid for `len` writes and `noise_variance` for one.
 */
enum SfStatus sf_mixture_parameters(const struct SfMixture *mixture,
                                    double *tensor,
                                    size_t len,
                                    double *noise_variance);

/**
 * Trains the mixture in place on `n × d` data.
 *
 * # Safety
 * `x` holds `n * d` values and `y` holds `n`.
 */
enum SfStatus sf_mixture_fit(struct SfMixture *mixture,
                             const double *x,
                             const double *y,
                             size_t n,
                             size_t d,
                             struct SfFitOptions options);

/**
 * Mixture predictive mean and latent variance at `n_test × d` points,
 * conditioned on the `n × d` training data.
 *
 * # Safety
 * Input buffers must match the stated sizes; `mean` and `variance` must be
 * valid for `n_test` writes.
 */
enum SfStatus sf_mixture_predict(const struct SfMixture *mixture,
                                 const double *x,
                                 const double *y,
                                 size_t n,
                                 size_t d,
                                 const double *x_test,
                                 size_t n_test,
                                 double *mean,
                                 double *variance);

/**
 * Writes the mixture in the library's text model format.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum SfStatus sf_mixture_save(const struct SfMixture *mixture, const char *path);

/**
 * Reads a mixture written by [`sf_mixture_save`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid.
 */
enum SfStatus sf_mixture_load(const char *path, struct SfMixture **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEIN_FEATURES_H */
