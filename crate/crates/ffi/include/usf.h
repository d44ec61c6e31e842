#ifndef USF_H
#define USF_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum UsfStatus {
  USF_STATUS_OK = 0,
  USF_STATUS_NULL_POINTER = 1,
  USF_STATUS_INVALID_INPUT = 2,
  USF_STATUS_NUMERICAL = 3,
  USF_STATUS_BUFFER_TOO_SMALL = 4,
  USF_STATUS_INTERNAL = 5,
} UsfStatus;

/**
 * Opaque sampling kernel.
 */
typedef struct UsfKernel UsfKernel;

/**
 * Opaque spike train.
 */
typedef struct UsfSpikeTrain UsfSpikeTrain;

/**
 * Parameters of exact recovery. `spectral_count = 0` selects the default.
 */
typedef struct UsfExactParams {
  size_t k;
  size_t h;
  double zeta;
  double tv_norm;
  size_t spectral_count;
} UsfExactParams;

/**
 * Iterative solver settings. `sigma_stop <= 0` selects the bit-budget rule.
 */
typedef struct UsfItersisParams {
  size_t order;
  size_t fold_count;
  size_t spectral_count;
  size_t outer_max;
  size_t inner_max;
  size_t init_count;
  double sigma_stop;
  uint64_t seed;
} UsfItersisParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *usf_last_error(void);

/**
 * Kernel `sum_n coeffs[n] beta^order(t/gamma - n)`.
 */
enum UsfStatus usf_kernel_new(const double *coeffs,
                              size_t len,
                              double gamma,
                              size_t order,
                              struct UsfKernel **out);

void usf_kernel_free(struct UsfKernel *kernel);

/**
 * Evaluates the kernel shifted to start at `t = 0`.
 */
enum UsfStatus usf_kernel_eval(const struct UsfKernel *kernel, double t, double *out);

enum UsfStatus usf_kernel_support_width(const struct UsfKernel *kernel, double *out);

double usf_favard_constant(size_t order);

/**
 * Centered modulo `x` into `[-lambda, lambda)`; NaN when `lambda <= 0`.
 */
double usf_modulo_fold(double x, double lambda);

enum UsfStatus usf_spikes_new(const double *amplitudes,
                              const double *delays,
                              size_t len,
                              struct UsfSpikeTrain **out);

void usf_spikes_free(struct UsfSpikeTrain *spikes);

/**
 * Number of spikes; 0 for a null handle.
 */
size_t usf_spikes_count(const struct UsfSpikeTrain *spikes);

/**
 * Copies amplitudes and delays into caller buffers of capacity `cap`.
 */
enum UsfStatus usf_spikes_get(const struct UsfSpikeTrain *spikes,
                              double *amplitudes,
                              double *delays,
                              size_t cap);

/**
 * Writes `count` samples `g(nT)` of the filtered spike train into `out`.
 */
enum UsfStatus usf_synthesize(const struct UsfSpikeTrain *spikes,
                              const struct UsfKernel *kernel,
                              double step,
                              size_t count,
                              double *out);

/**
 * Exact recovery from unquantized folded samples.
 */
enum UsfStatus usf_recover_exact(const double *y,
                                 size_t len,
                                 double step,
                                 double lambda,
                                 const struct UsfKernel *kernel,
                                 const struct UsfExactParams *params,
                                 struct UsfSpikeTrain **out);

/**
 * Iterative recovery from folded samples quantized to `bits` bits. When
 * `residue` is non-null it receives the `len - 1` recovered fold-correction
 * differences.
 */
enum UsfStatus usf_itersis_recover(const double *y,
                                   size_t len,
                                   double step,
                                   double lambda,
                                   uint32_t bits,
                                   const struct UsfKernel *kernel,
                                   const struct UsfItersisParams *params,
                                   struct UsfSpikeTrain **out,
                                   double *residue);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* USF_H */
