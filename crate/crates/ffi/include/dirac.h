#ifndef DIRAC_H
#define DIRAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DiracStatus {
  DIRAC_STATUS_OK = 0,
  DIRAC_STATUS_NULL_POINTER = 1,
  DIRAC_STATUS_INVALID_ARGUMENT = 2,
  DIRAC_STATUS_SHAPE_MISMATCH = 3,
  DIRAC_STATUS_NUMERICAL = 4,
  DIRAC_STATUS_UNSUPPORTED = 5,
  DIRAC_STATUS_IO = 6,
  DIRAC_STATUS_PANIC = 7,
} DiracStatus;

typedef enum DiracGuidance {
  DIRAC_GUIDANCE_NONE = 0,
  DIRAC_GUIDANCE_STD_SCALED = 1,
  DIRAC_GUIDANCE_ERROR_SCALED = 2,
} DiracGuidance;

typedef enum DiracOutput {
  DIRAC_OUTPUT_FINAL_ITERATE = 0,
  DIRAC_OUTPUT_POSTERIOR_MEAN = 1,
} DiracOutput;

// Gaussian prior over a 2-D grid.
typedef struct DiracPrior DiracPrior;

// Degradation operator family.
typedef struct DiracProcess DiracProcess;

// Result of one sampler run.
typedef struct DiracTrajectory DiracTrajectory;

// Sampler settings. Always look-ahead increments.
typedef struct DiracSamplerOptions {
  double delta_t;
  double t_stop;
  double eta;
  enum DiracGuidance guidance;
  enum DiracOutput output;
  uint64_t seed;
} DiracSamplerOptions;

// Diagnostics recorded at the start of one sampler step. `psnr` is NaN when
// no ground truth was supplied.
typedef struct DiracStep {
  double t;
  double eps_dc;
  double psnr;
  double prior_nll;
} DiracStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into this library from the same thread.
const char *dirac_last_error(void);

// Library version as a static NUL-terminated string.
const char *dirac_version(void);

// Squared-exponential prior with constant mean.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum DiracStatus dirac_prior_new(size_t height,
                                 size_t width,
                                 double length_scale,
                                 double jitter,
                                 double mean,
                                 struct DiracPrior **out);

// Draws a sample whose entries all lie within `max|μ| + 4·max σ`.
//
// # Safety
// `prior` must be a live handle and `out` must hold `len` doubles.
enum DiracStatus dirac_prior_sample(const struct DiracPrior *prior,
                                    uint64_t seed,
                                    double *out,
                                    size_t len);

// Negative log-density of `x` under the prior.
//
// # Safety
// `prior` must be a live handle, `x` must hold `len` doubles and `out` must
// be writable.
enum DiracStatus dirac_prior_nll(const struct DiracPrior *prior,
                                 const double *x,
                                 size_t len,
                                 double *out);

// # Safety
// `prior` must be NULL or a handle not yet freed.
void dirac_prior_free(struct DiracPrior *prior);

// Separable Gaussian blur whose width grows linearly from `w_min` to
// `w_max`. `kernel_size` 0 picks the size from `w_max`.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum DiracStatus dirac_process_new_blur(size_t height,
                                        size_t width,
                                        double w_min,
                                        double w_max,
                                        size_t kernel_size,
                                        struct DiracProcess **out);

// Centered Gaussian mask `(1 − g)^k` whose width grows linearly to `w1`.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum DiracStatus dirac_process_new_inpaint(size_t height,
                                           size_t width,
                                           double w1,
                                           uint32_t k,
                                           struct DiracProcess **out);

// `(1 − t)·x + t·anchor`.
//
// # Safety
// `anchor` must hold `height * width` doubles and `out` must be writable.
enum DiracStatus dirac_process_new_blend(size_t height,
                                         size_t width,
                                         const double *anchor,
                                         struct DiracProcess **out);

// Degrades `x` to severity `t`.
//
// # Safety
// `process` must be a live handle; `x` and `out` must hold `len` doubles.
enum DiracStatus dirac_process_apply(const struct DiracProcess *process,
                                     double t,
                                     const double *x,
                                     double *out,
                                     size_t len);

// Moves a degraded signal from severity `from` to `to >= from`.
//
// # Safety
// `process` must be a live handle; `y` and `out` must hold `len` doubles.
enum DiracStatus dirac_process_transition(const struct DiracProcess *process,
                                          double from,
                                          double to,
                                          const double *y,
                                          double *out,
                                          size_t len);

// Simulates a measurement `A_1(x0) + σ_1·z` with a geometric noise schedule.
//
// # Safety
// `process` must be a live handle; `x0` and `out` must hold `len` doubles.
enum DiracStatus dirac_measure(const struct DiracProcess *process,
                               double sigma_min,
                               double sigma_max,
                               uint64_t seed,
                               const double *x0,
                               double *out,
                               size_t len);

// # Safety
// `process` must be NULL or a handle not yet freed.
void dirac_process_free(struct DiracProcess *process);

// Fills `out` with the perception-oriented defaults.
//
// # Safety
// `out` must be writable.
enum DiracStatus dirac_sampler_options_default(struct DiracSamplerOptions *out);

// Reconstructs from measurement `y` with the exact posterior-mean denoiser
// of `prior`. `truth` may be NULL; when given, per-step PSNR is recorded.
//
// # Safety
// `prior` and `process` must be live handles, `y` (and `truth` if non-NULL)
// must hold `len` doubles, `options` must be readable and `out` writable.
enum DiracStatus dirac_sample_oracle(const struct DiracPrior *prior,
                                     const struct DiracProcess *process,
                                     double sigma_min,
                                     double sigma_max,
                                     const double *y,
                                     const double *truth,
                                     size_t len,
                                     const struct DiracSamplerOptions *options,
                                     struct DiracTrajectory **out);

// Number of executed steps; 0 for a NULL handle.
//
// # Safety
// `traj` must be NULL or a live handle.
size_t dirac_trajectory_len(const struct DiracTrajectory *traj);

// # Safety
// `traj` must be a live handle and `out` writable.
enum DiracStatus dirac_trajectory_step(const struct DiracTrajectory *traj,
                                       size_t index,
                                       struct DiracStep *out);

// Copies the reconstruction selected by the output mode.
//
// # Safety
// `traj` must be a live handle and `out` must hold `len` doubles.
enum DiracStatus dirac_trajectory_output(const struct DiracTrajectory *traj,
                                         double *out,
                                         size_t len);

// Copies the iterate after the last executed update.
//
// # Safety
// `traj` must be a live handle and `out` must hold `len` doubles.
enum DiracStatus dirac_trajectory_final_iterate(const struct DiracTrajectory *traj,
                                                double *out,
                                                size_t len);

// # Safety
// `traj` must be NULL or a handle not yet freed.
void dirac_trajectory_free(struct DiracTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIRAC_H */
