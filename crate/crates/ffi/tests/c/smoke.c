#include <math.h>
#include <stdio.h>

#include "dirac.h"

#define H 8
#define W 8
#define N (H * W)

#define CHECK(call)                                                            \
    do {                                                                       \
        DiracStatus s_ = (call);                                               \
        if (s_ != DIRAC_STATUS_OK) {                                           \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_,            \
                    dirac_last_error() ? dirac_last_error() : "?");            \
            return 1;                                                          \
        }                                                                      \
    } while (0)

int main(void) {
    DiracPrior *prior = NULL;
    DiracProcess *blur = NULL;
    DiracTrajectory *traj = NULL;
    DiracSamplerOptions options;
    DiracStep step;
    double x0[N], y[N], out[N];

    CHECK(dirac_prior_new(H, W, 2.0, 1e-4, 0.5, &prior));
    CHECK(dirac_process_new_blur(H, W, 0.3, 3.0, 0, &blur));
    CHECK(dirac_prior_sample(prior, 1, x0, N));
    CHECK(dirac_measure(blur, 0.01, 0.05, 2, x0, y, N));
    CHECK(dirac_sampler_options_default(&options));
    options.delta_t = 0.1;
    CHECK(dirac_sample_oracle(prior, blur, 0.01, 0.05, y, x0, N, &options, &traj));
    if (dirac_trajectory_len(traj) != 10) {
        fprintf(stderr, "expected 10 steps, got %zu\n", dirac_trajectory_len(traj));
        return 1;
    }
    CHECK(dirac_trajectory_step(traj, 9, &step));
    CHECK(dirac_trajectory_output(traj, out, N));
    for (int i = 0; i < N; i++) {
        if (!isfinite(out[i])) {
            fprintf(stderr, "non-finite output at %d\n", i);
            return 1;
        }
    }
    if (dirac_process_apply(blur, 2.0, x0, out, N) != DIRAC_STATUS_INVALID_ARGUMENT || !dirac_last_error()) {
        fprintf(stderr, "out-of-range severity accepted\n");
        return 1;
    }
    printf("dirac %s: t=%.2f psnr=%.3f eps_dc=%.5f\n", dirac_version(), step.t, step.psnr, step.eps_dc);

    dirac_trajectory_free(traj);
    dirac_process_free(blur);
    dirac_prior_free(prior);
    return 0;
}
