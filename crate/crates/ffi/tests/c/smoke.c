#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "laydown.h"

#define CHECK(call)                                                     \
    do {                                                                \
        LdStatus st_ = (call);                                          \
        if (st_ != LD_STATUS_OK) {                                      \
            char msg_[512];                                             \
            ld_last_error_message(msg_, sizeof msg_);                   \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_, msg_);   \
            return 1;                                                   \
        }                                                               \
    } while (0)

int main(void) {
    LdPotential *p = NULL;
    CHECK(ld_potential_quadratic(1.0, &p));
    double v, g[2];
    CHECK(ld_potential_eval(p, 1.0, 0.0, &v, g));
    if (fabs(v - (0.5 + log(2.0 * M_PI))) > 1e-10 || fabs(g[0] - 1.0) > 1e-14) return 2;

    LdPotential *bad = NULL;
    if (ld_potential_family(1.0, 0.5, &bad) != LD_STATUS_CONFIG || bad != NULL) return 3;
    if (ld_last_error_message(NULL, 0) == 0) return 4;

    LdEnsemble *e = NULL;
    CHECK(ld_ensemble_new(p, 0.1, 1.0, 0.01, 100, 3, 1.0, &e));
    CHECK(ld_ensemble_advance(e, 0.5));
    size_t n = ld_ensemble_len(e);
    double *xs = malloc(3 * n * sizeof(double));
    CHECK(ld_ensemble_states(e, xs, 3 * n));
    if (n != 100 || fabs(ld_ensemble_time(e) - 0.5) > 1e-12) return 5;
    free(xs);
    ld_ensemble_free(e);

    LdKinetic *k = NULL;
    CHECK(ld_kinetic_new(p, 16, 16, 8, 1.0, 0.0, 0.9, &k));
    CHECK(ld_kinetic_step(k, 10));
    if (fabs(ld_kinetic_mass(k) - 1.0) > 1e-12) return 6;
    ld_kinetic_free(k);

    ld_potential_free(p);
    printf("ok %s\n", ld_version());
    return 0;
}
