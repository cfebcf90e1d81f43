#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "ctlens.h"

#define CHECK(cond)                                               \
    do {                                                          \
        if (!(cond)) {                                            \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                             \
        }                                                         \
    } while (0)

int main(void) {
    uint8_t a[4] = {1, 1, 0, 0};
    uint8_t b[4] = {1, 0, 0, 0};
    double k = 0;
    CHECK(ctl_cohen_kappa(a, b, 4, &k) == CTL_STATUS_OK);
    CHECK(fabs(k - 0.5) < 1e-12);

    double up = 0, low = 0;
    CHECK(ctl_prevalence_bounds(0.5, 0.8, 2.0, &up, &low) == CTL_STATUS_DOMAIN);
    size_t need = ctl_last_error_message(NULL, 0);
    CHECK(need > 1);
    char *msg = malloc(need);
    ctl_last_error_message(msg, need);
    CHECK(strlen(msg) + 1 == need);
    free(msg);

    char *prompt = NULL;
    CHECK(ctl_render_prompt(CTL_STRATEGY_STEP_BY_STEP, "A post.", &prompt) == CTL_STATUS_OK);
    CHECK(strstr(prompt, "\"A post.\"") != NULL);
    ctl_string_free(prompt);

    CtlVerdict v;
    CHECK(ctl_parse_verdict("No.", CTL_STRATEGY_SIMPLE, &v) == CTL_STATUS_OK);
    CHECK(v == CTL_VERDICT_NO);

    double xs[3] = {1, 2, 3};
    CtlEcdf *e = NULL;
    CHECK(ctl_ecdf_new(xs, 3, &e) == CTL_STATUS_OK);
    CHECK(fabs(ctl_ecdf_eval(e, 2.5) - 2.0 / 3.0) < 1e-12);
    ctl_ecdf_free(e);
    puts("ok");
    return 0;
}
