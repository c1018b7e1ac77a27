#include <stdio.h>
#include "climate_stress.h"

int main(void) {
    CsRun *run = NULL;
    if (cs_run_original_dice("optimal", &run) != CS_STATUS_OK) {
        fprintf(stderr, "run failed: %s\n", cs_last_error_message());
        return 1;
    }
    double t = 0.0, scc = 0.0;
    int32_t year = 0;
    if (cs_run_temperature(run, 2100, &t) != CS_STATUS_OK) return 2;
    if (cs_run_scc(run, 2025, &scc) != CS_STATUS_OK) return 3;
    if (cs_run_first_full_abatement_year(run, &year) != CS_STATUS_OK) return 4;
    if (cs_run_temperature(run, 2101, &t) != CS_STATUS_NOT_FOUND) return 5;
    CsStressResult results[4];
    size_t written = 0;
    if (cs_stress_default_portfolios(run, 2100, 5000, 1, results, 4, &written) != CS_STATUS_OK) return 6;
    printf("%d %zu %.3f\n", year, written, scc);
    cs_run_free(run);
    return 0;
}
