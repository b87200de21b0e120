#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "dqm/dqm.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expectation failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

int main(int argc, char** argv) {
  const char* root = argc > 1 ? argv[1] : ".";
  dqm_scenario* s = NULL;

  EXPECT(dqm_scenario_parse("solver = smoluchowski\nb = 0\n", &s) == DQM_ERR_CONFIG);
  EXPECT(s == NULL);
  EXPECT(strstr(dqm_last_error(), "\"config\"") != NULL);
  EXPECT(dqm_scenario_parse(NULL, &s) == DQM_ERR_ARGUMENT);
  EXPECT(dqm_scenario_load("/nonexistent/dqm.conf", &s) == DQM_ERR_IO);

  EXPECT(dqm_scenario_parse("solver = oracle\noracle = free_quantum\nb = 1\noutput = capi_run\n",
                            &s) == DQM_OK);
  EXPECT(strcmp(dqm_last_error(), "") == 0);

  double v = 0.0;
  EXPECT(dqm_oracle_eval(s, "free_quantum", 4.0, &v) == DQM_OK);
  EXPECT(fabs(v - 2.0) < 1e-14);
  EXPECT(dqm_oracle_eval(s, "commutator", 1.0, &v) == DQM_OK);
  EXPECT(fabs(v - exp(-1.0)) < 1e-10);
  EXPECT(dqm_oracle_eval(s, "nonsense", 1.0, &v) == DQM_ERR_CONFIG);

  size_t needed = 0;
  EXPECT(dqm_scenario_resolved(s, NULL, 0, &needed) == DQM_OK);
  EXPECT(needed > 100);
  char small[8];
  EXPECT(dqm_scenario_resolved(s, small, sizeof small, &needed) == DQM_ERR_ARGUMENT);
  char* text = malloc(needed);
  EXPECT(dqm_scenario_resolved(s, text, needed, &needed) == DQM_OK);
  EXPECT(strstr(text, "solver = oracle\n") != NULL);
  free(text);

  EXPECT(dqm_scenario_set(s, "b", "4") == DQM_OK);
  EXPECT(dqm_oracle_eval(s, "free_quantum", 4.0, &v) == DQM_OK);
  EXPECT(fabs(v - 1.0) < 1e-14);
  EXPECT(dqm_scenario_set(s, "b", "-1") == DQM_ERR_CONFIG);
  EXPECT(dqm_scenario_set(s, "colour", "blue") == DQM_ERR_CONFIG);

  char dir[4096];
  EXPECT(dqm_run(s, root, dir, sizeof dir) == DQM_OK);
  EXPECT(strstr(dir, "capi_run") != NULL);

  char a[4200], b[4200];
  snprintf(a, sizeof a, "%s/timeseries.csv", dir);
  snprintf(b, sizeof b, "%s/timeseries.csv", dir);
  EXPECT(dqm_compare(a, b, "linf", &v) == DQM_OK);
  EXPECT(v == 0.0);
  EXPECT(dqm_compare(a, b, "l2", &v) == DQM_ERR_CONFIG);

  const char* values[] = {"1", "2"};
  double errors[2] = {-1.0, -1.0};
  double slope = 0.0;
  EXPECT(dqm_sweep(s, "b", values, 2, "free_quantum", root, errors, &slope) == DQM_OK);
  EXPECT(errors[0] == 0.0 && errors[1] == 0.0);

  dqm_scenario_free(s);
  EXPECT(dqm_version()[0] != '\0');
  if (failures == 0) printf("C API smoke test passed\n");
  return failures == 0 ? 0 : 1;
}
