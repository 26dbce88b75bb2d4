#include <math.h>
#include <stdio.h>
#include <string.h>

#include "kinlab/kinlab.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

int main(int argc, char** argv) {
  if (argc < 3) {
    fprintf(stderr, "usage: %s <configs dir> <out dir>\n", argv[0]);
    return 2;
  }
  char path[4096];
  char out[4096];

  EXPECT(strlen(kinlab_version()) > 0);
  EXPECT(strcmp(kinlab_status_name(KINLAB_ERR_CONFIG), "") != 0);

  kinlab_config* bad = NULL;
  EXPECT(kinlab_config_parse("[time]\ncfl = fast\n", &bad) == KINLAB_ERR_CONFIG);
  EXPECT(bad == NULL);
  EXPECT(strstr(kinlab_last_error(), "[time] cfl") != NULL);
  EXPECT(kinlab_config_parse(NULL, &bad) == KINLAB_ERR_ARGUMENT);

  snprintf(path, sizeof path, "%s/carleman.cfg", argv[1]);
  kinlab_config* cfg = NULL;
  EXPECT(kinlab_config_load(path, &cfg) == KINLAB_OK);
  if (!cfg) return 1;

  char* text = NULL;
  EXPECT(kinlab_config_emit(cfg, &text) == KINLAB_OK);
  kinlab_config* again = NULL;
  EXPECT(kinlab_config_parse(text, &again) == KINLAB_OK);
  char* text2 = NULL;
  EXPECT(kinlab_config_emit(again, &text2) == KINLAB_OK);
  EXPECT(text && text2 && strcmp(text, text2) == 0);
  kinlab_string_free(text);
  kinlab_string_free(text2);
  kinlab_config_free(again);

  EXPECT(kinlab_config_set(cfg, "verify", "nope", "1") == KINLAB_ERR_CONFIG);
  EXPECT(kinlab_config_set(cfg, "time", "cfl", "fast") == KINLAB_ERR_CONFIG);

  kinlab_exit ex;
  kinlab_config* unit = NULL;
  EXPECT(kinlab_config_parse("[grid]\nx_lo = 0\nx_hi = 1\ny_lo = 0\ny_hi = 1\nvx_lo = -1\nvx_hi = 1\n"
                             "vy_lo = -1\nvy_hi = 1\nnx = 4\nny = 4\nnvx = 4\nnvy = 4\n"
                             "[time]\nT = 1\ncfl = 1.2\n"
                             "[fields]\nE = zero\nq = zero\nS = zero\ng = zero\nh = zero\n",
                             &unit) == KINLAB_OK);
  if (unit) {
    EXPECT(kinlab_backward_exit(unit, 10.0, 0.5, 0.5, 1.0, 0.0, &ex) == KINLAB_OK);
    EXPECT(!ex.never);
    EXPECT(fabs(ex.t_minus - 0.5) < 1e-10);
    EXPECT(fabs(ex.n_dot_v + 1.0) < 1e-10);
    EXPECT(kinlab_backward_exit(unit, 10.0, 0.5, 0.5, 0.0, 0.0, &ex) == KINLAB_OK);
    EXPECT(ex.never);
    kinlab_config_free(unit);
  }

  char* summary = NULL;
  snprintf(out, sizeof out, "%s/check_weight", argv[2]);
  EXPECT(kinlab_run_check_weight(cfg, out, &summary) == KINLAB_OK);
  EXPECT(summary && strstr(summary, "gamma0") != NULL);
  kinlab_string_free(summary);

  EXPECT(kinlab_config_set(cfg, "verify", "beta", "5") == KINLAB_OK);
  snprintf(out, sizeof out, "%s/failing", argv[2]);
  summary = NULL;
  EXPECT(kinlab_run_check_weight(cfg, out, &summary) == KINLAB_ERR_VALIDATION);
  EXPECT(kinlab_run_verify_carleman(cfg, out, &summary) == KINLAB_CHECK_FAILED);
  EXPECT(strstr(kinlab_last_error(), "item (3)") != NULL);
  kinlab_string_free(summary);

  kinlab_config_free(cfg);
  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("capi: ok\n");
  return failures ? 1 : 0;
}
