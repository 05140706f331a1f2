/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "swqif/swqif.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

int main(int argc, char** argv) {
  const char* csv_path = argc > 1 ? argv[1] : "swqif_c_api.csv";
  swqif_dataset* ds = NULL;
  swqif_report* rep = NULL;
  int clusters = 0, periods = 0, p = 0, df = 0;

  EXPECT(swqif_version() != NULL && strlen(swqif_version()) > 0);

  EXPECT(swqif_dataset_generate("\"cluster-duration-20\"", 0, &ds) == SWQIF_OK);
  EXPECT(swqif_dataset_clusters(ds, &clusters) == SWQIF_OK && clusters == 20);
  EXPECT(swqif_dataset_periods(ds, &periods) == SWQIF_OK && periods == 3);

  EXPECT(swqif_analyze(ds, "{\"structure\": \"duration\", \"correlation\": \"qif\", \"learner\": {\"kind\": \"linear\"}, \"folds\": 2}", &rep) ==
         SWQIF_OK);
  EXPECT(swqif_report_num_params(rep, &p) == SWQIF_OK && p == 3);
  EXPECT(swqif_report_df(rep, &df) == SWQIF_OK && df == 17);
  {
    double beta[3], se[3], lo[3], hi[3], cov[9];
    char* json = NULL;
    char* csv = NULL;
    int k;
    EXPECT(swqif_report_beta(rep, beta, 3) == SWQIF_OK);
    EXPECT(swqif_report_std_errors(rep, se, 3) == SWQIF_OK);
    EXPECT(swqif_report_ci(rep, lo, hi, 3) == SWQIF_OK);
    EXPECT(swqif_report_covariance(rep, cov, 9) == SWQIF_OK);
    for (k = 0; k < 3; ++k) {
      EXPECT(isfinite(beta[k]));
      EXPECT(fabs(se[k] - sqrt(cov[4 * k])) <= 1e-12 * se[k]);
      EXPECT(lo[k] < beta[k] && beta[k] < hi[k]);
    }
    EXPECT(swqif_report_beta(rep, beta, 2) == SWQIF_DIMENSION_MISMATCH);
    EXPECT(swqif_report_to_json(rep, &json) == SWQIF_OK && strstr(json, "average over durations") != NULL);
    EXPECT(swqif_report_to_csv(rep, &csv) == SWQIF_OK && strlen(csv) > 0);
    swqif_string_free(json);
    swqif_string_free(csv);
  }
  swqif_report_free(rep);
  rep = NULL;

  /* round trip through a CSV file */
  {
    swqif_dataset* back = NULL;
    int n = 0;
    EXPECT(swqif_dataset_write_csv(ds, csv_path) == SWQIF_OK);
    EXPECT(swqif_dataset_read_csv(csv_path, NULL, &back) == SWQIF_OK);
    EXPECT(swqif_dataset_clusters(back, &n) == SWQIF_OK && n == 20);
    swqif_dataset_free(back);
  }

  /* probabilities: wrong length is rejected, a valid vector is accepted */
  {
    const double bad[2] = {0.5, 0.5};
    const double good[4] = {0.3, 0.3, 0.4, 0.0};
    EXPECT(swqif_dataset_set_sequence_probs(ds, bad, 2) != SWQIF_OK);
    EXPECT(swqif_dataset_set_sequence_probs(ds, good, 4) == SWQIF_OK);
  }

  /* errors */
  {
    swqif_dataset* none = NULL;
    swqif_status s = swqif_analyze(ds, "{not json", &rep);
    EXPECT(s != SWQIF_OK && swqif_status_is_config(s));
    EXPECT(rep == NULL);
    EXPECT(strlen(swqif_last_error()) > 0);
    EXPECT(swqif_analyze(NULL, "{}", &rep) == SWQIF_INVALID_ARGUMENT);
    EXPECT(swqif_dataset_generate("\"no-such-preset\"", 0, &none) == SWQIF_CONFIG_ERROR);
    EXPECT(none == NULL);
    EXPECT(swqif_dataset_read_csv("/nonexistent/file.csv", NULL, &none) == SWQIF_IO_ERROR);
    EXPECT(none == NULL);
  }
  EXPECT(swqif_status_is_config(SWQIF_CONFIG_ERROR) == 1);
  EXPECT(swqif_status_is_config(SWQIF_SINGULAR_DESIGN) == 0);
  EXPECT(strcmp(swqif_status_name(SWQIF_SINGULAR_DESIGN), "SingularDesign") == 0);

  swqif_dataset_free(ds);
  swqif_dataset_free(NULL);
  swqif_report_free(NULL);
  swqif_string_free(NULL);

  if (failures) {
    fprintf(stderr, "%d failures\n", failures);
    return 1;
  }
  printf("c api: ok\n");
  return 0;
}
