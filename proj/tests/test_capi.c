/* Exercises the public header from plain C, linked only against libwq4ts. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "wq4ts/wq4ts.h"

static int failures = 0;

#define EXPECT(cond)                                                    \
  do {                                                                  \
    if (!(cond)) {                                                      \
      fprintf(stderr, "%s:%d: expectation failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                       \
    }                                                                   \
  } while (0)

int main(void) {
  EXPECT(strlen(wq4ts_version()) > 0);

  double dev = 1.0;
  EXPECT(wq4ts_filter_unitarity("db2", 512, &dev) == WQ4TS_OK);
  EXPECT(dev < 1e-9);
  EXPECT(wq4ts_filter_unitarity("sym9", 512, &dev) == WQ4TS_CONFIG);
  EXPECT(strcmp(wq4ts_last_error_type(), "ConfigError") == 0);

  wq4ts_wavebook* book = NULL;
  EXPECT(wq4ts_wavebook_build("db2", 8, 0, &book) != WQ4TS_OK);
  EXPECT(book == NULL);
  EXPECT(wq4ts_wavebook_build("db2", 8, 4, &book) == WQ4TS_OK);
  EXPECT(book != NULL);

  wq4ts_wavebook_info info;
  EXPECT(wq4ts_wavebook_info_get(book, &info) == WQ4TS_OK);
  EXPECT(info.lambda == 4 && info.m == 8);
  size_t len0 = 0, len3 = 0;
  EXPECT(wq4ts_wavebook_basis_length(book, 0, &len0) == WQ4TS_OK);
  EXPECT(wq4ts_wavebook_basis_length(book, 3, &len3) == WQ4TS_OK);
  EXPECT(len0 == info.max_basis_length && len3 <= len0 && len3 % 2 == 0);
  EXPECT(wq4ts_wavebook_basis_length(book, 4, &len3) == WQ4TS_INVALID_ARGUMENT);
  EXPECT(strcmp(wq4ts_last_error_type(), "PreconditionError") == 0);

  double x[96], naive[4 * 96], fast[4 * 96];
  for (int i = 0; i < 96; ++i) x[i] = sin(i * 0.3) + 0.1 * i;
  EXPECT(wq4ts_tokenize(book, x, 96, 0, naive) == WQ4TS_OK);
  EXPECT(wq4ts_tokenize(book, x, 96, 1, fast) == WQ4TS_OK);
  double diff = 0.0;
  for (int i = 0; i < 4 * 96; ++i) diff = fmax(diff, fabs(naive[i] - fast[i]));
  EXPECT(diff < 1e-9);

  const char* book_path = "capi_test_book.wqbk";
  EXPECT(wq4ts_wavebook_save(book, book_path) == WQ4TS_OK);
  wq4ts_wavebook* loaded = NULL;
  EXPECT(wq4ts_wavebook_load(book_path, &loaded) == WQ4TS_OK);
  double again[4 * 96];
  EXPECT(wq4ts_tokenize(loaded, x, 96, 0, again) == WQ4TS_OK);
  EXPECT(memcmp(again, naive, sizeof naive) == 0);
  wq4ts_wavebook_free(loaded);
  remove(book_path);

  EXPECT(wq4ts_wavebook_load("/nonexistent/book.wqbk", &loaded) == WQ4TS_IO);
  EXPECT(wq4ts_tokenize_to_file(book, x, 96, 0, "parquet", "x.out") == WQ4TS_CONFIG);

  const char* csv = "capi_test_series.csv";
  FILE* f = fopen(csv, "w");
  fprintf(f, "value\n1\n2.5\n-3\n");
  fclose(f);
  double* values = NULL;
  size_t n = 0;
  EXPECT(wq4ts_read_series_csv(csv, &values, &n) == WQ4TS_OK);
  EXPECT(n == 3 && values[1] == 2.5 && values[2] == -3.0);
  wq4ts_free(values);
  f = fopen(csv, "w");
  fprintf(f, "1\nabc\n");
  fclose(f);
  EXPECT(wq4ts_read_series_csv(csv, &values, &n) == WQ4TS_DATA);
  EXPECT(strstr(wq4ts_last_error(), ":2:") != NULL);
  remove(csv);

  char* summary = NULL;
  const char* sets[] = {"data.paths=[\"/nonexistent/a.csv\"]", "output_dir=capi_never"};
  EXPECT(wq4ts_run("pretrain", NULL, sets, 2, 1, &summary) == WQ4TS_OK);
  EXPECT(summary != NULL && strstr(summary, "\"writes\"") != NULL);
  wq4ts_string_free(summary);
  summary = NULL;
  EXPECT(wq4ts_run("pretrain", NULL, sets, 2, 0, &summary) == WQ4TS_IO);
  EXPECT(summary == NULL);
  EXPECT(wq4ts_run("train", NULL, NULL, 0, 1, &summary) == WQ4TS_CONFIG);

  wq4ts_model* model = NULL;
  EXPECT(wq4ts_model_load("/nonexistent/model.wqmd", &model) == WQ4TS_IO);
  EXPECT(model == NULL);

  /* Train a tiny forecaster, then load and run it. */
  const char* data = "capi_test_sine.csv";
  f = fopen(data, "w");
  fprintf(f, "date,value\n");
  for (int t = 0; t < 300; ++t) fprintf(f, "%d,%.17g\n", t, sin(t * 0.26));
  fclose(f);
  const char* train_sets[] = {"data.paths=[\"capi_test_sine.csv\"]", "output_dir=capi_test_run", "wavebook.lambda=8",
                              "model.L=1", "model.n_heads=2", "data.lookback=24", "data.horizon=6",
                              "train.max_steps=5", "train.max_epochs=1"};
  EXPECT(wq4ts_run("pretrain", NULL, train_sets, 9, 0, &summary) == WQ4TS_OK);
  EXPECT(summary != NULL && strstr(summary, "metrics.json") != NULL);
  wq4ts_string_free(summary);
  EXPECT(wq4ts_model_load("capi_test_run/model.wqmd", &model) == WQ4TS_OK);
  size_t window = 0, outputs = 0;
  EXPECT(wq4ts_model_shape(model, 0, &window, &outputs) == WQ4TS_OK);
  EXPECT(window == 24 && outputs == 6);
  double pred[6];
  EXPECT(wq4ts_model_predict(model, x, 24, 0, pred, 6) == WQ4TS_OK);
  for (int i = 0; i < 6; ++i) EXPECT(isfinite(pred[i]));
  EXPECT(wq4ts_model_predict(model, x, 24, 0, pred, 5) == WQ4TS_INVALID_ARGUMENT);
  EXPECT(wq4ts_model_predict(model, x, 24, 3, pred, 6) == WQ4TS_INVALID_ARGUMENT);
  wq4ts_model_free(model);
  remove(data);
  const char* artifacts[] = {"capi_test_run/model.wqmd", "capi_test_run/wavebook.wqbk", "capi_test_run/history.json",
                             "capi_test_run/metrics.json"};
  for (int i = 0; i < 4; ++i) remove(artifacts[i]);
  remove("capi_test_run");

  wq4ts_wavebook_free(book);
  if (failures) fprintf(stderr, "%d failures\n", failures);
  else printf("C API: all checks passed\n");
  return failures ? 1 : 0;
}
