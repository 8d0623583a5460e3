#ifndef WQ4TS_H
#define WQ4TS_H

/* C interface to the wq4ts library. Handles are opaque; every call returns a
 * status code, and on failure wq4ts_last_error() describes the most recent
 * error on the calling thread. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define WQ4TS_API __declspec(dllexport)
#else
#define WQ4TS_API __attribute__((visibility("default")))
#endif

typedef enum wq4ts_status {
  WQ4TS_OK = 0,
  WQ4TS_INVALID_ARGUMENT = 1,
  WQ4TS_CONFIG = 2,
  WQ4TS_IO = 3,
  WQ4TS_FORMAT = 4,
  WQ4TS_DATA = 5,
  WQ4TS_NUMERIC = 6,
  WQ4TS_INTERNAL = 7
} wq4ts_status;

typedef struct wq4ts_wavebook wq4ts_wavebook;
typedef struct wq4ts_model wq4ts_model;

typedef struct wq4ts_wavebook_info {
  int lambda;
  int m;
  double f_c;
  size_t max_basis_length;
} wq4ts_wavebook_info;

WQ4TS_API const char* wq4ts_version(void);

/* Message and error type tag (e.g. "ScaleError") of the last failure on this
 * thread. Valid until the next failing call on the same thread. */
WQ4TS_API const char* wq4ts_last_error(void);
WQ4TS_API const char* wq4ts_last_error_type(void);

/* filter: "haar", "db2" or "file:<path>". */
WQ4TS_API wq4ts_status wq4ts_wavebook_build(const char* filter, int m, int lambda, wq4ts_wavebook** out);
WQ4TS_API wq4ts_status wq4ts_wavebook_load(const char* path, wq4ts_wavebook** out);
WQ4TS_API wq4ts_status wq4ts_wavebook_save(const wq4ts_wavebook* book, const char* path);
WQ4TS_API wq4ts_status wq4ts_wavebook_info_get(const wq4ts_wavebook* book, wq4ts_wavebook_info* info);
WQ4TS_API wq4ts_status wq4ts_wavebook_basis_length(const wq4ts_wavebook* book, int index, size_t* length);
WQ4TS_API void wq4ts_wavebook_free(wq4ts_wavebook* book);

/* Max deviation from unitarity of the named filter's modulation matrix. */
WQ4TS_API wq4ts_status wq4ts_filter_unitarity(const char* filter, int grid_points, double* deviation);

/* Writes lambda * n doubles (row-major, one row per basis) into tokens. */
WQ4TS_API wq4ts_status wq4ts_tokenize(const wq4ts_wavebook* book, const double* x, size_t n, int use_fft,
                                      double* tokens);

/* Tokenizes x and writes the grid to path; format "binary" or "csv". */
WQ4TS_API wq4ts_status wq4ts_tokenize_to_file(const wq4ts_wavebook* book, const double* x, size_t n, int use_fft,
                                              const char* format, const char* path);

/* Reads a single-column CSV (optional header). *values is released with
 * wq4ts_free. */
WQ4TS_API wq4ts_status wq4ts_read_series_csv(const char* path, double** values, size_t* n);

WQ4TS_API wq4ts_status wq4ts_model_load(const char* checkpoint, wq4ts_model** out);
/* Output length of a head, and the window length the model expects. */
WQ4TS_API wq4ts_status wq4ts_model_shape(const wq4ts_model* model, int head, size_t* window, size_t* outputs);
WQ4TS_API wq4ts_status wq4ts_model_predict(const wq4ts_model* model, const double* x, size_t n, int head,
                                           double* out, size_t out_len);
WQ4TS_API void wq4ts_model_free(wq4ts_model* model);

/* Runs "pretrain", "finetune" or "evaluate". config_path may be NULL for
 * defaults; overrides holds n_overrides "key=value" strings. With dry_run set
 * nothing is read or written and the summary is the plan. *summary is a JSON
 * string released with wq4ts_string_free. */
WQ4TS_API wq4ts_status wq4ts_run(const char* command, const char* config_path, const char* const* overrides,
                                 size_t n_overrides, int dry_run, char** summary);

WQ4TS_API void wq4ts_string_free(char* s);
WQ4TS_API void wq4ts_free(void* p);

#ifdef __cplusplus
}
#endif

#endif
