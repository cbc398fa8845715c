// Copyright 2026 The wkselect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
/* C interface to the wks library. All functions return a wks_status; on
 * failure wks_last_error() describes the most recent error of the calling
 * thread. Handles are opaque and must be released with their destroy
 * function. */

#ifndef WKS_WKS_H_
#define WKS_WKS_H_

#include <stddef.h>

#if defined(WKS_BUILDING_LIBRARY)
#define WKS_API __attribute__((visibility("default")))
#else
#define WKS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wks_status {
  WKS_OK = 0,
  WKS_E_CONFIG = 1,
  WKS_E_DOMAIN = 2,
  WKS_E_NUMERIC = 3,
  WKS_E_INFEASIBLE = 4,
  WKS_E_IO = 5,
  WKS_E_ARGUMENT = 6,
  WKS_E_INTERNAL = 7,
  /* The run completed but an acceptance threshold failed. */
  WKS_E_THRESHOLD = 8
} wks_status;

typedef struct wks_model wks_model;
typedef struct wks_field wks_field;
typedef struct wks_run wks_run;
typedef struct wks_diff wks_diff;

WKS_API const char* wks_version(void);
WKS_API const char* wks_status_name(wks_status status);
WKS_API const char* wks_last_error(void);
/* 0 restores the hardware default. */
WKS_API wks_status wks_set_threads(int threads);

WKS_API size_t wks_model_count(void);
WKS_API const char* wks_model_name(size_t index);

/* keys/values hold `count` model parameters, e.g. "U.cos" = "1". */
WKS_API wks_status wks_model_create(const char* name, int d, const char* const* keys,
                                    const char* const* values, size_t count, wks_model** out);
WKS_API void wks_model_destroy(wks_model* model);
WKS_API wks_status wks_model_get_c0(const wks_model* model, double* c0);
WKS_API wks_status wks_model_set_c0(wks_model* model, double c0);

typedef struct wks_discretization {
  int n;            /* nodes per axis */
  double vmax;      /* velocity box half-width */
  int vpoints;      /* odd number of velocities per axis */
  double dt;        /* 0 selects 0.4 h / vmax */
} wks_discretization;

/* Critical value from the Mather linear program. */
WKS_API wks_status wks_critical_value(const wks_model* model, const wks_discretization* disc,
                                      double* c);

typedef struct wks_solve_info {
  size_t iterations;
  double residual;
  int converged;
  double dt;
} wks_solve_info;

WKS_API wks_status wks_solve_perturbed(const wks_model* model, double lambda,
                                       const wks_discretization* disc, double tol,
                                       size_t max_iter, wks_field** out, wks_solve_info* info);

WKS_API wks_status wks_nonexistence_certificate(const wks_model* model, double lambda, int n,
                                                int* certified, double* infimum);

WKS_API size_t wks_field_size(const wks_field* field);
WKS_API wks_status wks_field_shape(const wks_field* field, int* d, int* n);
/* Copies up to `capacity` node values. */
WKS_API wks_status wks_field_values(const wks_field* field, double* buffer, size_t capacity);
WKS_API wks_status wks_field_write_csv(const wks_field* field, const char* path);
WKS_API void wks_field_destroy(wks_field* field);

typedef struct wks_run_options {
  const char* output_root; /* NULL: environment, then config */
  int strict;
  int threads;
} wks_run_options;

WKS_API wks_status wks_validate_config(const char* path);

/* Returns WKS_OK when every acceptance check passed, WKS_E_THRESHOLD when
 * the run finished with failed checks (or warnings under strict), or the
 * status of the failing stage. *out is set whenever the run started. */
WKS_API wks_status wks_run_experiment(const char* config_path, const wks_run_options* options,
                                      wks_run** out);
WKS_API const char* wks_run_directory(const wks_run* run);
WKS_API int wks_run_passed(const wks_run* run);
WKS_API const char* wks_run_failed_stage(const wks_run* run);
WKS_API double wks_run_seconds(const wks_run* run);
WKS_API size_t wks_run_check_count(const wks_run* run);
WKS_API wks_status wks_run_check(const wks_run* run, size_t index, const char** name,
                                 double* value, const char** relation, double* threshold,
                                 int* pass);
WKS_API size_t wks_run_warning_count(const wks_run* run);
WKS_API const char* wks_run_warning(const wks_run* run, size_t index);
WKS_API void wks_run_destroy(wks_run* run);

WKS_API wks_status wks_diff_artifacts(const char* dir_a, const char* dir_b, wks_diff** out);
WKS_API int wks_diff_identical(const wks_diff* diff);
WKS_API size_t wks_diff_count(const wks_diff* diff);
WKS_API const char* wks_diff_entry(const wks_diff* diff, size_t index);
WKS_API void wks_diff_destroy(wks_diff* diff);

#ifdef __cplusplus
}
#endif

#endif /* WKS_WKS_H_ */
