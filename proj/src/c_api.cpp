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
#include "wks/wks.h"

#include <exception>
#include <memory>
#include <new>
#include <string>

#include "wks/error.hpp"
#include "wks/experiment.hpp"
#include "wks/hj_solve.hpp"
#include "wks/mather_lp.hpp"
#include "wks/parallel.hpp"

struct wks_model {
  wks::ControlModel model;
};

struct wks_field {
  wks::GridField field;
};

struct wks_run {
  wks::RunResult result;
};

struct wks_diff {
  wks::DiffReport report;
};

namespace {

thread_local std::string g_last_error;

wks_status StatusOf(wks::ErrorKind kind) {
  switch (kind) {
    case wks::ErrorKind::kConfiguration: return WKS_E_CONFIG;
    case wks::ErrorKind::kDomain: return WKS_E_DOMAIN;
    case wks::ErrorKind::kNumerical: return WKS_E_NUMERIC;
    case wks::ErrorKind::kInfeasible: return WKS_E_INFEASIBLE;
    case wks::ErrorKind::kIo: return WKS_E_IO;
    case wks::ErrorKind::kInternal: return WKS_E_INTERNAL;
  }
  return WKS_E_INTERNAL;
}

wks_status Argument(const char* what) {
  g_last_error = what;
  return WKS_E_ARGUMENT;
}

template <typename F>
wks_status Guard(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const wks::Error& e) {
    g_last_error = e.what();
    return StatusOf(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return WKS_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return WKS_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return WKS_E_INTERNAL;
  }
}

struct Discretization {
  wks::PeriodicGrid grid;
  wks::VelocitySet vset;
  double dt;
};

Discretization Discretize(const wks::ControlModel& model, const wks_discretization& disc) {
  wks::PeriodicGrid grid(model.d, disc.n);
  wks::VelocitySet vset = wks::MakeVelocitySet(model.d, disc.vmax, disc.vpoints);
  double dt = disc.dt > 0.0 ? disc.dt : wks::DefaultDt(grid, vset);
  return {grid, vset, dt};
}

}  // namespace

extern "C" {

const char* wks_version(void) { return wks::kVersion; }

const char* wks_status_name(wks_status status) {
  switch (status) {
    case WKS_OK: return "ok";
    case WKS_E_CONFIG: return "configuration error";
    case WKS_E_DOMAIN: return "domain error";
    case WKS_E_NUMERIC: return "numerical error";
    case WKS_E_INFEASIBLE: return "infeasible";
    case WKS_E_IO: return "io error";
    case WKS_E_ARGUMENT: return "invalid argument";
    case WKS_E_INTERNAL: return "internal error";
    case WKS_E_THRESHOLD: return "acceptance threshold failed";
  }
  return "unknown status";
}

const char* wks_last_error(void) { return g_last_error.c_str(); }

wks_status wks_set_threads(int threads) {
  if (threads < 0) return Argument("threads must be nonnegative");
  return Guard([&] {
    wks::SetMaxThreads(threads);
    return WKS_OK;
  });
}

size_t wks_model_count(void) { return wks::BuiltinModelNames().size(); }

const char* wks_model_name(size_t index) {
  static const std::vector<std::string> names = wks::BuiltinModelNames();
  return index < names.size() ? names[index].c_str() : nullptr;
}

wks_status wks_model_create(const char* name, int d, const char* const* keys,
                            const char* const* values, size_t count, wks_model** out) {
  if (!name || !out) return Argument("name and out must not be null");
  if (count > 0 && (!keys || !values)) return Argument("keys and values must not be null");
  *out = nullptr;
  return Guard([&] {
    wks::ParamMap params;
    for (size_t i = 0; i < count; ++i) {
      if (!keys[i] || !values[i]) return Argument("null parameter entry");
      params[keys[i]] = values[i];
    }
    *out = new wks_model{wks::BuiltinModel(name, params, d)};
    return WKS_OK;
  });
}

void wks_model_destroy(wks_model* model) { delete model; }

wks_status wks_model_get_c0(const wks_model* model, double* c0) {
  if (!model || !c0) return Argument("null argument");
  *c0 = model->model.c0;
  return WKS_OK;
}

wks_status wks_model_set_c0(wks_model* model, double c0) {
  if (!model) return Argument("null model");
  model->model.c0 = c0;
  return WKS_OK;
}

wks_status wks_critical_value(const wks_model* model, const wks_discretization* disc, double* c) {
  if (!model || !disc || !c) return Argument("null argument");
  return Guard([&] {
    Discretization dz = Discretize(model->model, *disc);
    wks::Scheme scheme(model->model, dz.grid, dz.vset, dz.dt);
    *c = wks::BuildMatherPolytope(scheme).c;
    return WKS_OK;
  });
}

wks_status wks_solve_perturbed(const wks_model* model, double lambda, const wks_discretization* disc,
                               double tol, size_t max_iter, wks_field** out, wks_solve_info* info) {
  if (!model || !disc || !out) return Argument("null argument");
  *out = nullptr;
  return Guard([&] {
    Discretization dz = Discretize(model->model, *disc);
    wks::SolveOptions opts;
    opts.dt = dz.dt;
    if (tol > 0.0) opts.tol = tol;
    if (max_iter > 0) opts.max_iter = max_iter;
    wks::SolveResult r = wks::SolvePerturbed(model->model, lambda, dz.grid, dz.vset, opts);
    if (info) {
      info->iterations = r.report.iterations;
      info->residual = r.report.final_residual;
      info->converged = r.report.converged ? 1 : 0;
      info->dt = r.report.dt;
    }
    *out = new wks_field{std::move(r.u)};
    return WKS_OK;
  });
}

wks_status wks_nonexistence_certificate(const wks_model* model, double lambda, int n, int* certified,
                                        double* infimum) {
  if (!model || !certified) return Argument("null argument");
  return Guard([&] {
    wks::NonexistenceDetail detail;
    bool cert = wks::NonexistenceCertificate(model->model, lambda, wks::PeriodicGrid(model->model.d, n),
                                             1e-6, &detail);
    *certified = cert ? 1 : 0;
    if (infimum) *infimum = detail.infimum;
    return WKS_OK;
  });
}

size_t wks_field_size(const wks_field* field) { return field ? field->field.size() : 0; }

wks_status wks_field_shape(const wks_field* field, int* d, int* n) {
  if (!field) return Argument("null field");
  if (d) *d = field->field.grid().d();
  if (n) *n = field->field.grid().n();
  return WKS_OK;
}

wks_status wks_field_values(const wks_field* field, double* buffer, size_t capacity) {
  if (!field || !buffer) return Argument("null argument");
  if (capacity < field->field.size()) return Argument("buffer too small");
  const auto& v = field->field.values();
  std::copy(v.begin(), v.end(), buffer);
  return WKS_OK;
}

wks_status wks_field_write_csv(const wks_field* field, const char* path) {
  if (!field || !path) return Argument("null argument");
  return Guard([&] {
    wks::WriteFieldCsv(field->field, std::string(path));
    return WKS_OK;
  });
}

void wks_field_destroy(wks_field* field) { delete field; }

wks_status wks_validate_config(const char* path) {
  if (!path) return Argument("null path");
  return Guard([&] {
    wks::LoadConfig(path);
    return WKS_OK;
  });
}

wks_status wks_run_experiment(const char* config_path, const wks_run_options* options, wks_run** out) {
  if (!config_path || !out) return Argument("null argument");
  *out = nullptr;
  return Guard([&] {
    wks::RunOptions ro;
    if (options) {
      if (options->threads < 0) return Argument("threads must be nonnegative");
      if (options->output_root) ro.output_root = options->output_root;
      ro.strict = options->strict != 0;
      ro.threads = options->threads;
    }
    wks::ExperimentConfig cfg = wks::LoadConfig(config_path);
    auto run = std::make_unique<wks_run>();
    run->result = wks::RunExperiment(cfg, ro);
    wks_status status = WKS_OK;
    if (!run->result.error.empty()) {
      g_last_error = run->result.error;
      status = run->result.failed_stage == "export" ? WKS_E_IO : StatusOf(run->result.error_kind);
    } else if (!run->result.passed) {
      g_last_error = "acceptance checks failed";
      status = WKS_E_THRESHOLD;
    }
    *out = run.release();
    return status;
  });
}

const char* wks_run_directory(const wks_run* run) { return run ? run->result.directory.c_str() : nullptr; }

int wks_run_passed(const wks_run* run) { return run && run->result.passed ? 1 : 0; }

const char* wks_run_failed_stage(const wks_run* run) {
  return run ? run->result.failed_stage.c_str() : nullptr;
}

double wks_run_seconds(const wks_run* run) { return run ? run->result.wall_seconds : 0.0; }

size_t wks_run_check_count(const wks_run* run) { return run ? run->result.checks.size() : 0; }

wks_status wks_run_check(const wks_run* run, size_t index, const char** name, double* value,
                         const char** relation, double* threshold, int* pass) {
  if (!run) return Argument("null run");
  if (index >= run->result.checks.size()) return Argument("check index out of range");
  const wks::StageCheck& c = run->result.checks[index];
  if (name) *name = c.name.c_str();
  if (value) *value = c.value;
  if (relation) *relation = c.relation.c_str();
  if (threshold) *threshold = c.threshold;
  if (pass) *pass = c.pass ? 1 : 0;
  return WKS_OK;
}

size_t wks_run_warning_count(const wks_run* run) { return run ? run->result.warnings.size() : 0; }

const char* wks_run_warning(const wks_run* run, size_t index) {
  if (!run || index >= run->result.warnings.size()) return nullptr;
  return run->result.warnings[index].c_str();
}

void wks_run_destroy(wks_run* run) { delete run; }

wks_status wks_diff_artifacts(const char* dir_a, const char* dir_b, wks_diff** out) {
  if (!dir_a || !dir_b || !out) return Argument("null argument");
  *out = nullptr;
  return Guard([&] {
    *out = new wks_diff{wks::DiffArtifacts(dir_a, dir_b)};
    return WKS_OK;
  });
}

int wks_diff_identical(const wks_diff* diff) { return diff && diff->report.identical ? 1 : 0; }

size_t wks_diff_count(const wks_diff* diff) { return diff ? diff->report.differences.size() : 0; }

const char* wks_diff_entry(const wks_diff* diff, size_t index) {
  if (!diff || index >= diff->report.differences.size()) return nullptr;
  return diff->report.differences[index].c_str();
}

void wks_diff_destroy(wks_diff* diff) { delete diff; }

}  // extern "C"
