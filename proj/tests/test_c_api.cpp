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
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "wks/wks.h"

namespace fs = std::filesystem;

namespace {

const char* kConfig = R"([experiment]
kind = vanishing_discount
name = capi
reference = column

[model]
name = mechanical
U.cos = 1

[grid]
d = 1
n = 32

[velocity]
vmax = 2.0
points = 17

[solver]
max_iter = 500000
lambdas = 0.1, 0.03

[acceptance]
final_error = %s
)";

std::string WriteConfig(const fs::path& dir, const std::string& threshold) {
  fs::create_directories(dir);
  std::string text = kConfig;
  text.replace(text.find("%s"), 2, threshold);
  fs::path p = dir / ("capi_" + threshold + ".ini");
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST_CASE("library metadata") {
  CHECK(std::string(wks_version()) == "0.3.1");
  CHECK(std::string(wks_status_name(WKS_OK)) == "ok");
  CHECK(std::string(wks_status_name(WKS_E_THRESHOLD)) == "acceptance threshold failed");
  CHECK(std::string(wks_status_name(static_cast<wks_status>(42))) == "unknown status");
  CHECK(wks_model_count() == 4);
  CHECK(std::string(wks_model_name(0)) == "mechanical");
  CHECK(wks_model_name(99) == nullptr);
  CHECK(wks_set_threads(1) == WKS_OK);
  CHECK(wks_set_threads(-2) == WKS_E_ARGUMENT);
}

TEST_CASE("models, critical values and solves") {
  const char* keys[] = {"U.cos"};
  const char* values[] = {"1"};
  wks_model* m = nullptr;
  REQUIRE(wks_model_create("mechanical", 1, keys, values, 1, &m) == WKS_OK);
  double c0 = 0.0;
  CHECK(wks_model_get_c0(m, &c0) == WKS_OK);
  CHECK(c0 == doctest::Approx(1.0));

  wks_discretization disc{32, 2.0, 33, 0.25};
  double c = 0.0;
  REQUIRE(wks_critical_value(m, &disc, &c) == WKS_OK);
  CHECK(c == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(wks_model_set_c0(m, c) == WKS_OK);

  wks_field* f = nullptr;
  wks_solve_info info{};
  REQUIRE(wks_solve_perturbed(m, 0.1, &disc, 1e-10, 1000000, &f, &info) == WKS_OK);
  CHECK(info.converged == 1);
  CHECK(info.residual <= 1e-10);
  CHECK(info.dt == 0.25);
  int d = 0, n = 0;
  CHECK(wks_field_shape(f, &d, &n) == WKS_OK);
  CHECK(d == 1);
  CHECK(n == 32);
  REQUIRE(wks_field_size(f) == 32);
  std::vector<double> buf(32);
  CHECK(wks_field_values(f, buf.data(), buf.size()) == WKS_OK);
  for (double v : buf) CHECK(std::isfinite(v));
  CHECK(wks_field_values(f, buf.data(), 3) == WKS_E_ARGUMENT);
  fs::path csv = fs::temp_directory_path() / "wks_capi_field.csv";
  CHECK(wks_field_write_csv(f, csv.string().c_str()) == WKS_OK);
  CHECK(fs::file_size(csv) > 0);
  fs::remove(csv);
  CHECK(wks_field_write_csv(f, "/nonexistent/dir/f.csv") == WKS_E_IO);
  wks_field_destroy(f);

  int certified = -1;
  double inf = 0.0;
  CHECK(wks_nonexistence_certificate(m, 1.0, 32, &certified, &inf) == WKS_OK);
  CHECK(certified == 0);
  wks_model_destroy(m);

  wks_model* at = nullptr;
  REQUIRE(wks_model_create("arctan_discount", 1, nullptr, nullptr, 0, &at) == WKS_OK);
  CHECK(wks_nonexistence_certificate(at, 2.0, 32, &certified, &inf) == WKS_OK);
  CHECK(certified == 1);
  CHECK(inf == doctest::Approx(M_PI / 2));
  wks_model_destroy(at);
}

TEST_CASE("errors map onto status codes") {
  wks_model* m = nullptr;
  CHECK(wks_model_create("nope", 1, nullptr, nullptr, 0, &m) == WKS_E_CONFIG);
  CHECK(m == nullptr);
  CHECK(std::string(wks_last_error()).find("nope") != std::string::npos);
  CHECK(wks_model_create("mechanical", 3, nullptr, nullptr, 0, &m) == WKS_E_CONFIG);
  CHECK(wks_model_create("mechanical", 1, nullptr, nullptr, 0, nullptr) == WKS_E_ARGUMENT);
  CHECK(wks_model_get_c0(nullptr, nullptr) == WKS_E_ARGUMENT);
  CHECK(wks_validate_config("/nonexistent.ini") != WKS_OK);
  wks_model_destroy(nullptr);
  wks_field_destroy(nullptr);
  wks_run_destroy(nullptr);
  wks_diff_destroy(nullptr);
}

TEST_CASE("runs and artifact diffs") {
  fs::path dir = fs::temp_directory_path() / "wks_capi_runs";
  fs::remove_all(dir);
  std::string good = WriteConfig(dir, "0.5");
  std::string bad = WriteConfig(dir, "1e-12");
  CHECK(wks_validate_config(good.c_str()) == WKS_OK);

  std::string root_a = (dir / "a").string(), root_b = (dir / "b").string();
  wks_run_options opts{root_a.c_str(), 0, 1};
  wks_run* run = nullptr;
  REQUIRE(wks_run_experiment(good.c_str(), &opts, &run) == WKS_OK);
  CHECK(wks_run_passed(run) == 1);
  CHECK(std::string(wks_run_failed_stage(run)).empty());
  CHECK(wks_run_seconds(run) >= 0.0);
  REQUIRE(wks_run_check_count(run) >= 1);
  const char* name = nullptr;
  const char* rel = nullptr;
  double value = 0.0, thr = 0.0;
  int pass = 0;
  CHECK(wks_run_check(run, 0, &name, &value, &rel, &thr, &pass) == WKS_OK);
  CHECK(std::string(name) == "final_error");
  CHECK(std::string(rel) == "<=");
  CHECK(thr == 0.5);
  CHECK(pass == 1);
  CHECK(wks_run_check(run, 99, &name, &value, &rel, &thr, &pass) == WKS_E_ARGUMENT);
  std::string dir_a = wks_run_directory(run);
  wks_run_destroy(run);

  opts.output_root = root_b.c_str();
  REQUIRE(wks_run_experiment(bad.c_str(), &opts, &run) == WKS_E_THRESHOLD);
  CHECK(wks_run_passed(run) == 0);
  std::string dir_b = wks_run_directory(run);
  wks_run_destroy(run);

  wks_diff* diff = nullptr;
  REQUIRE(wks_diff_artifacts(dir_a.c_str(), dir_b.c_str(), &diff) == WKS_OK);
  // Only the manifest differs, since it echoes the threshold.
  CHECK(wks_diff_identical(diff) == 0);
  REQUIRE(wks_diff_count(diff) == 1);
  CHECK(std::string(wks_diff_entry(diff, 0)) == "differs: manifest.json");
  CHECK(wks_diff_entry(diff, 1) == nullptr);
  wks_diff_destroy(diff);
  fs::remove_all(dir);
}
