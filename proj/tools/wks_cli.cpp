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
// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "wks/wks.h"

namespace {

int ExitCode(wks_status s) {
  switch (s) {
    case WKS_OK: return 0;
    case WKS_E_THRESHOLD: return 1;
    case WKS_E_CONFIG:
    case WKS_E_ARGUMENT: return 2;
    case WKS_E_IO: return 3;
    default: return 4;
  }
}

int Report(wks_status s) {
  if (s != WKS_OK) std::fprintf(stderr, "error (%s): %s\n", wks_status_name(s), wks_last_error());
  return ExitCode(s);
}

int Run(const std::string& config, const std::string& output, bool strict, int threads) {
  wks_run_options opts{output.empty() ? nullptr : output.c_str(), strict ? 1 : 0, threads};
  wks_run* run = nullptr;
  wks_status s = wks_run_experiment(config.c_str(), &opts, &run);
  if (!run) return Report(s);
  std::printf("artifacts: %s\n", wks_run_directory(run));
  for (size_t i = 0; i < wks_run_check_count(run); ++i) {
    const char* name = nullptr;
    const char* rel = nullptr;
    double value = 0.0, threshold = 0.0;
    int pass = 0;
    wks_run_check(run, i, &name, &value, &rel, &threshold, &pass);
    std::printf("%s %-24s %.6g %s %.6g\n", pass ? "PASS" : "FAIL", name, value, rel, threshold);
  }
  for (size_t i = 0; i < wks_run_warning_count(run); ++i) {
    std::printf("warning: %s\n", wks_run_warning(run, i));
  }
  if (*wks_run_failed_stage(run)) std::printf("failed stage: %s\n", wks_run_failed_stage(run));
  std::printf("%s (%.1f s)\n", wks_run_passed(run) ? "passed" : "failed", wks_run_seconds(run));
  wks_run_destroy(run);
  return Report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak KAM selection experiments"};
  app.set_version_flag("--version", std::string(wks_version()));
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads (0: hardware)")->check(CLI::NonNegativeNumber);

  std::string config, output;
  bool strict = false;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config, "Config file")->required();
  run->add_option("--output", output, "Output root (overrides WKS_OUTPUT_ROOT and the config)");
  run->add_flag("--strict", strict, "Treat warnings as failures");

  std::string vconfig;
  auto* validate = app.add_subcommand("validate", "Check a config file without computing");
  validate->add_option("config", vconfig, "Config file")->required();

  auto* list = app.add_subcommand("list-models", "Print the built-in model names");

  std::string dir_a, dir_b;
  auto* diff = app.add_subcommand("diff-artifacts", "Compare two artifact directories");
  diff->add_option("dir_a", dir_a)->required();
  diff->add_option("dir_b", dir_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (threads > 0 && wks_set_threads(threads) != WKS_OK) return Report(WKS_E_ARGUMENT);

  if (*run) return Run(config, output, strict, threads);
  if (*validate) {
    wks_status s = wks_validate_config(vconfig.c_str());
    if (s == WKS_OK) std::printf("%s: ok\n", vconfig.c_str());
    return Report(s);
  }
  if (*list) {
    for (size_t i = 0; i < wks_model_count(); ++i) std::printf("%s\n", wks_model_name(i));
    return 0;
  }
  if (*diff) {
    wks_diff* d = nullptr;
    wks_status s = wks_diff_artifacts(dir_a.c_str(), dir_b.c_str(), &d);
    if (s != WKS_OK) return Report(s);
    for (size_t i = 0; i < wks_diff_count(d); ++i) std::printf("%s\n", wks_diff_entry(d, i));
    int same = wks_diff_identical(d);
    std::printf("%s\n", same ? "identical" : "different");
    wks_diff_destroy(d);
    return same ? 0 : 1;
  }
  return 0;
}
