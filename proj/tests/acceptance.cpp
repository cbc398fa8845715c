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
// Acceptance runner. Each criterion loads its experiment configs, replaces
// their [acceptance] section with the thresholds pinned below and prints one
// PASS/FAIL line. Details of every check go on indented lines above it.

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wks/error.hpp"
#include "wks/experiment.hpp"
#include "wks/parallel.hpp"

namespace {

struct Run {
  std::string config;
  std::map<std::string, double> thresholds;
};

struct Criterion {
  int id;
  std::string title;
  std::vector<Run> runs;
  std::optional<double> seconds;
};

const std::vector<Criterion>& Criteria() {
  static const std::vector<Criterion> kCriteria = {
      {1,
       "golden drift limit equals 0.3",
       {{"example_6_1.ini", {{"final_error", 0.05}, {"require_monotone", 1}, {"require_converged", 1}}}},
       120.0},
      {2,
       "critical value agreement",
       {{"barrier_mechanical.ini", {{"critical_spread", 0.05}, {"critical_error", 0.05}}},
        {"barrier_shifted.ini", {{"critical_error", 0.02}}}},
       180.0},
      {3,
       "vanishing discount selects the barrier column",
       {{"vanishing_discount.ini", {{"final_error", 0.05}, {"require_converged", 1}}},
        {"vanishing_discount_potential.ini", {{"final_error", 0.05}, {"require_converged", 1}}}},
       std::nullopt},
      {4,
       "selection operator properties",
       {{"operator_suite.ini",
         {{"lipschitz_slack", 1e-7},
          {"image_residual_C", 1e-9},
          {"fixed_point_factor", 3},
          {"idempotence_factor", 2}}}},
       300.0},
      {5,
       "nonexistence certificate",
       {{"nonexistence_3_4.ini", {{"residual", 1e-8}, {"require_match", 1}}}},
       std::nullopt},
      {6,
       "occupation measure identities",
       {{"occupation_suite.ini",
         {{"mass_identity", 0.05},
          {"refine_ratio_min", 1.5},
          {"refine_ratio_max", 2.5},
          {"closedness_factor", 2},
          {"require_tv_monotone", 1}}}},
       std::nullopt},
      {7,
       "LP optimizer structure",
       {{"barrier_mechanical.ini", {{"lp_mass", 1e-9}, {"lp_closedness", 1e-9}, {"graph_check", 1}}},
        {"barrier_shifted.ini",
         {{"lp_mass", 1e-9}, {"lp_closedness", 1e-9}, {"graph_check", 1}, {"uniform_tv", 0.1}}}},
       std::nullopt},
      {8,
       "measure comparison implication",
       {{"operator_suite.ini", {{"comparison_failures", 0}}}},
       std::nullopt},
      {9,
       "equilibrium multiplicity",
       {{"barrier_double_well.ini", {{"multiplicity_symmetric", 1}, {"bump_mass", 0.9}}}},
       std::nullopt},
  };
  return kCriteria;
}

bool RunCriterion(const Criterion& c, const std::string& config_dir, const std::string& output) {
  bool ok = true;
  double seconds = 0.0;
  for (const Run& r : c.runs) {
    std::string path = (std::filesystem::path(config_dir) / r.config).string();
    wks::ExperimentConfig cfg;
    try {
      cfg = wks::LoadConfig(path);
    } catch (const wks::Error& e) {
      std::printf("  %s: cannot load: %s\n", r.config.c_str(), e.what());
      ok = false;
      continue;
    }
    cfg.acceptance = r.thresholds;
    wks::RunOptions opts;
    opts.output_root = (std::filesystem::path(output) / ("criterion_" + std::to_string(c.id))).string();
    opts.threads = 1;
    wks::RunResult res = wks::RunExperiment(cfg, opts);
    seconds += res.wall_seconds;
    for (const wks::StageCheck& s : res.checks) {
      std::printf("  %s %-24s %.6g %s %.6g  %s\n", s.pass ? "ok  " : "miss", s.name.c_str(), s.value,
                  s.relation.c_str(), s.threshold, r.config.c_str());
    }
    if (!res.error.empty()) {
      std::printf("  stage %s failed: %s\n", res.failed_stage.c_str(), res.error.c_str());
    }
    // Every pinned threshold must have produced a check.
    if (res.checks.size() != r.thresholds.size() && res.error.empty()) {
      std::printf("  %s: %zu checks for %zu thresholds\n", r.config.c_str(), res.checks.size(),
                  r.thresholds.size());
      ok = false;
    }
    ok = ok && res.passed;
  }
  std::string timing = "";
  if (c.seconds) {
    bool fast = seconds <= *c.seconds;
    ok = ok && fast;
    timing = ", limit " + wks::FormatDouble(*c.seconds) + " s" + (fast ? "" : " exceeded");
  }
  std::printf("criterion %d %s: %s (%.1f s%s)\n", c.id, c.title.c_str(), ok ? "PASS" : "FAIL", seconds,
              timing.c_str());
  std::fflush(stdout);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  std::string config_dir = WKS_CONFIG_DIR;
  std::string output = "acceptance_artifacts";
  app.add_option("--criterion", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--config-dir", config_dir, "Directory holding the experiment configs");
  app.add_option("--output", output, "Artifact root");
  CLI11_PARSE(app, argc, argv);

  wks::SetMaxThreads(1);
  bool all = true;
  for (const Criterion& c : Criteria()) {
    if (only != 0 && c.id != only) continue;
    all = RunCriterion(c, config_dir, output) && all;
  }
  return all ? 0 : 1;
}
