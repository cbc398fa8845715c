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
// Config-driven experiment pipelines and their artifact export.
//
// Config grammar (INI): "[section]" headers, "key = value" lines, ';' or '#'
// comment lines. Lists are comma separated. Sections and keys:
//
//   [experiment] kind, name, output_root, seed, reference, reference_node,
//                start_node, horizon_factor, expect_certificate,
//                query_node, bump_node, bump, pairs, candidates
//   [model]      name, plus the model's own parameters
//   [grid]       d, n
//   [velocity]   vmax, points
//   [solver]     dt, tol, max_iter, lambdas
//   [barrier]    Tmax, window_start, drift_tol, cone_slope, aubry_tol
//   [critical]   methods, discount_lambdas
//   [acceptance] kind-specific thresholds (see README)

#ifndef WKS_EXPERIMENT_HPP_
#define WKS_EXPERIMENT_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wks/action_barrier.hpp"
#include "wks/curve_dynamics.hpp"
#include "wks/hj_solve.hpp"
#include "wks/mather_lp.hpp"
#include "wks/selection.hpp"

namespace wks {

inline constexpr const char* kVersion = "0.3.1";

std::vector<std::string> ExperimentKinds();

struct ExperimentConfig {
  std::string kind;
  std::string name;
  std::string output_root = "artifacts";
  std::uint64_t seed = 20240601;

  std::string model;
  ParamMap model_params;

  int d = 1;
  int n = 64;
  double vmax = 3.0;
  int vpoints = 49;

  double dt = 0.0;
  double tol = 1e-8;
  std::size_t max_iter = 200000;
  std::vector<double> lambdas;

  PeierlsOptions barrier;
  double aubry_tol = 1e-6;
  std::vector<std::string> critical_methods{"lp"};
  std::vector<double> discount_lambdas{0.1, 0.03, 0.01};

  // Remaining [experiment] keys, interpreted per kind.
  std::map<std::string, std::string> options;
  std::map<std::string, double> acceptance;

  std::string source;  // config text as read
};

// Parses and validates. Throws a configuration error naming the offending
// section and key.
ExperimentConfig ParseConfig(const std::string& text);
ExperimentConfig LoadConfig(const std::string& path);

// Checks the kind-specific [experiment] keys. ParseConfig calls it.
void ValidateExperimentOptions(const ExperimentConfig& config);

enum class Provenance { kFormula, kExtrapolation, kAnalytic };
const char* ProvenanceName(Provenance p);

struct ConvergenceRow {
  double lambda = 0.0;
  double error = 0.0;  // sup |u_lambda - reference|
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  Provenance provenance = Provenance::kFormula;
  // Errors nonincreasing within a factor 2.
  bool monotone = true;
  std::string ToCsv() const;
};

// Entries that failed to solve keep an infinite error.
ConvergenceReport MakeConvergenceReport(const std::vector<SweepEntry>& sweep,
                                        const GridField& reference, Provenance provenance);

// e[k+1] <= 2 e[k] for every consecutive pair.
bool FactorTwoMonotone(const std::vector<double>& values);

struct ExportBundle {
  std::vector<std::pair<std::string, GridField>> fields;
  std::vector<std::pair<std::string, DiscreteMeasure>> measures;
  std::vector<std::pair<std::string, ConvergenceReport>> reports;
  std::vector<std::pair<std::string, BarrierMatrix>> barriers;
  std::vector<std::pair<std::string, CurveTrace>> traces;
  std::vector<std::pair<std::string, SelectionResult>> selections;
  // Preformatted CSV text.
  std::vector<std::pair<std::string, std::string>> tables;
  nlohmann::json manifest = nlohmann::json::object();
};

// Writes every entry under a fixed file name and then manifest.json, which
// lists each file with its SHA-256. Returns the written names, sorted.
std::vector<std::string> ExportAll(const ExportBundle& bundle, const std::string& dir);

std::string Sha256File(const std::string& path);
std::string Sha256Hex(const std::string& bytes);

struct StageCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=", "==" or "in"
  bool pass = false;
};

struct RunOptions {
  std::string output_root;  // overrides config and environment when set
  bool strict = false;
  int threads = 0;
};

struct RunResult {
  std::string directory;
  bool passed = false;
  std::vector<StageCheck> checks;
  std::vector<std::string> warnings;
  std::string failed_stage;
  std::string error;
  ErrorKind error_kind = ErrorKind::kInternal;
  double wall_seconds = 0.0;
};

// Environment variable that overrides the configured output root.
inline constexpr const char* kOutputRootEnv = "WKS_OUTPUT_ROOT";

// Runs the pipeline for config.kind and exports its artifacts. Stage errors
// are captured in the result; partial artifacts stay on disk.
RunResult RunExperiment(const ExperimentConfig& config, const RunOptions& options = {});
RunResult RunExperimentFile(const std::string& path, const RunOptions& options = {});

struct DiffReport {
  bool identical = true;
  std::vector<std::string> differences;
};

// Compares two artifact directories file by file. timing.json is ignored.
DiffReport DiffArtifacts(const std::string& a, const std::string& b);

}  // namespace wks

#endif  // WKS_EXPERIMENT_HPP_
