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
#include <limits>
#include <sstream>
#include <string>

#include "doctest.h"
#include "wks/error.hpp"
#include "wks/experiment.hpp"

using namespace wks;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(# small vanishing-discount run
[experiment]
kind = vanishing_discount
name = small
reference = column
reference_node = 0

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
lambdas = 0.1, 0.03, 0.01

[acceptance]
final_error = 0.2
require_converged = 1
)";

ErrorKind ParseKind(const std::string& text) {
  try {
    ParseConfig(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInternal;
}

std::string Replace(std::string text, const std::string& from, const std::string& to) {
  auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

fs::path Scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("wks_experiment_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  ExperimentConfig c = ParseConfig(kSmall);
  CHECK(c.kind == "vanishing_discount");
  CHECK(c.name == "small");
  CHECK(c.n == 32);
  CHECK(c.vpoints == 17);
  CHECK(c.lambdas == std::vector<double>{0.1, 0.03, 0.01});
  CHECK(c.model_params.at("U.cos") == "1");
  CHECK(c.acceptance.at("final_error") == 0.2);
  CHECK(c.output_root == "artifacts");

  CHECK(ParseKind(Replace(kSmall, "n = 32", "n = 32\nwidth = 3")) == ErrorKind::kConfiguration);
  CHECK(ParseKind(Replace(kSmall, "[grid]", "[mesh]")) == ErrorKind::kConfiguration);
  CHECK(ParseKind(Replace(kSmall, "0.1, 0.03, 0.01", "0.01, 0.03")) == ErrorKind::kConfiguration);
  CHECK(ParseKind(Replace(kSmall, "kind = vanishing_discount", "kind = bogus")) == ErrorKind::kConfiguration);
  CHECK(ParseKind(Replace(kSmall, "name = mechanical", "name = pendulum")) == ErrorKind::kConfiguration);
  CHECK(ParseKind(Replace(kSmall, "final_error = 0.2", "mass_identity = 0.2")) == ErrorKind::kConfiguration);
  CHECK(ParseKind(Replace(kSmall, "n = 32", "n = two")) == ErrorKind::kConfiguration);
  CHECK_THROWS_AS(LoadConfig("/nonexistent/wks.ini"), Error);
}

TEST_CASE("factor-two monotonicity") {
  CHECK(FactorTwoMonotone({}));
  CHECK(FactorTwoMonotone({1.0}));
  CHECK(FactorTwoMonotone({1.0, 1.9, 0.5}));
  CHECK_FALSE(FactorTwoMonotone({1.0, 2.5}));
  CHECK_FALSE(FactorTwoMonotone({1.0, std::numeric_limits<double>::infinity()}));
}

TEST_CASE("convergence report") {
  PeriodicGrid g(1, 8);
  std::vector<SweepEntry> sweep(2);
  sweep[0].lambda = 0.1;
  sweep[0].result = SolveResult{GridField(g, 0.5), {}};
  sweep[0].result->report.converged = true;
  sweep[1].lambda = 0.01;
  sweep[1].error = "diverged";
  ConvergenceReport r = MakeConvergenceReport(sweep, GridField(g, 0.25), Provenance::kAnalytic);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].error == 0.25);
  CHECK(std::isinf(r.rows[1].error));
  CHECK_FALSE(r.rows[1].converged);
  CHECK_FALSE(r.monotone);
  CHECK(std::string(ProvenanceName(r.provenance)) == "analytic");
  CHECK(r.ToCsv().rfind("# reference=analytic\nlambda,iterations,residual,error,converged\n", 0) == 0);
}

TEST_CASE("export writes a manifest with hashes") {
  CHECK(Sha256Hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(Sha256Hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  fs::path empty = Scratch("empty");
  CHECK(ExportAll({}, empty.string()) == std::vector<std::string>{"manifest.json"});

  PeriodicGrid g(1, 8);
  ExportBundle b;
  b.fields.emplace_back("u", GridField(g, 1.0));
  DiscreteMeasure mu(g, MakeVelocitySet(1, 1.0, 5));
  mu.at(0, 2) = 1.0;
  b.measures.emplace_back("mu", mu);
  b.reports.emplace_back("conv", ConvergenceReport{});
  b.manifest["tool"] = "test";
  fs::path dir = Scratch("bundle");
  auto names = ExportAll(b, dir.string());
  CHECK(names == std::vector<std::string>{"conv.csv", "manifest.json", "mu.csv", "mu_projected.csv", "u.csv"});
  auto manifest = nlohmann::json::parse(Slurp(dir / "manifest.json"));
  CHECK(manifest["tool"] == "test");
  CHECK(manifest["files"]["u.csv"] == Sha256File((dir / "u.csv").string()));
  CHECK(manifest["files"].size() == 4);

  fs::path again = Scratch("bundle2");
  ExportAll(b, again.string());
  CHECK(DiffArtifacts(dir.string(), again.string()).identical);

  b.fields[0].second[3] = 2.0;
  ExportAll(b, again.string());
  DiffReport diff = DiffArtifacts(dir.string(), again.string());
  CHECK_FALSE(diff.identical);
  CHECK(std::find(diff.differences.begin(), diff.differences.end(), "differs: u.csv") != diff.differences.end());

  std::ofstream(again / "timing.json") << "{}";
  std::ofstream(again / "extra.csv") << "x";
  diff = DiffArtifacts(dir.string(), again.string());
  CHECK(diff.differences.size() == 3);
  CHECK_THROWS_AS(Sha256File((dir / "missing").string()), Error);

  b.tables.emplace_back("u", "dup");
  CHECK_THROWS_AS(ExportAll(b, Scratch("dup").string()), Error);
  for (const char* n : {"empty", "bundle", "bundle2", "dup"}) fs::remove_all(Scratch(n));
}

TEST_CASE("small end-to-end run is deterministic") {
  fs::path root = Scratch("runs");
  ExperimentConfig c = ParseConfig(kSmall);
  RunOptions o;
  o.output_root = (root / "a").string();
  RunResult a = RunExperiment(c, o);
  CHECK(a.error == "");
  CHECK(a.passed);
  CHECK(a.failed_stage == "");
  CHECK(a.directory == (root / "a" / "small").string());
  CHECK(fs::exists(root / "a" / "small" / "manifest.json"));
  CHECK(fs::exists(root / "a" / "small" / "timing.json"));
  bool found = false;
  for (const StageCheck& s : a.checks) {
    if (s.name == "final_error") {
      found = true;
      CHECK(s.pass);
      CHECK(s.value <= 0.2);
    }
  }
  CHECK(found);

  o.output_root = (root / "b").string();
  RunResult b = RunExperiment(c, o);
  CHECK(DiffArtifacts(a.directory, b.directory).identical);

  // Thresholds fail honestly without raising.
  c.acceptance["final_error"] = 1e-12;
  o.output_root = (root / "c").string();
  RunResult strictfail = RunExperiment(c, o);
  CHECK_FALSE(strictfail.passed);
  CHECK(strictfail.error == "");

  // The environment override sits below the explicit option.
  setenv(kOutputRootEnv, (root / "env").string().c_str(), 1);
  RunResult env = RunExperiment(ParseConfig(kSmall), {});
  unsetenv(kOutputRootEnv);
  CHECK(env.directory == (root / "env" / "small").string());
  fs::remove_all(root);
}

TEST_CASE("strict runs turn warnings into failures") {
  fs::path root = Scratch("stage_error");
  ExperimentConfig c = ParseConfig(Replace(kSmall, "max_iter = 500000", "max_iter = 3"));
  c.acceptance.erase("require_converged");
  RunOptions o;
  o.output_root = root.string();
  RunResult lenient = RunExperiment(c, o);
  CHECK_FALSE(lenient.warnings.empty());
  o.strict = true;
  RunResult r = RunExperiment(c, o);
  CHECK_FALSE(r.passed);
  CHECK(r.error == "");
  fs::remove_all(root);
}
