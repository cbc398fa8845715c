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
#include <openssl/evp.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include "wks/error.hpp"
#include "wks/experiment.hpp"

namespace wks {
namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::set<std::string>>& SectionKeys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment",
       {"kind", "name", "output_root", "seed", "reference", "reference_node", "start_node",
        "horizon_factor", "refine_lambda", "expect_certificate", "query_node", "bump_node",
        "bump", "pairs", "candidates"}},
      {"grid", {"d", "n"}},
      {"velocity", {"vmax", "points"}},
      {"solver", {"dt", "tol", "max_iter", "lambdas"}},
      {"barrier", {"Tmax", "window_start", "drift_tol", "cone_slope", "aubry_tol"}},
      {"critical", {"methods", "discount_lambdas"}},
  };
  return keys;
}

const std::map<std::string, std::set<std::string>>& AcceptanceKeys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"vanishing_discount", {"final_error", "require_monotone", "require_converged"}},
      {"example_6_1",
       {"final_error", "require_monotone", "require_converged", "critical_error", "uniform_tv",
        "graph_check"}},
      {"nonexistence_3_4", {"residual", "require_match"}},
      {"operator_suite",
       {"lipschitz_slack", "image_residual_C", "fixed_point_factor", "idempotence_factor",
        "comparison_failures", "subsolution_violations"}},
      {"occupation_suite",
       {"mass_identity", "refine_ratio_min", "refine_ratio_max", "closedness_factor",
        "require_tv_monotone"}},
      {"barrier_suite",
       {"critical_spread", "critical_error", "lp_mass", "lp_closedness", "graph_check",
        "uniform_tv", "settle_gap", "triangle", "multiplicity_symmetric", "bump_mass"}},
  };
  return keys;
}

std::string Trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string HexDigest(const unsigned char* md, unsigned len) {
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(md[i]);
  return os.str();
}

struct DigestContext {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), EVP_MD_CTX_free};
  DigestContext() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
      Fail(ErrorKind::kInternal, "SHA-256 initialisation failed");
    }
  }
  void update(const void* data, std::size_t len) {
    if (EVP_DigestUpdate(ctx.get(), data, len) != 1) Fail(ErrorKind::kInternal, "SHA-256 update failed");
  }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) Fail(ErrorKind::kInternal, "SHA-256 final failed");
    return HexDigest(md, len);
  }
};

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  out << text;
  if (!out) Fail(ErrorKind::kIo, "write failed: " + path);
}

}  // namespace

std::vector<std::string> ExperimentKinds() {
  std::vector<std::string> out;
  for (const auto& [kind, keys] : AcceptanceKeys()) out.push_back(kind);
  return out;
}

ExperimentConfig ParseConfig(const std::string& text) {
  // boost's INI reader only knows ';' comments.
  std::ostringstream cleaned;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      std::string t = Trim(line);
      if (!t.empty() && t[0] == '#') continue;
      cleaned << line << '\n';
    }
  }
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(cleaned.str());
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    Fail(ErrorKind::kConfiguration, std::string("config syntax: ") + e.what());
  }

  ParamMap flat;
  ExperimentConfig cfg;
  cfg.source = text;
  std::map<std::string, std::string> acceptance_raw;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      Fail(ErrorKind::kConfiguration, "key '" + section + "' outside any section");
    }
    for (const auto& [key, value] : body) {
      std::string v = Trim(value.data());
      if (section == "model") {
        if (key == "name") {
          cfg.model = v;
        } else {
          cfg.model_params[key] = v;
        }
      } else if (section == "acceptance") {
        acceptance_raw[key] = v;
      } else {
        auto it = SectionKeys().find(section);
        if (it == SectionKeys().end()) Fail(ErrorKind::kConfiguration, "unknown section [" + section + "]");
        if (!it->second.count(key)) {
          Fail(ErrorKind::kConfiguration, "unknown key '" + key + "' in [" + section + "]");
        }
        flat[section + "." + key] = v;
      }
    }
  }

  auto get = [&](const std::string& k) -> const std::string* {
    auto it = flat.find(k);
    return it == flat.end() ? nullptr : &it->second;
  };
  if (!get("experiment.kind")) Fail(ErrorKind::kConfiguration, "[experiment] kind is required");
  cfg.kind = *get("experiment.kind");
  if (!AcceptanceKeys().count(cfg.kind)) {
    Fail(ErrorKind::kConfiguration, "unknown experiment kind '" + cfg.kind + "'");
  }
  cfg.name = get("experiment.name") ? *get("experiment.name") : cfg.kind;
  if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos || cfg.name == "." ||
      cfg.name == "..") {
    Fail(ErrorKind::kConfiguration, "[experiment] name must be a plain directory name");
  }
  if (get("experiment.output_root")) cfg.output_root = *get("experiment.output_root");
  if (get("experiment.seed")) {
    double s = ParamDouble(flat, "experiment.seed", 0.0);
    if (s < 0 || s != std::floor(s) || s > 9.0e15) {
      Fail(ErrorKind::kConfiguration, "[experiment] seed must be a nonnegative integer");
    }
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  for (const auto& [k, v] : flat) {
    if (k.rfind("experiment.", 0) == 0) {
      std::string key = k.substr(11);
      if (key != "kind" && key != "name" && key != "output_root" && key != "seed") cfg.options[key] = v;
    }
  }

  if (cfg.model.empty()) Fail(ErrorKind::kConfiguration, "[model] name is required");
  cfg.d = ParamInt(flat, "grid.d", cfg.d);
  cfg.n = ParamInt(flat, "grid.n", cfg.n);
  cfg.vmax = ParamDouble(flat, "velocity.vmax", cfg.vmax);
  cfg.vpoints = ParamInt(flat, "velocity.points", cfg.vpoints);
  cfg.dt = ParamDouble(flat, "solver.dt", cfg.dt);
  cfg.tol = ParamDouble(flat, "solver.tol", cfg.tol);
  int max_iter = ParamInt(flat, "solver.max_iter", static_cast<int>(cfg.max_iter));
  if (max_iter <= 0) Fail(ErrorKind::kConfiguration, "[solver] max_iter must be positive");
  cfg.max_iter = static_cast<std::size_t>(max_iter);
  cfg.lambdas = ParamList(flat, "solver.lambdas", {});
  cfg.barrier.Tmax = ParamDouble(flat, "barrier.Tmax", cfg.barrier.Tmax);
  cfg.barrier.window_start = ParamDouble(flat, "barrier.window_start", cfg.barrier.window_start);
  cfg.barrier.drift_tol = ParamDouble(flat, "barrier.drift_tol", cfg.barrier.drift_tol);
  cfg.barrier.cone_slope = ParamDouble(flat, "barrier.cone_slope", cfg.barrier.cone_slope);
  cfg.aubry_tol = ParamDouble(flat, "barrier.aubry_tol", cfg.aubry_tol);
  if (!(cfg.aubry_tol >= 0.0)) Fail(ErrorKind::kConfiguration, "[barrier] aubry_tol must be nonnegative");
  if (get("critical.methods")) cfg.critical_methods = SplitList(*get("critical.methods"));
  cfg.discount_lambdas = ParamList(flat, "critical.discount_lambdas", cfg.discount_lambdas);

  const std::set<std::string>& allowed = AcceptanceKeys().at(cfg.kind);
  for (const auto& [k, v] : acceptance_raw) {
    if (!allowed.count(k)) {
      Fail(ErrorKind::kConfiguration,
           "acceptance key '" + k + "' does not apply to kind '" + cfg.kind + "'");
    }
    cfg.acceptance[k] = ParamDouble(acceptance_raw, k, 0.0);
  }

  // Value checks that do not need any compute.
  if (cfg.d != 1 && cfg.d != 2) Fail(ErrorKind::kConfiguration, "[grid] d must be 1 or 2");
  if (cfg.n < 4) Fail(ErrorKind::kConfiguration, "[grid] n must be at least 4");
  if (!(cfg.vmax > 0.0)) Fail(ErrorKind::kConfiguration, "[velocity] vmax must be positive");
  if (cfg.vpoints < 3 || cfg.vpoints % 2 == 0) {
    Fail(ErrorKind::kConfiguration, "[velocity] points must be odd and at least 3");
  }
  if (cfg.dt < 0.0) Fail(ErrorKind::kConfiguration, "[solver] dt must be nonnegative");
  if (!(cfg.tol > 0.0)) Fail(ErrorKind::kConfiguration, "[solver] tol must be positive");
  for (std::size_t k = 0; k < cfg.lambdas.size(); ++k) {
    if (!(cfg.lambdas[k] > 0.0)) Fail(ErrorKind::kConfiguration, "[solver] lambdas must be positive");
    if (k > 0 && !(cfg.lambdas[k] < cfg.lambdas[k - 1])) {
      Fail(ErrorKind::kConfiguration, "[solver] lambdas must be strictly descending");
    }
  }
  bool needs_schedule = cfg.kind != "operator_suite" && cfg.kind != "barrier_suite";
  if (needs_schedule && cfg.lambdas.empty()) {
    Fail(ErrorKind::kConfiguration, "[solver] lambdas is required for kind '" + cfg.kind + "'");
  }
  if (!(cfg.barrier.Tmax > 0.0)) Fail(ErrorKind::kConfiguration, "[barrier] Tmax must be positive");
  if (cfg.critical_methods.empty()) Fail(ErrorKind::kConfiguration, "[critical] methods is empty");
  for (const std::string& m : cfg.critical_methods) {
    if (m != "lp" && m != "discount" && m != "longtime") {
      Fail(ErrorKind::kConfiguration, "[critical] unknown method '" + m + "'");
    }
  }
  if (cfg.critical_methods.front() != "lp") {
    Fail(ErrorKind::kConfiguration, "[critical] methods must start with lp");
  }
  ValidateExperimentOptions(cfg);
  // Builds the model once so unknown or invalid model parameters surface here.
  BuiltinModel(cfg.model, cfg.model_params, cfg.d);
  MakeVelocitySet(cfg.d, cfg.vmax, cfg.vpoints);
  return cfg;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return ParseConfig(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

const char* ProvenanceName(Provenance p) {
  switch (p) {
    case Provenance::kFormula: return "formula";
    case Provenance::kExtrapolation: return "extrapolation";
    case Provenance::kAnalytic: return "analytic";
  }
  return "unknown";
}

bool FactorTwoMonotone(const std::vector<double>& values) {
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (!(values[k] <= 2.0 * values[k - 1])) return false;
  }
  return true;
}

ConvergenceReport MakeConvergenceReport(const std::vector<SweepEntry>& sweep,
                                        const GridField& reference, Provenance provenance) {
  if (sweep.empty()) Fail(ErrorKind::kConfiguration, "empty sweep");
  ConvergenceReport rep;
  rep.provenance = provenance;
  std::vector<double> errors;
  for (const SweepEntry& e : sweep) {
    ConvergenceRow row;
    row.lambda = e.lambda;
    if (e.result) {
      row.error = SupDistance(e.result->u, reference);
      row.iterations = e.result->report.iterations;
      row.residual = e.result->report.final_residual;
      row.converged = e.result->report.converged;
    } else {
      row.error = std::numeric_limits<double>::infinity();
      row.residual = std::numeric_limits<double>::infinity();
    }
    errors.push_back(row.error);
    rep.rows.push_back(row);
  }
  rep.monotone = FactorTwoMonotone(errors);
  return rep;
}

std::string ConvergenceReport::ToCsv() const {
  std::ostringstream os;
  os << "# reference=" << ProvenanceName(provenance) << '\n';
  os << "lambda,iterations,residual,error,converged\n";
  for (const ConvergenceRow& r : rows) {
    os << FormatDouble(r.lambda) << ',' << r.iterations << ',' << FormatDouble(r.residual) << ','
       << FormatDouble(r.error) << ',' << (r.converged ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string Sha256Hex(const std::string& bytes) {
  DigestContext ctx;
  ctx.update(bytes.data(), bytes.size());
  return ctx.finish();
}

std::string Sha256File(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot read " + path);
  DigestContext ctx;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) ctx.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return ctx.finish();
}

std::vector<std::string> ExportAll(const ExportBundle& bundle, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + dir + ": " + ec.message());
  std::vector<std::string> names;
  std::set<std::string> seen;
  auto path_for = [&](const std::string& name) {
    if (!seen.insert(name).second) Fail(ErrorKind::kInternal, "duplicate artifact name " + name);
    names.push_back(name);
    return (fs::path(dir) / name).string();
  };
  auto guarded = [&](const std::string& name, auto&& write) {
    std::string path = path_for(name);
    try {
      write(path);
    } catch (const Error& e) {
      throw Error(ErrorKind::kIo, path + ": " + e.what());
    }
  };

  for (const auto& [name, f] : bundle.fields) {
    guarded(name + ".csv", [&](const std::string& p) { WriteFieldCsv(f, p); });
  }
  for (const auto& [name, mu] : bundle.measures) {
    guarded(name + ".csv", [&](const std::string& p) { WriteMeasureCsv(mu, p); });
    guarded(name + "_projected.csv", [&](const std::string& p) { WriteProjectedCsv(mu, p); });
  }
  for (const auto& [name, rep] : bundle.reports) {
    guarded(name + ".csv", [&](const std::string& p) { WriteText(p, rep.ToCsv()); });
  }
  for (const auto& [name, h] : bundle.barriers) {
    guarded(name + ".pbar", [&](const std::string& p) { WriteBarrierBinary(h, p); });
    if (h.size() <= 64) {
      guarded(name + ".csv", [&](const std::string& p) { WriteBarrierCsv(h, p); });
    }
  }
  for (const auto& [name, tr] : bundle.traces) {
    guarded(name + ".csv", [&](const std::string& p) { WriteTraceCsv(tr, p); });
  }
  for (const auto& [name, sel] : bundle.selections) {
    guarded(name + ".csv", [&](const std::string& p) { WriteSelectionCsv(sel, p); });
  }
  for (const auto& [name, text] : bundle.tables) {
    guarded(name + ".csv", [&](const std::string& p) { WriteText(p, text); });
  }

  nlohmann::json manifest = bundle.manifest;
  nlohmann::json files = nlohmann::json::object();
  for (const std::string& name : names) files[name] = Sha256File((fs::path(dir) / name).string());
  manifest["files"] = files;
  guarded("manifest.json", [&](const std::string& p) { WriteText(p, manifest.dump(2) + "\n"); });
  std::sort(names.begin(), names.end());
  return names;
}

DiffReport DiffArtifacts(const std::string& a, const std::string& b) {
  auto listing = [](const std::string& dir) {
    if (!fs::is_directory(dir)) Fail(ErrorKind::kIo, dir + " is not a directory");
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::string rel = fs::relative(entry.path(), dir).generic_string();
      if (rel == "timing.json") continue;
      out[rel] = Sha256File(entry.path().string());
    }
    return out;
  };
  auto la = listing(a);
  auto lb = listing(b);
  DiffReport rep;
  for (const auto& [name, hash] : la) {
    auto it = lb.find(name);
    if (it == lb.end()) {
      rep.differences.push_back("only in " + a + ": " + name);
    } else if (it->second != hash) {
      rep.differences.push_back("differs: " + name);
    }
  }
  for (const auto& [name, hash] : lb) {
    if (!la.count(name)) rep.differences.push_back("only in " + b + ": " + name);
  }
  rep.identical = rep.differences.empty();
  return rep;
}

}  // namespace wks
