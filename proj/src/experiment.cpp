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
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "wks/error.hpp"
#include "wks/experiment.hpp"
#include "wks/parallel.hpp"

namespace wks {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kTriangleSamples = 4000;
constexpr double kGraphTol = 1e-6;
constexpr double kComparisonTol = 1e-7;
constexpr double kSubsolutionTol = 1e-6;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Setup {
  ControlModel model;
  PeriodicGrid grid;
  VelocitySet vset;
  double dt;
};

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& cfg) : cfg_(cfg) {}

  const ExperimentConfig& cfg() const { return cfg_; }
  ExportBundle bundle;
  json results = json::object();
  json parameters = json::object();
  json stages = json::array();
  json timing = json::object();
  std::vector<StageCheck> checks;
  std::vector<std::string> warnings;
  std::string current;

  void Stage(const std::string& name, const std::function<void()>& body) {
    current = name;
    auto t0 = Clock::now();
    body();
    timing[name] = Seconds(t0);
    stages.push_back({{"name", name}, {"status", "ok"}});
  }

  bool Has(const std::string& key) const { return cfg_.acceptance.count(key) > 0; }
  double Threshold(const std::string& key) const { return cfg_.acceptance.at(key); }

  // Adds a check when the config names a threshold for it.
  void CheckLe(const std::string& key, double value) {
    if (!Has(key)) return;
    double t = Threshold(key);
    checks.push_back({key, value, t, "<=", value <= t});
  }
  void CheckGe(const std::string& key, double value) {
    if (!Has(key)) return;
    double t = Threshold(key);
    checks.push_back({key, value, t, ">=", value >= t});
  }
  void CheckFlag(const std::string& key, bool value) {
    if (!Has(key)) return;
    double t = Threshold(key);
    bool want = t != 0.0;
    checks.push_back({key, value ? 1.0 : 0.0, t, "==", value == want});
  }
  void CheckRange(const std::string& lo_key, const std::string& hi_key, double value) {
    CheckGe(lo_key, value);
    CheckLe(hi_key, value);
  }

  std::string Option(const std::string& key, const std::string& fallback) const {
    auto it = cfg_.options.find(key);
    return it == cfg_.options.end() ? fallback : it->second;
  }
  double OptionDouble(const std::string& key, double fallback) const {
    return ParamDouble(cfg_.options, key, fallback);
  }
  std::size_t OptionNode(const std::string& key, std::size_t fallback, const PeriodicGrid& g) const {
    int v = ParamInt(cfg_.options, key, static_cast<int>(fallback));
    if (v < 0 || static_cast<std::size_t>(v) >= g.node_count()) {
      Fail(ErrorKind::kConfiguration, "[experiment] " + key + " is not a grid node");
    }
    return static_cast<std::size_t>(v);
  }

  Setup MakeSetup() const {
    Setup s{BuiltinModel(cfg_.model, cfg_.model_params, cfg_.d), PeriodicGrid(cfg_.d, cfg_.n),
            MakeVelocitySet(cfg_.d, cfg_.vmax, cfg_.vpoints), 0.0};
    s.dt = cfg_.dt > 0.0 ? cfg_.dt : DefaultDt(s.grid, s.vset);
    return s;
  }

  // Mather LP at u = 0; also sets the model's c0 to the discrete critical value.
  MatherPolytope Critical(Setup& s) {
    MatherPolytope poly = [&] {
      Scheme scheme(s.model, s.grid, s.vset, s.dt);
      return BuildMatherPolytope(scheme);
    }();
    json crit = {{"lp", poly.c}};
    if (cfg_.critical_methods.size() > 1) {
      CriticalOptions co;
      co.methods.assign(cfg_.critical_methods.begin() + 1, cfg_.critical_methods.end());
      co.discount_lambdas = cfg_.discount_lambdas;
      co.Tmax = cfg_.barrier.Tmax;
      Scheme scheme(s.model, s.grid, s.vset, s.dt);
      CriticalData data = CriticalValue(scheme, co);
      for (const auto& [m, v] : data.values) crit[m] = v;
    }
    if (s.model.analytic_c) crit["analytic"] = *s.model.analytic_c;
    results["critical"] = crit;
    results["lp_multiple_optima"] = poly.lp_multiple_optima;
    results["face_columns"] = poly.face.size();
    s.model.c0 = poly.c;
    return poly;
  }

  BarrierMatrix Barrier(const Scheme& critical, double c) {
    BarrierMatrix h = PeierlsBarrier(critical, c, cfg_.barrier);
    for (const std::string& w : h.warnings) warnings.push_back("barrier: " + w);
    results["barrier"] = {{"settle_gap", h.settle_gap}, {"t", h.t}};
    return h;
  }

  SolveOptions Solver() const {
    SolveOptions o;
    o.tol = cfg_.tol;
    o.max_iter = cfg_.max_iter;
    return o;
  }

 private:
  const ExperimentConfig& cfg_;
};

GridField Potential0(const Setup& s) {
  return SampleField(s.grid, [&](const TorusPoint& x) { return s.model.V0(x); });
}

GridField SigmaField(const Setup& s) {
  return SampleField(s.grid, [&](const TorusPoint& x) { return s.model.sigma(x); });
}

double LpClosedness(const MatherPolytope& poly, const DiscreteMeasure& mu) {
  return ClosednessDefect(mu, poly.closedness);
}

std::vector<double> Uniform(const PeriodicGrid& g) {
  return std::vector<double>(g.node_count(), 1.0 / static_cast<double>(g.node_count()));
}


std::string LambdaTag(std::size_t k) { return "u_lambda_" + std::to_string(k); }

void LpSummary(Pipeline& p, const Setup& s, const MatherPolytope& poly) {
  MeasureResult lp = SolveMatherLp(poly);
  GraphReport graph = GraphCheck(lp.measure, kGraphTol);
  double tv = TotalVariation(ProjectedMeasure(lp.measure), Uniform(s.grid));
  p.results["lp"] = {{"value", lp.value},
                     {"mass", lp.measure.mass()},
                     {"closedness", LpClosedness(poly, lp.measure)},
                     {"graph_check", graph.pass},
                     {"graph_spread", graph.max_spread},
                     {"tv_to_uniform", tv}};
  p.bundle.measures.push_back({"mather", lp.measure});
}

void SweepPipeline(Pipeline& p) {
  const ExperimentConfig& cfg = p.cfg();
  Setup s = p.MakeSetup();
  std::optional<MatherPolytope> poly;
  p.Stage("critical_value", [&] { poly = p.Critical(s); });
  std::optional<Scheme> critical;
  std::optional<BarrierMatrix> h;
  p.Stage("peierls_barrier", [&] {
    critical.emplace(s.model, s.grid, s.vset, s.dt);
    h = p.Barrier(*critical, poly->c);
    p.bundle.barriers.push_back({"barrier", *h});
  });
  p.Stage("polytope", [&] {
    LpSummary(p, s, *poly);
    if (s.model.analytic_c) p.CheckLe("critical_error", std::fabs(poly->c - *s.model.analytic_c));
    p.CheckLe("uniform_tv", p.results["lp"]["tv_to_uniform"].get<double>());
    p.CheckFlag("graph_check", p.results["lp"]["graph_check"].get<bool>());
  });
  GridField V0 = Potential0(s);
  std::optional<GridField> formula;
  p.Stage("limit_solution_formula", [&] {
    SelectionResult r = LimitSolutionFormula(V0, *h, *poly);
    formula = r.field;
    p.bundle.fields.push_back({"u0_formula", r.field});
    p.bundle.selections.push_back({"limit_formula", std::move(r)});
  });
  std::vector<SweepEntry> sweep;
  p.Stage("lambda_sweep", [&] {
    SolveOptions o = p.Solver();
    o.dt = s.dt;
    sweep = LambdaSweep(s.model, cfg.lambdas, s.grid, s.vset, o);
    for (std::size_t k = 0; k < sweep.size(); ++k) {
      if (!sweep[k].result) {
        p.warnings.push_back("lambda " + FormatDouble(sweep[k].lambda) + ": " + sweep[k].error);
        continue;
      }
      if (!sweep[k].result->report.converged) {
        p.warnings.push_back("lambda " + FormatDouble(sweep[k].lambda) + ": solver did not converge");
      }
      p.bundle.fields.push_back({LambdaTag(k), sweep[k].result->u});
    }
  });
  p.Stage("convergence_report", [&] {
    std::string ref = p.Option("reference", "formula");
    Provenance prov = Provenance::kFormula;
    GridField reference = *formula;
    if (ref == "column") {
      std::vector<std::size_t> aubry = AubrySet(*h, cfg.aubry_tol);
      std::size_t y = p.OptionNode("reference_node", aubry.front(), s.grid);
      reference = SolutionFromBarrier(*h, y);
      for (double& v : reference.values()) v -= V0[y];
      p.results["reference_node"] = y;
    } else if (ref.rfind("constant:", 0) == 0) {
      ParamMap one{{"reference", ref.substr(9)}};
      reference = GridField(s.grid, ParamDouble(one, "reference", 0.0));
      prov = Provenance::kAnalytic;
    } else if (ref == "extrapolation") {
      const SweepEntry* last = nullptr;
      for (const SweepEntry& e : sweep) {
        if (e.result) last = &e;
      }
      if (!last) Fail(ErrorKind::kNumerical, "no converged sweep entry to extrapolate from");
      reference = last->result->u;
      prov = Provenance::kExtrapolation;
    }
    ConvergenceReport rep = MakeConvergenceReport(sweep, reference, prov);
    ConvergenceReport vs_formula = MakeConvergenceReport(sweep, *formula, Provenance::kFormula);
    json rows = json::array();
    bool all_converged = true;
    for (std::size_t k = 0; k < rep.rows.size(); ++k) {
      const ConvergenceRow& r = rep.rows[k];
      all_converged = all_converged && r.converged;
      rows.push_back({{"lambda", r.lambda},
                      {"error", r.error},
                      {"error_vs_formula", vs_formula.rows[k].error},
                      {"iterations", r.iterations},
                      {"residual", r.residual},
                      {"converged", r.converged}});
    }
    p.results["convergence"] = {{"reference", ref},
                                {"provenance", ProvenanceName(prov)},
                                {"monotone", rep.monotone},
                                {"rows", rows}};
    p.bundle.fields.push_back({"reference", reference});
    p.bundle.reports.push_back({"convergence", rep});
    p.CheckLe("final_error", rep.rows.back().error);
    p.CheckFlag("require_monotone", rep.monotone);
    p.CheckFlag("require_converged", all_converged);
  });
}

void NonexistencePipeline(Pipeline& p) {
  const ExperimentConfig& cfg = p.cfg();
  Setup s = p.MakeSetup();
  std::vector<double> expect = ParamList(cfg.options, "expect_certificate", {});
  auto expected = [&](double lambda) {
    for (double e : expect) {
      if (std::fabs(e - lambda) <= 1e-12 * std::max(1.0, std::fabs(e))) return true;
    }
    return false;
  };
  struct Row {
    double lambda;
    bool certificate;
    NonexistenceDetail detail;
    std::optional<SolveReport> solve;
  };
  std::vector<Row> rows;
  p.Stage("certificates", [&] {
    for (double lambda : cfg.lambdas) {
      Row r{lambda, false, {}, std::nullopt};
      r.certificate = NonexistenceCertificate(s.model, lambda, s.grid, 1e-6, &r.detail);
      rows.push_back(r);
    }
  });
  p.Stage("solver_probe", [&] {
    Scheme scheme(s.model, s.grid, s.vset, s.dt);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      SolveResult res = SolvePerturbed(scheme, rows[k].lambda, p.Solver());
      rows[k].solve = res.report;
      if (res.report.converged) p.bundle.fields.push_back({LambdaTag(k), res.u});
      if (res.report.converged && rows[k].certificate) {
        p.warnings.push_back("lambda " + FormatDouble(rows[k].lambda) +
                             ": solver converged although the certificate holds");
      }
    }
  });
  std::ostringstream csv;
  csv << "lambda,certificate,expected,infimum,threshold,converged,iterations,residual\n";
  json out = json::array();
  bool match = true;
  double worst_residual = 0.0;
  for (const Row& r : rows) {
    bool want = expect.empty() ? r.certificate : expected(r.lambda);
    match = match && (want == r.certificate);
    if (!want) {
      double res = r.solve->converged ? r.solve->final_residual : std::numeric_limits<double>::infinity();
      worst_residual = std::max(worst_residual, res);
    }
    csv << FormatDouble(r.lambda) << ',' << int(r.certificate) << ',' << int(want) << ','
        << FormatDouble(r.detail.infimum) << ',' << FormatDouble(r.detail.threshold) << ','
        << int(r.solve->converged) << ',' << r.solve->iterations << ','
        << FormatDouble(r.solve->final_residual) << '\n';
    out.push_back({{"lambda", r.lambda},
                   {"certificate", r.certificate},
                   {"expected_certificate", want},
                   {"infimum", r.detail.infimum},
                   {"threshold", r.detail.threshold},
                   {"worst_node", r.detail.worst_node},
                   {"solver_converged", r.solve->converged},
                   {"solver_iterations", r.solve->iterations},
                   {"solver_residual", r.solve->final_residual}});
  }
  p.bundle.tables.push_back({"certificates", csv.str()});
  p.results["lambdas"] = out;
  p.CheckFlag("require_match", match);
  p.CheckLe("residual", worst_residual);
}

GridField RandomSmooth(std::mt19937_64& rng, const PeriodicGrid& grid) {
  std::uniform_real_distribution<double> amp(-0.5, 0.5), phase(0.0, 2.0 * M_PI);
  struct Mode {
    int axis, freq;
    double a, b;
  };
  std::vector<Mode> modes;
  for (int axis = 0; axis < grid.d(); ++axis) {
    for (int j = 1; j <= 3; ++j) {
      double a = amp(rng);
      double b = phase(rng);
      modes.push_back({axis, j, a, b});
    }
  }
  return SampleField(grid, [&](const TorusPoint& x) {
    double acc = 0.0;
    for (const Mode& m : modes) acc += m.a * std::sin(2.0 * M_PI * m.freq * x.coords[m.axis] + m.b);
    return acc;
  });
}

// Pointwise minimum of one or two shifted barrier columns.
GridField RandomSolution(std::mt19937_64& rng, const BarrierMatrix& h) {
  std::uniform_int_distribution<std::size_t> node(0, h.size() - 1);
  std::uniform_real_distribution<double> shift(-0.3, 0.3);
  std::uniform_int_distribution<int> terms(1, 2);
  int k = terms(rng);
  GridField out(h.grid(), std::numeric_limits<double>::infinity());
  for (int t = 0; t < k; ++t) {
    std::size_t y = node(rng);
    double c = shift(rng);
    for (std::size_t x = 0; x < h.size(); ++x) out[x] = std::min(out[x], h(y, x) + c);
  }
  return out;
}

std::vector<std::size_t> SpreadNodes(const PeriodicGrid& g, std::size_t count) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(k * g.node_count() / count);
  return out;
}

void OperatorPipeline(Pipeline& p) {
  const ExperimentConfig& cfg = p.cfg();
  Setup s = p.MakeSetup();
  std::optional<MatherPolytope> poly;
  p.Stage("critical_value", [&] { poly = p.Critical(s); });
  std::optional<Scheme> critical;
  std::optional<BarrierMatrix> h;
  p.Stage("peierls_barrier", [&] {
    critical.emplace(s.model, s.grid, s.vset, s.dt);
    h = p.Barrier(*critical, poly->c);
    p.bundle.barriers.push_back({"barrier", *h});
  });
  const GridField sigma = SigmaField(s);
  std::mt19937_64 rng(cfg.seed);
  const int pairs = ParamInt(cfg.options, "pairs", 20);
  const int candidates = ParamInt(cfg.options, "candidates", 50);
  std::vector<GridField> phis;

  p.Stage("lipschitz", [&] {
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < pairs; ++k) {
      GridField a = RandomSmooth(rng, s.grid);
      GridField b = RandomSmooth(rng, s.grid);
      LipschitzCheck lc = CheckOperatorLipschitz(sigma, a, b, *h, *poly);
      worst = std::max(worst, lc.lhs - lc.rhs);
      phis.push_back(std::move(a));
    }
    p.results["lipschitz"] = {{"pairs", pairs}, {"max_excess", worst}};
    p.CheckLe("lipschitz_slack", worst);
  });

  std::optional<SelectionResult> image;
  p.Stage("image", [&] {
    GridField phi = phis.empty() ? RandomSmooth(rng, s.grid) : phis.front();
    image = ApplySelectionOperator(sigma, phi, *h, *poly);
    double res = CriticalResidual(*critical, image->field);
    p.results["image"] = {{"critical_residual", res}, {"C", res / s.grid.h()}};
    p.bundle.fields.push_back({"phi", phi});
    p.bundle.selections.push_back({"image", *image});
    p.CheckLe("image_residual_C", res / s.grid.h());
  });

  double fp_tol = 0.0;
  const double fp_factor = p.Has("fixed_point_factor") ? p.Threshold("fixed_point_factor") : 3.0;
  p.Stage("fixed_point", [&] {
    std::vector<std::size_t> nodes = AubrySet(*h, cfg.aubry_tol);
    if (nodes.size() > 4) nodes.resize(4);
    for (std::size_t y : SpreadNodes(s.grid, 4)) nodes.push_back(y);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    double grid_error = std::max(h->settle_gap, 1e-12);
    for (std::size_t y : nodes) {
      grid_error = std::max(grid_error, CriticalResidual(*critical, SolutionFromBarrier(*h, y)) * s.dt);
    }
    fp_tol = fp_factor * grid_error;
    double worst = 0.0;
    for (std::size_t y : nodes) {
      FixedPointCheck fc = CheckFixedPoint(sigma, SolutionFromBarrier(*h, y), *h, *poly, fp_tol);
      worst = std::max(worst, fc.distance);
    }
    p.results["fixed_point"] = {{"columns", nodes},
                                {"grid_error", grid_error},
                                {"tolerance", fp_tol},
                                {"max_distance", worst}};
    p.CheckLe("fixed_point_factor", worst / grid_error);
  });

  p.Stage("idempotence", [&] {
    SelectionResult twice = ApplySelectionOperator(sigma, image->field, *h, *poly);
    double dist = SupDistance(twice.field, image->field);
    p.results["idempotence"] = {{"distance", dist}};
    p.CheckLe("idempotence_factor", dist / fp_tol);
  });

  p.Stage("comparison", [&] {
    double tol = kComparisonTol + h->settle_gap + std::max(0.0, TriangleViolation(*h, kTriangleSamples, cfg.seed));
    std::size_t failures = 0, hypotheses = 0;
    double worst_excess = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < candidates; ++k) {
      GridField u1 = RandomSolution(rng, *h);
      GridField u2 = RandomSolution(rng, *h);
      ComparisonVerdict v = MeasureComparison(u1, u2, sigma, *poly, tol);
      if (v.hypothesis) {
        ++hypotheses;
        worst_excess = std::max(worst_excess, v.max_excess);
      }
      if (!v.implication_holds) ++failures;
    }
    p.results["comparison"] = {{"pairs", candidates},
                               {"tolerance", tol},
                               {"hypothesis_true", hypotheses},
                               {"failures", failures},
                               {"worst_excess_under_hypothesis", hypotheses ? worst_excess : 0.0}};
    if (hypotheses == 0) p.warnings.push_back("comparison: hypothesis never held; test is vacuous");
    p.CheckLe("comparison_failures", static_cast<double>(failures));
  });

  p.Stage("largest_subsolution", [&] {
    GridField V0 = Potential0(s);
    SelectionResult u0 = LimitSolutionFormula(V0, *h, *poly);
    std::vector<Candidate> cands;
    cands.push_back({"u0", u0.field});
    GridField lower = u0.field, upper = u0.field;
    for (double& v : lower.values()) v -= 0.05;
    for (double& v : upper.values()) v += 0.05;
    cands.push_back({"u0-0.05", lower});
    cands.push_back({"u0+0.05", upper});
    for (std::size_t y : SpreadNodes(s.grid, 4)) {
      GridField col = SolutionFromBarrier(*h, y);
      double gap = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < col.size(); ++i) gap = std::min(gap, u0.field[i] - col[i]);
      for (double& v : col.values()) v += gap;
      cands.push_back({"column_" + std::to_string(y) + "_touching", col});
    }
    LargestSubsolutionReport rep = CheckLargestSubsolution(u0.field, V0, *poly, *critical, cands,
                                                           kSubsolutionTol);
    json list = json::array();
    for (const CandidateOutcome& c : rep.candidates) {
      list.push_back({{"label", c.label},
                      {"subsolution", c.subsolution},
                      {"defect", c.subsolution_defect},
                      {"member", c.member},
                      {"dominated", c.dominated},
                      {"excess", c.excess}});
    }
    p.results["largest_subsolution"] = {{"candidates", list}, {"violations", rep.violations}};
    p.bundle.fields.push_back({"u0_formula", u0.field});
    p.CheckLe("subsolution_violations", static_cast<double>(rep.violations));
  });
}

void OccupationPipeline(Pipeline& p) {
  const ExperimentConfig& cfg = p.cfg();
  Setup s = p.MakeSetup();
  std::optional<MatherPolytope> poly;
  p.Stage("critical_value", [&] { poly = p.Critical(s); });
  const std::size_t start = p.OptionNode("start_node", 0, s.grid);
  const double horizon = p.OptionDouble("horizon_factor", 20.0);
  const double refine_lambda = p.OptionDouble("refine_lambda", cfg.lambdas.back());
  const std::vector<double> lp_proj = ProjectedMeasure(SolveMatherLp(*poly).measure);

  struct Sample {
    double lambda, mass_error, closedness, tv, max_defect, speed;
    std::size_t iterations, steps;
  };
  auto run_one = [&](const Scheme& scheme, double lambda, bool keep) {
    SolveOptions o = p.Solver();
    SolveResult r = SolvePerturbed(scheme, lambda, o);
    if (!r.report.converged) {
      p.warnings.push_back("lambda " + FormatDouble(lambda) + ": solver did not converge");
    }
    CurveTrace tr = BackwardCalibratedCurve(scheme, lambda, r.u, s.grid.node(start), horizon / lambda,
                                            cfg.tol);
    SpeedCheck sc = SpeedBoundCheck(tr);
    if (!sc.pass) p.warnings.push_back("lambda " + FormatDouble(lambda) + ": " + sc.message);
    DiscreteMeasure mu = OccupationMeasure(tr, s.grid, s.vset);
    CalibrationCheck cc = CheckCalibration(tr, r.u, scheme);
    Sample smp{lambda,
               CheckMassIdentity(tr),
               ClosednessDefect(mu, poly->closedness),
               TotalVariation(ProjectedMeasure(mu), lp_proj),
               cc.max_defect,
               sc.max_speed,
               r.report.iterations,
               tr.steps()};
    if (keep) {
      std::size_t k = p.bundle.measures.size();
      p.bundle.measures.push_back({"occupation_" + std::to_string(k), mu});
    }
    return smp;
  };

  std::vector<Sample> samples;
  std::optional<Sample> refined;
  double base_refine_error = -1.0;
  p.Stage("occupation_sweep", [&] {
    Scheme scheme(s.model, s.grid, s.vset, s.dt);
    for (double lambda : cfg.lambdas) samples.push_back(run_one(scheme, lambda, true));
    for (const Sample& smp : samples) {
      if (std::fabs(smp.lambda - refine_lambda) <= 1e-12) base_refine_error = smp.mass_error;
    }
    if (base_refine_error < 0.0) {
      Fail(ErrorKind::kConfiguration, "[experiment] refine_lambda is not in the lambda schedule");
    }
  });
  p.Stage("dt_refinement", [&] {
    Scheme fine(s.model, s.grid, s.vset, 0.5 * s.dt);
    refined = run_one(fine, refine_lambda, false);
  });
  p.Stage("identities", [&] {
    std::ostringstream csv;
    csv << "lambda,dt,iterations,steps,mass_identity,closedness,tv_to_lp,max_defect,max_speed\n";
    json rows = json::array();
    auto emit = [&](const Sample& smp, double dt) {
      csv << FormatDouble(smp.lambda) << ',' << FormatDouble(dt) << ',' << smp.iterations << ','
          << smp.steps << ',' << FormatDouble(smp.mass_error) << ',' << FormatDouble(smp.closedness)
          << ',' << FormatDouble(smp.tv) << ',' << FormatDouble(smp.max_defect) << ','
          << FormatDouble(smp.speed) << '\n';
      rows.push_back({{"lambda", smp.lambda},
                      {"dt", dt},
                      {"mass_identity", smp.mass_error},
                      {"closedness", smp.closedness},
                      {"tv_to_lp", smp.tv},
                      {"max_defect", smp.max_defect}});
    };
    for (const Sample& smp : samples) emit(smp, s.dt);
    emit(*refined, 0.5 * s.dt);
    p.bundle.tables.push_back({"occupation", csv.str()});

    double num = 0.0, den = 0.0;
    for (const Sample& smp : samples) {
      num += smp.closedness * smp.lambda;
      den += smp.lambda * smp.lambda;
    }
    double C = num / den;
    double worst_ratio = 0.0;
    std::vector<double> tvs;
    for (const Sample& smp : samples) {
      worst_ratio = std::max(worst_ratio, C > 0.0 ? smp.closedness / (C * smp.lambda) : 0.0);
      tvs.push_back(smp.tv);
    }
    double ratio = base_refine_error / refined->mass_error;
    bool tv_monotone = FactorTwoMonotone(tvs);
    p.results["occupation"] = {{"rows", rows},
                               {"closedness_C", C},
                               {"closedness_worst_ratio", worst_ratio},
                               {"refine_lambda", refine_lambda},
                               {"refine_ratio", ratio},
                               {"tv_monotone", tv_monotone}};
    p.CheckLe("mass_identity", base_refine_error);
    p.CheckRange("refine_ratio_min", "refine_ratio_max", ratio);
    p.CheckLe("closedness_factor", worst_ratio);
    p.CheckFlag("require_tv_monotone", tv_monotone);
  });
}

double MassNear(const DiscreteMeasure& mu, std::size_t node, int cells) {
  std::vector<double> proj = ProjectedMeasure(mu);
  double acc = 0.0;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    if (mu.grid.cell_distance(i, node) <= cells) acc += proj[i];
  }
  return acc;
}

void BarrierPipeline(Pipeline& p) {
  const ExperimentConfig& cfg = p.cfg();
  Setup s = p.MakeSetup();
  std::optional<MatherPolytope> poly;
  p.Stage("critical_value", [&] {
    poly = p.Critical(s);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, worst = 0.0;
    for (const std::string& m : cfg.critical_methods) {
      double v = p.results["critical"][m].get<double>();
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (s.model.analytic_c) worst = std::max(worst, std::fabs(v - *s.model.analytic_c));
    }
    p.results["critical"]["spread"] = hi - lo;
    p.CheckLe("critical_spread", hi - lo);
    if (s.model.analytic_c) {
      p.CheckLe("critical_error", worst);
    } else if (p.Has("critical_error")) {
      Fail(ErrorKind::kConfiguration, "model '" + cfg.model + "' has no analytic critical value");
    }
  });
  std::optional<Scheme> critical;
  std::optional<BarrierMatrix> h;
  p.Stage("peierls_barrier", [&] {
    critical.emplace(s.model, s.grid, s.vset, s.dt);
    h = p.Barrier(*critical, poly->c);
    double tri = TriangleViolation(*h, kTriangleSamples, cfg.seed);
    bool fallback = false;
    std::vector<std::size_t> aubry = AubrySet(*h, cfg.aubry_tol, &fallback);
    if (fallback) p.warnings.push_back("Aubry set empty at tolerance " + FormatDouble(cfg.aubry_tol) + "; using diagonal minimisers");
    p.results["barrier"]["triangle_violation"] = tri;
    p.results["barrier"]["aubry_set"] = aubry;
    p.results["barrier"]["column_residual"] = CriticalResidual(*critical, SolutionFromBarrier(*h, aubry.front()));
    p.bundle.barriers.push_back({"barrier", *h});
    p.CheckLe("settle_gap", h->settle_gap);
    p.CheckLe("triangle", std::max(0.0, tri));
  });
  p.Stage("polytope", [&] {
    LpSummary(p, s, *poly);
    // Every optimiser produced here, including the per-node fractional ones.
    SelectionResult sel = ApplySelectionOperator(SigmaField(s), GridField(s.grid, 0.0), *h, *poly, true);
    double worst_mass = std::fabs(p.results["lp"]["mass"].get<double>() - 1.0);
    double worst_closed = p.results["lp"]["closedness"].get<double>();
    bool graph = p.results["lp"]["graph_check"].get<bool>();
    for (const DiscreteMeasure& mu : sel.per_x_optimizer) {
      worst_mass = std::max(worst_mass, std::fabs(mu.mass() - 1.0));
      worst_closed = std::max(worst_closed, LpClosedness(*poly, mu));
    }
    p.results["optimizers"] = {{"count", sel.per_x_optimizer.size() + 1},
                               {"worst_mass_error", worst_mass},
                               {"worst_closedness", worst_closed}};
    p.CheckLe("lp_mass", worst_mass);
    p.CheckLe("lp_closedness", worst_closed);
    p.CheckFlag("graph_check", graph);
    p.CheckLe("uniform_tv", p.results["lp"]["tv_to_uniform"].get<double>());
  });
  if (cfg.options.count("query_node")) {
    p.Stage("equilibrium", [&] {
      std::size_t x = p.OptionNode("query_node", 0, s.grid);
      GridField phi(s.grid, 0.0);
      EquilibriumResult sym = EquilibriumMeasures(phi, x, *h, *poly);
      json eq = {{"query_node", x}, {"symmetric_value", sym.value}, {"symmetric_multiplicity", sym.multiplicity}};
      p.CheckFlag("multiplicity_symmetric", sym.multiplicity);
      p.bundle.measures.push_back({"equilibrium_symmetric", sym.witness});
      if (cfg.options.count("bump_node")) {
        std::size_t b = p.OptionNode("bump_node", 0, s.grid);
        phi[b] = p.OptionDouble("bump", -0.1);
        EquilibriumResult bumped = EquilibriumMeasures(phi, x, *h, *poly);
        double mass = MassNear(bumped.witness, b, 2);
        eq["bump_node"] = b;
        eq["bump"] = phi[b];
        eq["bumped_value"] = bumped.value;
        eq["bumped_multiplicity"] = bumped.multiplicity;
        eq["bumped_mass_within_2_cells"] = mass;
        p.bundle.measures.push_back({"equilibrium_bumped", bumped.witness});
        // A non-unique witness does not count as concentrated.
        p.CheckGe("bump_mass", bumped.multiplicity ? 0.0 : mass);
      }
      p.results["equilibrium"] = eq;
    });
  }
}

const std::map<std::string, std::set<std::string>>& KindOptions() {
  static const std::map<std::string, std::set<std::string>> opts = {
      {"vanishing_discount", {"reference", "reference_node"}},
      {"example_6_1", {"reference", "reference_node"}},
      {"nonexistence_3_4", {"expect_certificate"}},
      {"operator_suite", {"pairs", "candidates"}},
      {"occupation_suite", {"start_node", "horizon_factor", "refine_lambda"}},
      {"barrier_suite", {"query_node", "bump_node", "bump"}},
  };
  return opts;
}

json ParametersOf(const ExperimentConfig& cfg, const Setup& s) {
  LpOptions lp;
  return {{"d", cfg.d},
          {"n", cfg.n},
          {"h", s.grid.h()},
          {"vmax", cfg.vmax},
          {"velocity_points", cfg.vpoints},
          {"dt", s.dt},
          {"solver_tol", cfg.tol},
          {"solver_max_iter", cfg.max_iter},
          {"lambdas", cfg.lambdas},
          {"barrier_Tmax", cfg.barrier.Tmax},
          {"barrier_window_start", cfg.barrier.window_start},
          {"barrier_drift_tol", cfg.barrier.drift_tol},
          {"barrier_cone_slope", cfg.barrier.cone_slope},
          {"critical_methods", cfg.critical_methods},
          {"discount_lambdas", cfg.discount_lambdas},
          {"seed", cfg.seed},
          {"p_box", s.model.p_box},
          {"fenchel_samples", s.model.fenchel_samples},
          {"lp_optimality_tol", lp.optimality_tol},
          {"lp_pivot_tol", lp.pivot_tol},
          {"lp_feasibility_tol", lp.feasibility_tol},
          {"lp_multiplicity_tol", lp.multiplicity_tol},
          {"face_tol", 1e-9},
          {"aubry_tol", cfg.aubry_tol},
          {"graph_tol", kGraphTol},
          {"comparison_tol", kComparisonTol},
          {"subsolution_tol", kSubsolutionTol},
          {"triangle_samples", kTriangleSamples},
          {"occupation_tail_tol", 1e-4},
          {"certificate_margin", 1e-6},
          {"options", cfg.options},
          {"acceptance", cfg.acceptance}};
}

std::string OutputRoot(const ExperimentConfig& cfg, const RunOptions& options) {
  if (!options.output_root.empty()) return options.output_root;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return cfg.output_root;
}

}  // namespace

void ValidateExperimentOptions(const ExperimentConfig& cfg) {
  const std::set<std::string>& allowed = KindOptions().at(cfg.kind);
  for (const auto& [k, v] : cfg.options) {
    if (!allowed.count(k)) {
      Fail(ErrorKind::kConfiguration,
           "[experiment] key '" + k + "' does not apply to kind '" + cfg.kind + "'");
    }
  }
  auto node = [&](const std::string& key) {
    if (!cfg.options.count(key)) return;
    int v = ParamInt(cfg.options, key, 0);
    std::size_t nodes = cfg.d == 1 ? cfg.n : static_cast<std::size_t>(cfg.n) * cfg.n;
    if (v < 0 || static_cast<std::size_t>(v) >= nodes) {
      Fail(ErrorKind::kConfiguration, "[experiment] " + key + " is not a grid node");
    }
  };
  for (const char* key : {"reference_node", "start_node", "query_node", "bump_node"}) node(key);
  for (const char* key : {"horizon_factor", "refine_lambda", "bump"}) ParamDouble(cfg.options, key, 0.0);
  for (const char* key : {"pairs", "candidates"}) {
    if (cfg.options.count(key) && ParamInt(cfg.options, key, 0) < 1) {
      Fail(ErrorKind::kConfiguration, std::string("[experiment] ") + key + " must be positive");
    }
  }
  ParamList(cfg.options, "expect_certificate", {});
  if (cfg.options.count("reference")) {
    const std::string& r = cfg.options.at("reference");
    if (r.rfind("constant:", 0) == 0) {
      ParamMap one{{"reference", r.substr(9)}};
      ParamDouble(one, "reference", 0.0);
    } else if (r != "formula" && r != "column" && r != "extrapolation") {
      Fail(ErrorKind::kConfiguration,
           "[experiment] reference must be formula, column, extrapolation or constant:<value>");
    }
  }
  if (cfg.options.count("horizon_factor") && !(ParamDouble(cfg.options, "horizon_factor", 0.0) > 0.0)) {
    Fail(ErrorKind::kConfiguration, "[experiment] horizon_factor must be positive");
  }
  if (cfg.options.count("bump_node") && !cfg.options.count("query_node")) {
    Fail(ErrorKind::kConfiguration, "[experiment] bump_node needs query_node");
  }
}

RunResult RunExperiment(const ExperimentConfig& config, const RunOptions& options) {
  auto t0 = Clock::now();
  if (options.threads > 0) SetMaxThreads(options.threads);
  RunResult result;
  result.directory = (std::filesystem::path(OutputRoot(config, options)) / config.name).string();

  Pipeline p(config);
  bool failed = false;
  try {
    ValidateExperimentOptions(config);
    p.parameters = ParametersOf(config, p.MakeSetup());
    if (config.kind == "vanishing_discount" || config.kind == "example_6_1") {
      SweepPipeline(p);
    } else if (config.kind == "nonexistence_3_4") {
      NonexistencePipeline(p);
    } else if (config.kind == "operator_suite") {
      OperatorPipeline(p);
    } else if (config.kind == "occupation_suite") {
      OccupationPipeline(p);
    } else if (config.kind == "barrier_suite") {
      BarrierPipeline(p);
    } else {
      Fail(ErrorKind::kConfiguration, "unknown experiment kind '" + config.kind + "'");
    }
  } catch (const Error& e) {
    failed = true;
    result.error = e.what();
    result.error_kind = e.kind();
  } catch (const std::exception& e) {
    failed = true;
    result.error = e.what();
    result.error_kind = ErrorKind::kInternal;
  }
  if (failed) {
    result.failed_stage = p.current.empty() ? "setup" : p.current;
    p.stages.push_back({{"name", result.failed_stage}, {"status", "failed"}, {"error", result.error}});
  }
  result.checks = p.checks;
  result.warnings = p.warnings;

  bool checks_pass = std::all_of(p.checks.begin(), p.checks.end(), [](const StageCheck& c) { return c.pass; });
  result.passed = !failed && checks_pass && !(options.strict && !p.warnings.empty());

  json checks = json::array();
  for (const StageCheck& c : p.checks) {
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"relation", c.relation},
                      {"threshold", c.threshold},
                      {"pass", c.pass}});
  }
  json config_echo = {{"kind", config.kind},
                      {"name", config.name},
                      {"model", config.model},
                      {"model_params", config.model_params},
                      {"text", config.source},
                      {"sha256", Sha256Hex(config.source)}};
  p.bundle.manifest = {{"tool", "wks"},
                       {"version", kVersion},
                       {"config", config_echo},
                       {"parameters", p.parameters},
                       {"stages", p.stages},
                       {"checks", checks},
                       {"warnings", p.warnings},
                       {"strict", options.strict},
                       {"results", p.results},
                       {"passed", result.passed},
                       {"failed_stage", result.failed_stage.empty() ? json(nullptr) : json(result.failed_stage)},
                       {"error", result.error.empty() ? json(nullptr) : json(result.error)},
                       {"timing_file", "timing.json"}};
  try {
    ExportAll(p.bundle, result.directory);
    result.wall_seconds = Seconds(t0);
    json timing = {{"wall_seconds", result.wall_seconds}, {"stages", p.timing}};
    std::ofstream out(std::filesystem::path(result.directory) / "timing.json");
    out << timing.dump(2) << '\n';
    if (!out) Fail(ErrorKind::kIo, "cannot write timing.json in " + result.directory);
  } catch (const Error& e) {
    result.passed = false;
    if (result.error.empty()) {
      result.error = e.what();
      result.error_kind = e.kind();
      result.failed_stage = "export";
    }
  }
  result.wall_seconds = Seconds(t0);
  return result;
}

RunResult RunExperimentFile(const std::string& path, const RunOptions& options) {
  return RunExperiment(LoadConfig(path), options);
}

}  // namespace wks
