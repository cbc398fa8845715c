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

#include "wks/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "wks/error.hpp"
#include "wks/parallel.hpp"

namespace wks {

namespace {

void CheckGrid(const GridField& f, const MatherPolytope& poly, const char* what) {
  if (!(f.grid() == poly.grid)) {
    Fail(ErrorKind::kConfiguration, std::string(what) + " lives on a different grid");
  }
}

void CheckBarrier(const BarrierMatrix& h, const MatherPolytope& poly) {
  if (!(h.grid() == poly.grid)) Fail(ErrorKind::kConfiguration, "barrier grid mismatch");
}

template <typename Objective>
SelectionResult PerNode(const MatherPolytope& poly, bool keep, Objective&& objective) {
  const std::size_t n = poly.grid.node_count();
  SelectionResult out{GridField(poly.grid)};
  out.per_x_value.assign(n, 0.0);
  out.multiplicity.assign(n, 0);
  std::vector<std::optional<DiscreteMeasure>> measures(keep ? n : 0);
  std::vector<std::string> errors(n);
  ParallelFor(n, [&](std::size_t x) {
    try {
      MeasureResult r = objective(x);
      out.per_x_value[x] = r.value;
      out.multiplicity[x] = r.multiplicity ? 1 : 0;
      if (keep) measures[x] = std::move(r.measure);
    } catch (const Error& e) {
      errors[x] = e.what();
    }
  });
  for (std::size_t x = 0; x < n; ++x) {
    if (!errors[x].empty()) {
      Fail(ErrorKind::kNumerical, "node " + std::to_string(x) + ": " + errors[x]);
    }
  }
  out.field.values() = out.per_x_value;
  for (auto& m : measures) out.per_x_optimizer.push_back(std::move(*m));
  return out;
}

}  // namespace

std::vector<double> LiftToVariables(const std::vector<double>& node_values,
                                    const MatherPolytope& polytope) {
  const std::size_t m = polytope.vset.size();
  std::vector<double> out(polytope.variables());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = node_values[j / m];
  return out;
}

SelectionResult ApplySelectionOperator(const GridField& sigma, const GridField& phi,
                                       const BarrierMatrix& barrier,
                                       const MatherPolytope& polytope, bool keep_measures) {
  CheckGrid(sigma, polytope, "sigma");
  CheckGrid(phi, polytope, "phi");
  CheckBarrier(barrier, polytope);
  if (sigma.min() <= 0.0) Fail(ErrorKind::kDomain, "sigma must be positive");
  const std::vector<double> b = LiftToVariables(sigma.values(), polytope);
  const std::size_t m = polytope.vset.size();
  return PerNode(polytope, keep_measures, [&](std::size_t x) {
    std::vector<double> a(polytope.variables());
    for (std::size_t j = 0; j < a.size(); ++j) {
      std::size_t y = j / m;
      a[j] = sigma[y] * (barrier(y, x) + phi[y]);
    }
    return FractionalMinimize(polytope, a, b, DenominatorSign::kPositive);
  });
}

SelectionResult LimitSolutionFormula(const GridField& V0, const BarrierMatrix& barrier,
                                     const MatherPolytope& polytope, bool keep_measures) {
  CheckGrid(V0, polytope, "V0");
  CheckBarrier(barrier, polytope);
  for (double d : polytope.dLdu0) {
    if (!(d < 0.0)) Fail(ErrorKind::kDomain, "dL/du(x,v,0) >= 0 somewhere; the model violates (H4)");
  }
  const std::size_t m = polytope.vset.size();
  return PerNode(polytope, keep_measures, [&](std::size_t x) {
    std::vector<double> a(polytope.variables());
    for (std::size_t j = 0; j < a.size(); ++j) {
      std::size_t y = j / m;
      a[j] = barrier(y, x) * polytope.dLdu0[j] + V0[y];
    }
    return FractionalMinimize(polytope, a, polytope.dLdu0, DenominatorSign::kNegative);
  });
}

FixedPointCheck CheckFixedPoint(const GridField& sigma, const GridField& u,
                                const BarrierMatrix& barrier, const MatherPolytope& polytope,
                                double tol) {
  SelectionResult r = ApplySelectionOperator(sigma, u, barrier, polytope);
  FixedPointCheck out;
  out.distance = SupDistance(r.field, u);
  out.pass = out.distance <= tol;
  return out;
}

LipschitzCheck CheckOperatorLipschitz(const GridField& sigma, const GridField& phi1,
                                      const GridField& phi2, const BarrierMatrix& barrier,
                                      const MatherPolytope& polytope, double slack) {
  SelectionResult r1 = ApplySelectionOperator(sigma, phi1, barrier, polytope);
  SelectionResult r2 = ApplySelectionOperator(sigma, phi2, barrier, polytope);
  LipschitzCheck out;
  out.lhs = SupDistance(r1.field, r2.field);
  out.rhs = SupDistance(phi1, phi2);
  out.pass = out.lhs <= out.rhs + slack;
  return out;
}

ComparisonVerdict MeasureComparison(const GridField& u1, const GridField& u2,
                                    const GridField& sigma, const MatherPolytope& polytope,
                                    double tol) {
  CheckGrid(u1, polytope, "u1");
  CheckGrid(u2, polytope, "u2");
  CheckGrid(sigma, polytope, "sigma");
  std::vector<double> diff(u1.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = sigma[i] * (u2[i] - u1[i]);
  MeasureResult r = MinimizeLinearOverMather(polytope, LiftToVariables(diff, polytope));
  ComparisonVerdict v;
  v.min_integral = r.value;
  v.hypothesis = r.value >= -tol;
  double excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < u1.size(); ++i) excess = std::max(excess, u1[i] - u2[i]);
  v.max_excess = excess;
  v.conclusion = excess <= tol;
  v.implication_holds = !v.hypothesis || v.conclusion;
  return v;
}

LargestSubsolutionReport CheckLargestSubsolution(const GridField& u0, const GridField& V0,
                                                 const MatherPolytope& polytope,
                                                 const Scheme& critical_scheme,
                                                 const std::vector<Candidate>& candidates,
                                                 double tol) {
  CheckGrid(u0, polytope, "u0");
  CheckGrid(V0, polytope, "V0");
  const std::vector<double> v0 = LiftToVariables(V0.values(), polytope);
  const std::vector<double> pot(u0.size(), 0.0);
  LargestSubsolutionReport rep;
  for (const Candidate& cand : candidates) {
    CheckGrid(cand.w, polytope, "candidate");
    CandidateOutcome out;
    out.label = cand.label;
    double defect = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cand.w.size(); ++i) {
      double t = critical_scheme.Apply(cand.w.values(), i, 0.0, pot[i]);
      defect = std::max(defect, (cand.w[i] - t) / critical_scheme.dt());
    }
    out.subsolution_defect = defect;
    out.subsolution = defect <= tol;
    if (out.subsolution) {
      std::vector<double> cost = LiftToVariables(cand.w.values(), polytope);
      for (std::size_t j = 0; j < cost.size(); ++j) cost[j] = cost[j] * polytope.dLdu0[j] - v0[j];
      MeasureResult r = MinimizeLinearOverMather(polytope, cost);
      out.membership_value = r.value;
      out.member = r.value >= -tol;
      double excess = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < u0.size(); ++i) excess = std::max(excess, cand.w[i] - u0[i]);
      out.excess = excess;
      out.dominated = excess <= tol;
      if (out.member && !out.dominated) ++rep.violations;
    }
    rep.candidates.push_back(std::move(out));
  }
  return rep;
}

EquilibriumResult EquilibriumMeasures(const GridField& phi, std::size_t x,
                                      const BarrierMatrix& barrier,
                                      const MatherPolytope& polytope) {
  CheckGrid(phi, polytope, "phi");
  CheckBarrier(barrier, polytope);
  if (x >= polytope.grid.node_count()) Fail(ErrorKind::kDomain, "query node out of range");
  const std::size_t m = polytope.vset.size();
  std::vector<double> cost(polytope.variables());
  for (std::size_t j = 0; j < cost.size(); ++j) {
    std::size_t y = j / m;
    cost[j] = barrier(y, x) + phi[y];
  }
  MeasureResult r = MinimizeLinearOverMather(polytope, cost);
  return EquilibriumResult{std::move(r.measure), r.value, r.multiplicity};
}

void WriteSelectionCsv(const SelectionResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  out << "node,value,multiplicity\n";
  for (std::size_t i = 0; i < r.per_x_value.size(); ++i) {
    out << i << "," << FormatDouble(r.per_x_value[i]) << "," << int(r.multiplicity[i]) << "\n";
  }
  if (!out) Fail(ErrorKind::kIo, "failed writing " + path);
}

}  // namespace wks
