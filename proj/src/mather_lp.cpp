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

#include "wks/mather_lp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "wks/error.hpp"
#include "wks/parallel.hpp"

namespace wks {

namespace {

constexpr double kFaceTol = 1e-9;
constexpr double kMultiplicityTol = 1e-9;

// Rows of a sub-LP: used closedness rows are renumbered densely, extra rows
// follow them.
struct SubLp {
  LpProblem lp;
  std::vector<std::size_t> columns;  // polytope variable per LP column
};

SubLp BuildSubLp(const MatherPolytope& poly, const std::vector<std::size_t>& cols,
                 const std::vector<double>& cost) {
  SubLp sub;
  sub.columns = cols;
  // Every column sums to zero over its closedness rows, so the used rows are
  // dependent and the first one is dropped.
  std::vector<int> row_map(poly.grid.node_count(), -1);
  int rows = -1;
  for (std::size_t j : cols) {
    for (const auto& [r, a] : poly.closedness[j].entries) {
      if (row_map[r] == -1) row_map[r] = rows++;
    }
  }
  sub.lp.rows = static_cast<std::size_t>(std::max(rows, 0));
  for (std::size_t j : cols) {
    SparseColumn col;
    for (const auto& [r, a] : poly.closedness[j].entries) {
      if (row_map[r] >= 0) col.entries.emplace_back(row_map[r], a);
    }
    sub.lp.AddColumn(std::move(col), cost[j]);
  }
  sub.lp.rhs.assign(sub.lp.rows, 0.0);
  return sub;
}

// Appends a row with the given coefficient per structural column and rhs.
void AddRow(SubLp& sub, const std::vector<double>& coef, double rhs) {
  int row = static_cast<int>(sub.lp.rows++);
  for (std::size_t c = 0; c < sub.columns.size(); ++c) {
    if (coef[c] != 0.0) sub.lp.columns[c].entries.emplace_back(row, coef[c]);
  }
  sub.lp.rhs.push_back(rhs);
}

std::vector<std::size_t> SearchColumns(const MatherPolytope& poly) {
  if (poly.face_mode) return poly.face;
  std::vector<std::size_t> all(poly.variables());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  return all;
}

bool Multiplicity(const LpResult& r, std::size_t structural) {
  std::vector<char> basic(r.reduced_costs.size(), 0);
  for (int b : r.basis) {
    if (b >= 0) basic[b] = 1;
  }
  for (std::size_t j = 0; j < structural; ++j) {
    if (!basic[j] && std::fabs(r.reduced_costs[j]) <= kMultiplicityTol) return true;
  }
  return false;
}

LpResult SolveOrThrow(const LpProblem& lp, const MatherPolytope& poly, const char* what) {
  LpResult r = SolveLp(lp);
  if (r.status == LpStatus::kOptimal) return r;
  if (r.status == LpStatus::kInfeasible && !poly.face_mode) {
    Fail(ErrorKind::kInfeasible, std::string(what) +
                                     ": Mather subpolytope is empty; increase tol_min");
  }
  Fail(r.status == LpStatus::kInfeasible ? ErrorKind::kInfeasible : ErrorKind::kNumerical,
       std::string(what) + ": LP ended with status " + LpStatusName(r.status));
}

// Minimality row Sum w (L0 - (-c + tol_min)) + s = 0 for slack mode; adds the
// slack column and returns its LP index.
void AddMinimalityRow(SubLp& sub, const MatherPolytope& poly, bool homogeneous) {
  const double bound = -poly.c + poly.tol_min;
  std::vector<double> coef(sub.columns.size());
  for (std::size_t c = 0; c < coef.size(); ++c) {
    coef[c] = poly.action[sub.columns[c]] - (homogeneous ? bound : 0.0);
  }
  AddRow(sub, coef, homogeneous ? 0.0 : bound);
  SparseColumn slack;
  slack.entries.emplace_back(static_cast<int>(sub.lp.rows - 1), 1.0);
  sub.lp.AddColumn(std::move(slack), 0.0);
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(PeriodicGrid g, VelocitySet v)
    : grid(g), vset(std::move(v)), weights(g.node_count() * vset.size(), 0.0) {}

double DiscreteMeasure::mass() const {
  double acc = 0.0;
  for (double w : weights) acc += w;
  return acc;
}

std::vector<SparseColumn> ClosednessOperator(const PeriodicGrid& grid, const VelocitySet& vset,
                                             double dt) {
  const std::size_t n = grid.node_count();
  const std::size_t m = vset.size();
  std::vector<SparseColumn> op(n * m);
  ParallelFor(n, [&](std::size_t i) {
    TorusPoint x = grid.node(i);
    for (std::size_t k = 0; k < m; ++k) {
      const Vec& v = vset[k];
      Vec y{x.coords[0] - v[0] * dt, x.coords[1] - v[1] * dt};
      Stencil st = MakeStencil(grid, WrapPoint(y, grid.d()));
      std::map<std::size_t, double> acc;
      acc[i] -= 1.0;
      for (int s = 0; s < st.size; ++s) acc[st.nodes[s]] += st.weights[s];
      SparseColumn& col = op[i * m + k];
      for (const auto& [r, a] : acc) {
        if (std::fabs(a) > 1e-15) col.entries.emplace_back(static_cast<int>(r), a);
      }
    }
  }, 8);
  return op;
}

std::vector<double> ApplyClosedness(const std::vector<SparseColumn>& op,
                                    const std::vector<double>& weights, std::size_t rows) {
  std::vector<double> out(rows, 0.0);
  for (std::size_t j = 0; j < op.size(); ++j) {
    if (weights[j] == 0.0) continue;
    for (const auto& [r, a] : op[j].entries) out[r] += a * weights[j];
  }
  return out;
}

MatherPolytope BuildMatherPolytope(const Scheme& scheme, double tol_min) {
  if (!(tol_min >= 0.0)) Fail(ErrorKind::kConfiguration, "tol_min must be nonnegative");
  MatherPolytope poly{scheme.grid(), scheme.vset()};
  poly.dt = scheme.dt();
  poly.tol_min = tol_min;
  poly.closedness = ClosednessOperator(poly.grid, poly.vset, poly.dt);
  const std::size_t n = poly.grid.node_count();
  const std::size_t m = poly.vset.size();
  poly.action.resize(n * m);
  poly.dLdu0.resize(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    TorusPoint x = poly.grid.node(i);
    for (std::size_t k = 0; k < m; ++k) {
      poly.action[i * m + k] = scheme.model().L0(x, poly.vset[k]);
      poly.dLdu0[i * m + k] = scheme.dLdu0(i, k);
    }
  }

  // Row 0 of the closedness block is implied by the others and is left out;
  // the mass row takes its place.
  LpProblem lp;
  lp.rows = n;
  for (std::size_t j = 0; j < n * m; ++j) {
    SparseColumn col;
    for (const auto& [r, a] : poly.closedness[j].entries) {
      if (r != 0) col.entries.emplace_back(r, a);
    }
    col.entries.emplace_back(0, 1.0);
    lp.AddColumn(std::move(col), poly.action[j]);
  }
  lp.rhs.assign(n, 0.0);
  lp.rhs[0] = 1.0;
  LpResult r = SolveLp(lp);
  if (r.status != LpStatus::kOptimal) {
    Fail(ErrorKind::kInfeasible, std::string("Mather LP ended with status ") +
                                     LpStatusName(r.status) +
                                     " (closedness operator rank defect?)");
  }
  poly.lp_value = r.objective;
  poly.c = -r.objective;
  poly.lp_solution = r.x;
  poly.reduced_costs = r.reduced_costs;
  poly.lp_multiple_optima = r.multiple_optima;
  poly.face_mode = tol_min <= kFaceTol;
  for (std::size_t j = 0; j < n * m; ++j) {
    if (r.reduced_costs[j] <= kFaceTol) poly.face.push_back(j);
  }
  return poly;
}

MeasureResult SolveMatherLp(const MatherPolytope& polytope) {
  MeasureResult out{DiscreteMeasure(polytope.grid, polytope.vset)};
  out.measure.weights = polytope.lp_solution;
  out.value = polytope.lp_value;
  out.multiplicity = polytope.lp_multiple_optima;
  return out;
}

MeasureResult MinimizeLinearOverMather(const MatherPolytope& polytope,
                                       const std::vector<double>& cost) {
  if (cost.size() != polytope.variables()) Fail(ErrorKind::kConfiguration, "cost size mismatch");
  const auto cols = SearchColumns(polytope);
  SubLp sub = BuildSubLp(polytope, cols, cost);
  AddRow(sub, std::vector<double>(cols.size(), 1.0), 1.0);
  if (!polytope.face_mode) AddMinimalityRow(sub, polytope, false);
  LpResult r = SolveOrThrow(sub.lp, polytope, "minimize_linear_over_mather");
  MeasureResult out{DiscreteMeasure(polytope.grid, polytope.vset)};
  for (std::size_t c = 0; c < cols.size(); ++c) out.measure.weights[cols[c]] = r.x[c];
  out.value = 0.0;
  for (std::size_t c = 0; c < cols.size(); ++c) out.value += r.x[c] * cost[cols[c]];
  out.multiplicity = Multiplicity(r, cols.size());
  out.iterations = r.iterations;
  return out;
}

MeasureResult MinimizeLinearOverClosed(const MatherPolytope& polytope,
                                       const std::vector<double>& cost) {
  if (cost.size() != polytope.variables()) Fail(ErrorKind::kConfiguration, "cost size mismatch");
  std::vector<std::size_t> cols(polytope.variables());
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = j;
  SubLp sub = BuildSubLp(polytope, cols, cost);
  AddRow(sub, std::vector<double>(cols.size(), 1.0), 1.0);
  LpResult r = SolveLp(sub.lp);
  if (r.status != LpStatus::kOptimal) {
    Fail(ErrorKind::kNumerical, std::string("closed-measure LP ended with status ") +
                                    LpStatusName(r.status));
  }
  MeasureResult out{DiscreteMeasure(polytope.grid, polytope.vset)};
  out.measure.weights = r.x;
  out.value = r.objective;
  out.multiplicity = Multiplicity(r, cols.size());
  out.iterations = r.iterations;
  return out;
}

MeasureResult FractionalMinimize(const MatherPolytope& polytope, const std::vector<double>& a,
                                 const std::vector<double>& b, DenominatorSign sign) {
  if (a.size() != polytope.variables() || b.size() != polytope.variables()) {
    Fail(ErrorKind::kConfiguration, "fractional objective size mismatch");
  }
  const auto cols = SearchColumns(polytope);
  const double s = sign == DenominatorSign::kPositive ? 1.0 : -1.0;
  for (std::size_t j : cols) {
    if (!(s * b[j] > 0.0)) {
      Fail(ErrorKind::kDomain, "denominator is not strictly " +
                                   std::string(s > 0 ? "positive" : "negative") +
                                   " on the Mather subpolytope (variable " + std::to_string(j) +
                                   ")");
    }
  }
  std::vector<double> numer(polytope.variables(), 0.0);
  for (std::size_t j : cols) numer[j] = s * a[j];
  SubLp sub = BuildSubLp(polytope, cols, numer);
  std::vector<double> norm(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) norm[c] = std::fabs(b[cols[c]]);
  AddRow(sub, norm, 1.0);
  if (!polytope.face_mode) AddMinimalityRow(sub, polytope, true);
  LpResult r = SolveOrThrow(sub.lp, polytope, "fractional_minimize");

  MeasureResult out{DiscreteMeasure(polytope.grid, polytope.vset)};
  double total = 0.0;
  for (std::size_t c = 0; c < cols.size(); ++c) total += r.x[c];
  if (!(total > 0.0)) Fail(ErrorKind::kNumerical, "fractional LP returned a zero measure");
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    double w = r.x[c] / total;
    out.measure.weights[cols[c]] = w;
    num += w * a[cols[c]];
    den += w * b[cols[c]];
  }
  out.value = num / den;
  out.multiplicity = Multiplicity(r, cols.size());
  out.iterations = r.iterations;
  return out;
}

std::vector<double> ProjectedMeasure(const DiscreteMeasure& mu) {
  const std::size_t m = mu.vset.size();
  std::vector<double> out(mu.grid.node_count(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < m; ++k) out[i] += mu.weights[i * m + k];
  }
  return out;
}

GraphReport GraphCheck(const DiscreteMeasure& mu, double tol) {
  GraphReport rep;
  const std::size_t m = mu.vset.size();
  const int d = mu.grid.d();
  const double allowed = 2.0 * mu.vset.step;
  for (std::size_t i = 0; i < mu.grid.node_count(); ++i) {
    double node_mass = 0.0;
    for (std::size_t k = 0; k < m; ++k) node_mass += mu.weights[i * m + k];
    if (node_mass < tol) continue;
    double spread = 0.0;
    for (int a = 0; a < d; ++a) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t k = 0; k < m; ++k) {
        if (mu.weights[i * m + k] <= 1e-12) continue;
        lo = std::min(lo, mu.vset[k][a]);
        hi = std::max(hi, mu.vset[k][a]);
      }
      spread = std::max(spread, hi - lo);
    }
    rep.nodes.push_back(i);
    rep.spreads.push_back(spread);
    rep.max_spread = std::max(rep.max_spread, spread);
    if (spread > allowed + 1e-12) rep.pass = false;
  }
  return rep;
}

double TotalVariation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) Fail(ErrorKind::kConfiguration, "measure size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::fabs(p[i] - q[i]);
  return 0.5 * acc;
}

void WriteMeasureCsv(const DiscreteMeasure& mu, const std::string& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  out << "node,velocity,weight\n";
  const std::size_t m = mu.vset.size();
  for (std::size_t j = 0; j < mu.weights.size(); ++j) {
    if (mu.weights[j] == 0.0) continue;
    out << j / m << "," << j % m << "," << FormatDouble(mu.weights[j]) << "\n";
  }
  if (!out) Fail(ErrorKind::kIo, "failed writing " + path);
}

void WriteProjectedCsv(const DiscreteMeasure& mu, const std::string& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  out << "node,weight\n";
  auto proj = ProjectedMeasure(mu);
  for (std::size_t i = 0; i < proj.size(); ++i) out << i << "," << FormatDouble(proj[i]) << "\n";
  if (!out) Fail(ErrorKind::kIo, "failed writing " + path);
}

}  // namespace wks
