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

// Discretely closed measures on (node, velocity) pairs, the Mather linear
// program and linear/fractional minimisation over its optimal face.
//
// A measure w is closed when, for every node y,
//
//   sum_{(x,v)} w(x,v) P(x - v dt -> y) - sum_v w(y,v) = 0,
//
// where P is the interpolation weight of the foot point on y. This is the
// transition used by the solver, so both sides see one discretisation.

#ifndef WKS_MATHER_LP_HPP_
#define WKS_MATHER_LP_HPP_

#include <string>
#include <vector>

#include "wks/hj_solve.hpp"
#include "wks/simplex.hpp"

namespace wks {

struct DiscreteMeasure {
  PeriodicGrid grid;
  VelocitySet vset;
  std::vector<double> weights;  // index node * vset.size() + velocity

  DiscreteMeasure(PeriodicGrid g, VelocitySet v);
  double mass() const;
  double& at(std::size_t node, std::size_t k) { return weights[node * vset.size() + k]; }
  double at(std::size_t node, std::size_t k) const { return weights[node * vset.size() + k]; }
};

// One sparse column per (node, velocity) variable; rows are nodes.
std::vector<SparseColumn> ClosednessOperator(const PeriodicGrid& grid, const VelocitySet& vset,
                                             double dt);

std::vector<double> ApplyClosedness(const std::vector<SparseColumn>& op,
                                    const std::vector<double>& weights, std::size_t rows);

struct MatherPolytope {
  PeriodicGrid grid;
  VelocitySet vset;
  double dt = 0.0;
  std::vector<SparseColumn> closedness;
  std::vector<double> action;  // L0(x, v)
  std::vector<double> dLdu0;   // dL/du(x, v, 0)
  double c = 0.0;              // -(LP optimum)
  double tol_min = 0.0;
  double lp_value = 0.0;
  std::vector<double> lp_solution;
  std::vector<double> reduced_costs;
  bool lp_multiple_optima = false;
  // Columns of the optimal face (zero reduced cost). With tol_min = 0 every
  // Mather-subpolytope optimisation runs on these columns only.
  std::vector<std::size_t> face;
  bool face_mode = true;

  std::size_t variables() const { return action.size(); }
};

// Assembles the polytope for the scheme's model at u = 0 and solves the
// Mather LP once. Throws an infeasible error if the LP has no solution.
MatherPolytope BuildMatherPolytope(const Scheme& scheme, double tol_min = 0.0);

struct MeasureResult {
  DiscreteMeasure measure;
  double value = 0.0;
  bool multiplicity = false;
  std::size_t iterations = 0;
};

// The Mather LP optimiser stored in the polytope.
MeasureResult SolveMatherLp(const MatherPolytope& polytope);

MeasureResult MinimizeLinearOverMather(const MatherPolytope& polytope,
                                       const std::vector<double>& cost);

// Linear cost over all closed probability measures (no minimality constraint).
MeasureResult MinimizeLinearOverClosed(const MatherPolytope& polytope,
                                       const std::vector<double>& cost);

enum class DenominatorSign { kPositive, kNegative };

// min (sum w a) / (sum w b) over the Mather subpolytope (Charnes-Cooper).
MeasureResult FractionalMinimize(const MatherPolytope& polytope, const std::vector<double>& a,
                                 const std::vector<double>& b, DenominatorSign sign);

std::vector<double> ProjectedMeasure(const DiscreteMeasure& mu);

struct GraphReport {
  bool pass = true;
  double max_spread = 0.0;
  std::vector<std::size_t> nodes;     // nodes carrying at least tol mass
  std::vector<double> spreads;        // per listed node, max over axes
};

GraphReport GraphCheck(const DiscreteMeasure& mu, double tol = 1e-6);

double TotalVariation(const std::vector<double>& p, const std::vector<double>& q);

void WriteMeasureCsv(const DiscreteMeasure& mu, const std::string& path);
void WriteProjectedCsv(const DiscreteMeasure& mu, const std::string& path);

}  // namespace wks

#endif  // WKS_MATHER_LP_HPP_
