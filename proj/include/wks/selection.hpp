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

// The selection operator
//
//   P phi(x) = inf over Mather measures mu of
//              int sigma(y) (h(y, x) + phi(y)) dmu / int sigma dmu,
//
// the limit formula
//
//   u0(x) = inf over Mather measures of
//           int (h(y, x) dL/du(y, v, 0) + V0(y)) dmu / int dL/du(y, v, 0) dmu,
//
// and the checks built on them. One fractional LP is solved per target node.

#ifndef WKS_SELECTION_HPP_
#define WKS_SELECTION_HPP_

#include <optional>
#include <string>
#include <vector>

#include "wks/action_barrier.hpp"
#include "wks/mather_lp.hpp"

namespace wks {

struct SelectionResult {
  GridField field;
  std::vector<double> per_x_value;
  std::vector<char> multiplicity;
  std::vector<DiscreteMeasure> per_x_optimizer;  // filled when requested
};

SelectionResult ApplySelectionOperator(const GridField& sigma, const GridField& phi,
                                       const BarrierMatrix& barrier,
                                       const MatherPolytope& polytope,
                                       bool keep_measures = false);

SelectionResult LimitSolutionFormula(const GridField& V0, const BarrierMatrix& barrier,
                                     const MatherPolytope& polytope, bool keep_measures = false);

struct FixedPointCheck {
  bool pass = false;
  double distance = 0.0;  // sup |P u - u|
};

FixedPointCheck CheckFixedPoint(const GridField& sigma, const GridField& u,
                                const BarrierMatrix& barrier, const MatherPolytope& polytope,
                                double tol);

struct LipschitzCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

LipschitzCheck CheckOperatorLipschitz(const GridField& sigma, const GridField& phi1,
                                      const GridField& phi2, const BarrierMatrix& barrier,
                                      const MatherPolytope& polytope, double slack = 1e-7);

struct ComparisonVerdict {
  bool hypothesis = false;
  bool conclusion = false;
  bool implication_holds = true;
  double min_integral = 0.0;  // min over Mather measures of int sigma (u2 - u1)
  double max_excess = 0.0;    // max_x u1 - u2
};

ComparisonVerdict MeasureComparison(const GridField& u1, const GridField& u2,
                                    const GridField& sigma, const MatherPolytope& polytope,
                                    double tol = 1e-7);

struct CandidateOutcome {
  std::string label;
  bool subsolution = false;
  double subsolution_defect = 0.0;  // max_x (w - T[w]) / dt
  bool member = false;
  double membership_value = 0.0;    // min over Mather of int (w dL/du - V0)
  bool dominated = false;
  double excess = 0.0;              // max_x w - u0
};

struct LargestSubsolutionReport {
  std::vector<CandidateOutcome> candidates;
  std::size_t violations = 0;
  bool pass() const { return violations == 0; }
};

struct Candidate {
  std::string label;
  GridField w;
};

// The scheme must carry the critical value in its model's c0.
LargestSubsolutionReport CheckLargestSubsolution(const GridField& u0, const GridField& V0,
                                                 const MatherPolytope& polytope,
                                                 const Scheme& critical_scheme,
                                                 const std::vector<Candidate>& candidates,
                                                 double tol = 1e-6);

struct EquilibriumResult {
  DiscreteMeasure witness;
  double value = 0.0;
  bool multiplicity = false;
};

EquilibriumResult EquilibriumMeasures(const GridField& phi, std::size_t x,
                                      const BarrierMatrix& barrier,
                                      const MatherPolytope& polytope);

// Lifts a node field to (node, velocity) weights.
std::vector<double> LiftToVariables(const std::vector<double>& node_values,
                                    const MatherPolytope& polytope);

void WriteSelectionCsv(const SelectionResult& r, const std::string& path);

}  // namespace wks

#endif  // WKS_SELECTION_HPP_
