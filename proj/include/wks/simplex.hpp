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

// Two-phase revised simplex for min c.x subject to A x = b, x >= 0 with a
// dense explicit basis inverse. Sized for a few thousand columns and up to
// about a thousand rows.

#ifndef WKS_SIMPLEX_HPP_
#define WKS_SIMPLEX_HPP_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace wks {

struct SparseColumn {
  std::vector<std::pair<int, double>> entries;  // (row, value)
};

struct LpProblem {
  std::size_t rows = 0;
  std::vector<SparseColumn> columns;
  std::vector<double> cost;
  std::vector<double> rhs;

  std::size_t cols() const { return columns.size(); }
  // Appends a column and returns its index.
  std::size_t AddColumn(SparseColumn column, double c);
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

const char* LpStatusName(LpStatus status);

struct LpOptions {
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  double feasibility_tol = 1e-9;
  // Consecutive degenerate pivots before switching from Dantzig to Bland.
  int degenerate_switch = 50;
  std::size_t max_iterations = 0;  // 0: 50 * (rows + cols)
  // Reduced-cost threshold below which a nonbasic column signals another optimum.
  double multiplicity_tol = 1e-9;
};

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> duals;          // one per row
  std::vector<double> reduced_costs;  // one per column, 0 on basic columns
  std::vector<int> basis;             // basic column per row, -1 for a kept artificial
  bool multiple_optima = false;
  std::size_t iterations = 0;
  double phase1_infeasibility = 0.0;
};

LpResult SolveLp(const LpProblem& problem, const LpOptions& options = {});

// max_i |(A x - b)_i|
double LpPrimalResidual(const LpProblem& problem, const std::vector<double>& x);

}  // namespace wks

#endif  // WKS_SIMPLEX_HPP_
