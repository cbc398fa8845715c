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

// Monotone semi-Lagrangian solver for
//
//   H(x, du, lambda u) + lambda V(x, lambda) = c0
//
// through the dynamic-programming operator
//
//   T[u](x) = min_v dt (L(x, v, lambda u(x)) - lambda V(x, lambda) + c0) + u(x - v dt).
//
// The value at x enters L and the interpolated foot value only through
// separate terms, so each node is updated implicitly in u(x) with the foot
// values frozen (Jacobi sweep).

#ifndef WKS_HJ_SOLVE_HPP_
#define WKS_HJ_SOLVE_HPP_

#include <optional>
#include <string>
#include <vector>

#include "wks/models.hpp"
#include "wks/torus_grid.hpp"

namespace wks {

// 0.4 h / vmax.
double DefaultDt(const PeriodicGrid& grid, const VelocitySet& vset);

// Foot-point stencils and velocity tables for one (model, grid, vset, dt).
class Scheme {
 public:
  Scheme(const ControlModel& model, const PeriodicGrid& grid, const VelocitySet& vset, double dt);

  const ControlModel& model() const { return *model_; }
  const PeriodicGrid& grid() const { return grid_; }
  const VelocitySet& vset() const { return vset_; }
  double dt() const { return dt_; }
  std::size_t nodes() const { return grid_.node_count(); }
  std::size_t velocities() const { return vset_.size(); }

  // Stencil of x_i - v_k dt.
  const Stencil& foot(std::size_t i, std::size_t k) const { return foot_[i * vset_.size() + k]; }
  double dtL0(std::size_t i, std::size_t k) const { return dt_l0_[i * vset_.size() + k]; }
  double dLdu0(std::size_t i, std::size_t k) const { return dldu0_[i * vset_.size() + k]; }
  // True when L = L0 + u_part(x, u) with u_part independent of v.
  bool separable() const { return separable_; }
  bool affine() const { return affine_; }
  double slope(std::size_t i) const { return slope_[i]; }

  // min_k dt L0(x_i, v_k) + f(foot(i,k)); ties go to the smaller k.
  double MinAction(const std::vector<double>& f, std::size_t i, std::size_t* argmin = nullptr) const;

  // dt L(x_i, v_k, w)
  double DtL(std::size_t i, std::size_t k, double w) const;

  // T[u](x_i) given potential samples V(x_i, lambda).
  double Apply(const std::vector<double>& u, std::size_t i, double lambda, double v_i,
               std::size_t* argmin = nullptr) const;

  // The w solving w = min_k dt L(x_i, v_k, lambda w) + u(foot) + dt (c0 - lambda V).
  double ImplicitUpdate(const std::vector<double>& u, std::size_t i, double lambda, double v_i,
                        double guess) const;

 private:
  const ControlModel* model_;
  PeriodicGrid grid_;
  VelocitySet vset_;
  double dt_;
  bool separable_ = false;
  bool affine_ = false;
  std::vector<Stencil> foot_;
  std::vector<double> dt_l0_;
  std::vector<double> dldu0_;
  std::vector<double> slope_;
  std::vector<TorusPoint> points_;
};

struct Bracket {
  GridField lower;
  GridField upper;
  double lambda0 = 0.0;
  double K0 = 0.0;
  double delta = 0.0;
  double kappa = 0.0;
  double T = 0.0;
  double C2 = 0.0;
};

// Sub/supersolution brackets built from a discrete critical solution.
Bracket ComputeBracket(const ControlModel& model, const GridField& critical_solution);

struct SolveOptions {
  double dt = 0.0;  // 0: DefaultDt
  double tol = 1e-8;
  std::size_t max_iter = 200000;
  const Bracket* bracket = nullptr;
  bool clamp = true;
  const GridField* init = nullptr;
  bool record_history = false;
};

struct SolveReport {
  double lambda = 0.0;
  double dt = 0.0;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  std::size_t bracket_violations = 0;
  bool converged = false;
  bool lambda_above_lambda0 = false;
  std::vector<double> residual_history;
};

struct SolveResult {
  GridField u;
  SolveReport report;
};

SolveResult SolvePerturbed(const ControlModel& model, double lambda, const PeriodicGrid& grid,
                           const VelocitySet& vset, const SolveOptions& options = {});

// Same as above with a prebuilt scheme.
SolveResult SolvePerturbed(const Scheme& scheme, double lambda, const SolveOptions& options);

// sup_x |u(x) - T[u](x)| / dt
double Residual(const ControlModel& model, double lambda, const GridField& u,
                const VelocitySet& vset, double dt);
double Residual(const Scheme& scheme, double lambda, const GridField& u);

// Potential samples V(x_i, lambda) on the grid.
std::vector<double> SamplePotential(const ControlModel& model, const PeriodicGrid& grid,
                                    double lambda);

struct NonexistenceDetail {
  double infimum = 0.0;  // inf_x [inf_u H(x,0,u) + lambda V(x,lambda)]
  double threshold = 0.0;
  std::size_t worst_node = 0;
};

// True when no subsolution can exist for this lambda (max-point argument).
bool NonexistenceCertificate(const ControlModel& model, double lambda, const PeriodicGrid& grid,
                             double margin = 1e-6, NonexistenceDetail* detail = nullptr);

struct SweepEntry {
  double lambda = 0.0;
  std::optional<SolveResult> result;
  std::string error;
};

// Solves along a strictly descending schedule, warm-starting from the
// previous converged field.
std::vector<SweepEntry> LambdaSweep(const ControlModel& model, const std::vector<double>& lambdas,
                                    const PeriodicGrid& grid, const VelocitySet& vset,
                                    const SolveOptions& options = {});

}  // namespace wks

#endif  // WKS_HJ_SOLVE_HPP_
