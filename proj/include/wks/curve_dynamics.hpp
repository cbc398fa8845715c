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

// Backward calibrated curves of the discrete dynamic-programming principle,
// their discounted occupation measures and the diagnostics built on them.

#ifndef WKS_CURVE_DYNAMICS_HPP_
#define WKS_CURVE_DYNAMICS_HPP_

#include <string>
#include <vector>

#include "wks/hj_solve.hpp"
#include "wks/mather_lp.hpp"

namespace wks {

struct CurveTrace {
  double dt = 0.0;
  double lambda = 0.0;
  double horizon = 0.0;
  double vmax = 0.0;
  // points[0] = x, points[k+1] = points[k] - velocities[k] dt.
  std::vector<TorusPoint> points;
  std::vector<std::size_t> velocity_index;
  std::vector<Vec> velocities;
  // weights[k] = exp(lambda sum_{j<k} dL/du(xi_j, v_j, 0) dt); one per step.
  std::vector<double> weights;
  std::vector<double> dLdu0;
  std::vector<double> defects;
  // Tolerance used to flag a step as not calibrated.
  double defect_threshold = 0.0;
  // A-priori speed bound computed from the superlinearity constant.
  double speed_bound = 0.0;
  std::size_t boundary_steps = 0;

  std::size_t steps() const { return velocities.size(); }
};

struct SpeedBoundInputs {
  double lambda0 = 0.1;
  double kappa = -1.0;  // negative: 1 + sup |V|
  double D0 = -1.0;     // negative: discrete Lipschitz constant of the field
};

// Follows the argmin of the dynamic-programming operator backwards from x for
// floor(Tmax / dt) steps. Throws a numerical error when at least 5% of the
// steps miss the calibration identity by more than 10 solver_tol dt plus the
// interpolation allowance of the field.
CurveTrace BackwardCalibratedCurve(const Scheme& scheme, double lambda, const GridField& u,
                                   const TorusPoint& x, double Tmax, double solver_tol = 1e-8,
                                   const SpeedBoundInputs& bound = {});

struct CalibrationCheck {
  double max_defect = 0.0;  // max_k d_k / dt
  double telescoped = 0.0;  // |u(x) - u(end) - sum dt (L - lambda V + c0)|
};

CalibrationCheck CheckCalibration(const CurveTrace& trace, const GridField& u, const Scheme& scheme);

// Discount-weighted occupation measure, normalised to mass 1. Throws when the
// estimated mass beyond the horizon exceeds 1e-4 of the total.
DiscreteMeasure OccupationMeasure(const CurveTrace& trace, const PeriodicGrid& grid,
                                  const VelocitySet& vset, double tail_tol = 1e-4);

// Estimated relative mass beyond the horizon.
double TailMass(const CurveTrace& trace);

double CheckMassIdentity(const CurveTrace& trace);

double ClosednessDefect(const DiscreteMeasure& mu, const std::vector<SparseColumn>& closedness);

// sum_k (L0(xi_k, v_k) + c0) W_k / sum_k W_k
double NormalizedAction(const CurveTrace& trace, const Scheme& scheme);

struct SpeedCheck {
  bool pass = true;
  double max_speed = 0.0;
  double bound = 0.0;
  std::string message;
};

SpeedCheck SpeedBoundCheck(const CurveTrace& trace);

void WriteTraceCsv(const CurveTrace& trace, const std::string& path);

}  // namespace wks

#endif  // WKS_CURVE_DYNAMICS_HPP_
