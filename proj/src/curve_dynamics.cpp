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

#include "wks/curve_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "wks/error.hpp"

namespace wks {

namespace {

double MaxSecondDifference(const GridField& u) {
  const PeriodicGrid& g = u.grid();
  const int n = g.n();
  double worst = 0.0;
  for (std::size_t idx = 0; idx < g.node_count(); ++idx) {
    int i0 = g.d() == 1 ? static_cast<int>(idx) : static_cast<int>(idx) / n;
    int i1 = g.d() == 1 ? 0 : static_cast<int>(idx) % n;
    if (g.d() == 1) {
      worst = std::max(worst, std::fabs(u[g.index(i0 + 1)] - 2 * u[idx] + u[g.index(i0 - 1)]));
      continue;
    }
    worst = std::max(worst, std::fabs(u[g.index(i0 + 1, i1)] - 2 * u[idx] + u[g.index(i0 - 1, i1)]));
    worst = std::max(worst, std::fabs(u[g.index(i0, i1 + 1)] - 2 * u[idx] + u[g.index(i0, i1 - 1)]));
  }
  return worst;
}

struct StepChoice {
  std::size_t k = 0;
  double action = 0.0;  // dt (L - lambda V + c0)
  double foot_value = 0.0;
};

StepChoice ChooseStep(const Scheme& scheme, double lambda, const GridField& u,
                      const TorusPoint& y) {
  const ControlModel& model = scheme.model();
  const VelocitySet& vs = scheme.vset();
  const double dt = scheme.dt();
  const double uy = Interpolate(u, y);
  const double w = lambda * uy;
  StepChoice best;
  double best_total = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < vs.size(); ++k) {
    Vec f{y.coords[0] - vs[k][0] * dt, y.coords[1] - vs[k][1] * dt};
    double foot = Interpolate(u, WrapPoint(f, y.d));
    double l = model.L(y, vs[k], w);
    double total = dt * l + foot;
    if (total < best_total) {
      best_total = total;
      best.k = k;
      best.foot_value = foot;
      best.action = dt * (l - lambda * model.V(y, lambda) + model.c0);
    }
  }
  return best;
}

double SpeedBound(const Scheme& scheme, double lambda, const GridField& u,
                  const SpeedBoundInputs& in) {
  const ControlModel& model = scheme.model();
  const PeriodicGrid& g = scheme.grid();
  double kappa = in.kappa;
  if (kappa < 0.0) {
    double vsup = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      vsup = std::max(vsup, std::fabs(model.V(g.node(i), lambda)));
    }
    kappa = 1.0 + vsup;
  }
  double d0 = in.D0 >= 0.0 ? in.D0 : u.discrete_lipschitz();
  double c0 = -std::numeric_limits<double>::infinity();
  std::size_t stride = std::max<std::size_t>(1, g.node_count() / 64);
  for (std::size_t i = 0; i < g.node_count(); i += stride) {
    TorusPoint x = g.node(i);
    for (std::size_t k = 0; k < scheme.velocities(); ++k) {
      c0 = std::max(c0, (d0 + 1.0) * scheme.vset().speed(k) -
                            model.L(x, scheme.vset()[k], in.lambda0 * d0));
    }
  }
  return c0 + in.lambda0 * (kappa - 1.0) - model.c0;
}

}  // namespace

CurveTrace BackwardCalibratedCurve(const Scheme& scheme, double lambda, const GridField& u,
                                   const TorusPoint& x, double Tmax, double solver_tol,
                                   const SpeedBoundInputs& bound) {
  if (!(u.grid() == scheme.grid())) Fail(ErrorKind::kConfiguration, "field grid mismatch");
  if (!(lambda > 0.0)) Fail(ErrorKind::kConfiguration, "lambda must be positive");
  const double dt = scheme.dt();
  CurveTrace tr;
  tr.dt = dt;
  tr.lambda = lambda;
  tr.vmax = scheme.vset().vmax;
  const std::size_t steps = Tmax >= dt ? static_cast<std::size_t>(std::floor(Tmax / dt + 1e-9)) : 0;
  tr.horizon = steps * dt;
  tr.defect_threshold = 10.0 * solver_tol * dt + MaxSecondDifference(u);
  tr.speed_bound = SpeedBound(scheme, lambda, u, bound);
  tr.points.reserve(steps + 1);
  tr.points.push_back(WrapPoint(x.coords, x.d));
  double log_weight = 0.0;
  std::size_t bad = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    const TorusPoint& y = tr.points.back();
    StepChoice c = ChooseStep(scheme, lambda, u, y);
    const Vec& v = scheme.vset()[c.k];
    double uy = Interpolate(u, y);
    double defect = std::fabs(uy - c.foot_value - c.action);
    if (defect > tr.defect_threshold) ++bad;
    double dl = scheme.model().dLdu0(y, v);
    tr.velocity_index.push_back(c.k);
    tr.velocities.push_back(v);
    tr.weights.push_back(std::exp(log_weight));
    tr.dLdu0.push_back(dl);
    tr.defects.push_back(defect);
    if (scheme.vset().on_boundary(c.k)) ++tr.boundary_steps;
    log_weight += lambda * dl * dt;
    Vec next{y.coords[0] - v[0] * dt, y.coords[1] - v[1] * dt};
    tr.points.push_back(WrapPoint(next, y.d));
  }
  if (steps > 0 && static_cast<double>(bad) >= 0.05 * static_cast<double>(steps)) {
    Fail(ErrorKind::kNumerical, "field not converged: " + std::to_string(bad) + " of " +
                                    std::to_string(steps) + " steps miss the calibration identity");
  }
  return tr;
}

CalibrationCheck CheckCalibration(const CurveTrace& trace, const GridField& u, const Scheme& scheme) {
  CalibrationCheck out;
  const ControlModel& model = scheme.model();
  const double dt = trace.dt;
  double total_action = 0.0;
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    const TorusPoint& y = trace.points[k];
    const Vec& v = trace.velocities[k];
    double uy = Interpolate(u, y);
    double action =
        dt * (model.L(y, v, trace.lambda * uy) - trace.lambda * model.V(y, trace.lambda) + model.c0);
    double d = std::fabs(uy - Interpolate(u, trace.points[k + 1]) - action);
    out.max_defect = std::max(out.max_defect, d / dt);
    total_action += action;
  }
  if (trace.steps() > 0) {
    out.telescoped = std::fabs(Interpolate(u, trace.points.front()) -
                               Interpolate(u, trace.points.back()) - total_action);
  }
  return out;
}

double TailMass(const CurveTrace& trace) {
  if (trace.steps() == 0) return 0.0;
  double total = 0.0;
  for (double w : trace.weights) total += w * trace.dt;
  double slowest = -std::numeric_limits<double>::infinity();
  for (double d : trace.dLdu0) slowest = std::max(slowest, d);
  double ratio = std::exp(trace.lambda * slowest * trace.dt);
  if (!(ratio < 1.0)) return 1.0;
  double last = trace.weights.back() * ratio;
  double tail = last * trace.dt / (1.0 - ratio);
  return tail / (total + tail);
}

DiscreteMeasure OccupationMeasure(const CurveTrace& trace, const PeriodicGrid& grid,
                                  const VelocitySet& vset, double tail_tol) {
  if (trace.steps() == 0) Fail(ErrorKind::kConfiguration, "empty trace");
  double tail = TailMass(trace);
  if (tail > tail_tol) {
    Fail(ErrorKind::kNumerical, "occupation measure tail mass " + FormatDouble(tail) +
                                    " exceeds " + FormatDouble(tail_tol) + "; extend Tmax");
  }
  DiscreteMeasure mu(grid, vset);
  double total = 0.0;
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    Stencil st = MakeStencil(grid, trace.points[k]);
    double w = trace.weights[k] * trace.dt;
    total += w;
    for (int s = 0; s < st.size; ++s) mu.at(st.nodes[s], trace.velocity_index[k]) += w * st.weights[s];
  }
  for (double& w : mu.weights) w /= total;
  return mu;
}

double CheckMassIdentity(const CurveTrace& trace) {
  if (trace.steps() == 0) Fail(ErrorKind::kConfiguration, "empty trace");
  double mass = 0.0, moment = 0.0;
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    mass += trace.weights[k] * trace.dt;
    moment += trace.dLdu0[k] * trace.weights[k] * trace.dt;
  }
  double lhs = moment / mass;
  double rhs = -1.0 / (trace.lambda * mass);
  return std::fabs(lhs - rhs) / std::fabs(rhs);
}

double ClosednessDefect(const DiscreteMeasure& mu, const std::vector<SparseColumn>& closedness) {
  if (closedness.size() != mu.weights.size()) {
    Fail(ErrorKind::kConfiguration, "closedness operator does not match the measure");
  }
  auto rows = ApplyClosedness(closedness, mu.weights, mu.grid.node_count());
  double worst = 0.0;
  for (double r : rows) worst = std::max(worst, std::fabs(r));
  return worst;
}

double NormalizedAction(const CurveTrace& trace, const Scheme& scheme) {
  double mass = 0.0, acc = 0.0;
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    double l0 = scheme.model().L0(trace.points[k], trace.velocities[k]);
    acc += (l0 + scheme.model().c0) * trace.weights[k];
    mass += trace.weights[k];
  }
  return mass > 0.0 ? acc / mass : 0.0;
}

SpeedCheck SpeedBoundCheck(const CurveTrace& trace) {
  SpeedCheck out;
  out.bound = trace.speed_bound;
  for (const Vec& v : trace.velocities) {
    out.max_speed = std::max(out.max_speed, std::hypot(v[0], v[1]));
  }
  if (trace.boundary_steps > 0) {
    out.pass = false;
    out.message = "velocity lattice truncates the argmin";
  } else if (out.max_speed > trace.vmax * std::sqrt(2.0) + 1e-12) {
    out.pass = false;
    out.message = "chosen speed exceeds vmax";
  } else if (out.max_speed > out.bound) {
    out.pass = false;
    out.message = "empirical speed exceeds the a-priori bound";
  }
  return out;
}

void WriteTraceCsv(const CurveTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  const int d = trace.points.empty() ? 1 : trace.points.front().d;
  out << "step,time";
  for (int a = 0; a < d; ++a) out << ",x" << a;
  for (int a = 0; a < d; ++a) out << ",v" << a;
  out << ",weight,defect\n";
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    out << k << "," << FormatDouble(-static_cast<double>(k) * trace.dt);
    for (int a = 0; a < d; ++a) out << "," << FormatDouble(trace.points[k].coords[a]);
    for (int a = 0; a < d; ++a) out << "," << FormatDouble(trace.velocities[k][a]);
    out << "," << FormatDouble(trace.weights[k]) << "," << FormatDouble(trace.defects[k]) << "\n";
  }
  if (!out) Fail(ErrorKind::kIo, "failed writing " + path);
}

}  // namespace wks
